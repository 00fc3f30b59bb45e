//! Encoder, contrastive loss and LARS training loop.

mod backprop;
mod checkpoint;
mod encoder;
mod lars;
mod loss;
mod train;

pub use backprop::loss_and_gradients;
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use encoder::{encoder_forward, Architecture, Dense, EncoderParams, ForwardCache};
pub use lars::{local_rate, update_group, Lars, LarsConfig};
pub use loss::{nt_xent_loss, nt_xent_with_grad, partner, NORM_FLOOR};
pub use train::{embed, embed_matrix, interleave, loss_gradients, train, TrainConfig, TrainReport};

use std::fmt;

use serde::{Deserialize, Serialize};

/// Which representation a report row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingVariant {
    /// The input features themselves.
    Raw,
    DebiasClr,
    /// Trained with cutout on the sensitive features.
    DebiasClrR,
}

impl EmbeddingVariant {
    pub const ALL: [EmbeddingVariant; 3] = [Self::Raw, Self::DebiasClr, Self::DebiasClrR];

    pub fn name(self) -> &'static str {
        match self {
            Self::Raw => "raw",
            Self::DebiasClr => "debias_clr",
            Self::DebiasClrR => "debias_clr_r",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Raw => "Before",
            Self::DebiasClr => "Debias-CLR",
            Self::DebiasClrR => "Debias-CLR-R",
        }
    }

    pub fn uses_cutout(self) -> Option<bool> {
        match self {
            Self::Raw => None,
            Self::DebiasClr => Some(false),
            Self::DebiasClrR => Some(true),
        }
    }
}

impl fmt::Display for EmbeddingVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
