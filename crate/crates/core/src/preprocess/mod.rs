//! Sensitive-feature selection and class balancing.

mod mi;
mod select;
mod smote;

pub use mi::{mutual_information, MI_BINS, MI_MIN_SAMPLES};
pub use select::{select_sensitive_features, SensitiveProfile};
pub use smote::{smote, smote_rows, SyntheticRow, SMOTE_DEFAULT_K};
