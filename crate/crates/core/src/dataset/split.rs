use super::{AttributeClass, FeatureTable, Provenance, SensitiveAttribute};
use crate::error::{Error, Result};
use crate::numerics::RandomStream;

/// Per-class training quotas: largest-remainder rounding so the quotas sum to
/// `round(fraction * n)`, then nudged so every class with two or more members
/// lands on both sides when the total allows it.
fn class_quotas(sizes: [usize; 2], fraction: f64) -> [usize; 2] {
    let n: usize = sizes.iter().sum();
    let target = (fraction * n as f64).round() as usize;
    let exact = sizes.map(|s| fraction * s as f64);
    let mut quota = exact.map(|e| e.floor() as usize);
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut k = 0;
    while quota.iter().sum::<usize>() < target {
        let c = order[k % 2];
        if quota[c] < sizes[c] {
            quota[c] += 1;
        }
        k += 1;
    }
    for c in 0..2 {
        let other = 1 - c;
        if sizes[c] >= 2 && quota[c] == 0 && quota[other] > 1 {
            quota[c] += 1;
            quota[other] -= 1;
        }
        if sizes[c] >= 2 && quota[c] == sizes[c] && quota[other] < sizes[other].saturating_sub(1) {
            quota[c] -= 1;
            quota[other] += 1;
        }
    }
    quota
}

/// Shuffled train/test partition, stratified on `attribute`.
///
/// The training side has `round(train_fraction * n)` records; both sides keep
/// the stream's shuffled order.
pub fn split(
    table: &FeatureTable,
    train_fraction: f64,
    attribute: SensitiveAttribute,
    stream: &mut RandomStream,
) -> Result<(FeatureTable, FeatureTable)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    let classes = table.classes(attribute);
    let first = classes.iter().filter(|c| c.is_first()).count();
    let sizes = [first, classes.len() - first];
    let quota = class_quotas(sizes, train_fraction);
    let total: usize = quota.iter().sum();
    if total == 0 || total == table.len() {
        return Err(Error::DegenerateSplit(format!(
            "fraction {train_fraction} of {} records leaves one side empty",
            table.len()
        )));
    }

    let mut order: Vec<usize> = (0..table.len()).collect();
    stream.shuffle(&mut order);
    let mut taken = [0usize; 2];
    let (mut train, mut test) = (Vec::with_capacity(total), Vec::new());
    for i in order {
        let c = match classes[i] {
            AttributeClass::First => 0,
            AttributeClass::Second => 1,
        };
        if taken[c] < quota[c] {
            taken[c] += 1;
            train.push(i);
        } else {
            test.push(i);
        }
    }
    let describe = |side: &str| Provenance::Derived {
        description: format!(
            "{side} side of a {train_fraction} split stratified on {attribute} (seed {})",
            stream.seed()
        ),
    };
    Ok((
        table.select_rows(&train, describe("train"))?,
        table.select_rows(&test, describe("test"))?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::record;
    use crate::dataset::Gender;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn table(n_female: usize, n_male: usize) -> FeatureTable {
        let records = (0..n_female + n_male)
            .map(|i| {
                let g = if i < n_female {
                    Gender::Female
                } else {
                    Gender::Male
                };
                record(&format!("r{i}"), vec![i as f64], g)
            })
            .collect();
        FeatureTable::new(
            records,
            Provenance::Derived {
                description: "t".into(),
            },
        )
        .unwrap()
    }

    #[test]
    fn sizes_follow_fraction() {
        let t = table(5, 5);
        let (tr, te) = split(
            &t,
            0.8,
            SensitiveAttribute::Gender,
            &mut RandomStream::new(1),
        )
        .unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
    }

    #[test]
    fn small_fraction_keeps_both_classes_on_both_sides() {
        let t = table(5, 5);
        let (tr, te) = split(
            &t,
            0.2,
            SensitiveAttribute::Gender,
            &mut RandomStream::new(9),
        )
        .unwrap();
        for side in [&tr, &te] {
            let classes: BTreeSet<_> = side
                .classes(SensitiveAttribute::Gender)
                .into_iter()
                .map(|c| c.is_first())
                .collect();
            assert_eq!(classes.len(), 2);
        }
    }

    #[test]
    fn same_seed_same_partition() {
        let t = table(30, 20);
        let a = split(
            &t,
            0.6,
            SensitiveAttribute::Gender,
            &mut RandomStream::new(4),
        )
        .unwrap();
        let b = split(
            &t,
            0.6,
            SensitiveAttribute::Gender,
            &mut RandomStream::new(4),
        )
        .unwrap();
        assert_eq!(a.0.record_ids(), b.0.record_ids());
        assert_eq!(a.1.record_ids(), b.1.record_ids());
    }

    #[test]
    fn degenerate_split_is_rejected() {
        let t = table(1, 1);
        assert!(matches!(
            split(
                &t,
                0.1,
                SensitiveAttribute::Gender,
                &mut RandomStream::new(0)
            ),
            Err(Error::DegenerateSplit(_))
        ));
        assert!(split(
            &t,
            1.0,
            SensitiveAttribute::Gender,
            &mut RandomStream::new(0)
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn partition_is_disjoint_and_exhaustive(nf in 2usize..40, nm in 2usize..40, frac in 0.1f64..0.9, seed in any::<u64>()) {
            let t = table(nf, nm);
            let (tr, te) = split(&t, frac, SensitiveAttribute::Gender, &mut RandomStream::new(seed)).unwrap();
            prop_assert_eq!(tr.len(), (frac * t.len() as f64).round() as usize);
            let mut all: Vec<&str> = tr.record_ids();
            all.extend(te.record_ids());
            all.sort_unstable();
            let mut orig = t.record_ids();
            orig.sort_unstable();
            prop_assert_eq!(all, orig);
        }
    }
}
