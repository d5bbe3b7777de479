use rand::seq::index;

use super::manifest::{LabelState, Manifest, Split};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng};

/// Indices of train-split records carrying `state` for `class`.
pub fn eligible(manifest: &Manifest, class: &str, state: LabelState) -> Vec<usize> {
    manifest
        .records()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.split == Split::Train && r.label(class) == state)
        .map(|(i, _)| i)
        .collect()
}

/// Uniform sample of `k` items from `pool`, without replacement, returned
/// in ascending pool order.
pub(crate) fn sample_sorted(pool: &[usize], k: usize, seed: u64) -> Vec<usize> {
    let mut r = rng(seed);
    let mut picked: Vec<usize> = index::sample(&mut r, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Draws the same number of train-split records with label `state` for
/// `class` from both manifests: as many as the smaller side has.
///
/// Returned indices refer to each manifest's record list and are sorted.
pub fn balanced_subsample(
    manifest_a: &Manifest,
    manifest_b: &Manifest,
    class: &str,
    state: LabelState,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if state == LabelState::Unknown {
        return Err(Error::validation("balanced sampling requires a positive or negative state"));
    }
    let pool_a = eligible(manifest_a, class, state);
    let pool_b = eligible(manifest_b, class, state);
    for (side, pool) in [('a', &pool_a), ('b', &pool_b)] {
        if pool.is_empty() {
            return Err(Error::EmptyClass {
                class: class.to_string(),
                state: state.as_str().to_string(),
                side,
            });
        }
    }
    let k = pool_a.len().min(pool_b.len());
    Ok((
        sample_sorted(&pool_a, k, derive_seed(seed, "side-a")),
        sample_sorted(&pool_b, k, derive_seed(seed, "side-b")),
    ))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::data::manifest::ClipRecord;

    fn manifest(dataset: &str, pos: usize, neg: usize, test_pos: usize) -> Manifest {
        let mut recs = Vec::new();
        let mut push = |i: usize, split, state| {
            let mut labels = BTreeMap::new();
            labels.insert("organ".to_string(), state);
            recs.push(ClipRecord {
                clip_id: format!("{dataset}{i}"),
                dataset: dataset.into(),
                split,
                genres: vec![],
                labels,
            });
        };
        let mut i = 0;
        for _ in 0..pos {
            push(i, Split::Train, LabelState::Positive);
            i += 1;
        }
        for _ in 0..neg {
            push(i, Split::Train, LabelState::Negative);
            i += 1;
        }
        for _ in 0..test_pos {
            push(i, Split::Test, LabelState::Positive);
            i += 1;
        }
        Manifest::new(recs).unwrap()
    }

    #[test]
    fn follows_the_lower_count() {
        let a = manifest("A", 10, 3, 5);
        let b = manifest("B", 7, 3, 5);
        let (ia, ib) = balanced_subsample(&a, &b, "organ", LabelState::Positive, 1).unwrap();
        assert_eq!((ia.len(), ib.len()), (7, 7));
        for &i in &ia {
            assert_eq!(a.records()[i].split, Split::Train);
            assert_eq!(a.records()[i].label("organ"), LabelState::Positive);
        }
        assert_eq!(ib, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn empty_side_errors() {
        let a = manifest("A", 10, 3, 0);
        let b = manifest("B", 0, 3, 4);
        let err = balanced_subsample(&a, &b, "organ", LabelState::Positive, 1).unwrap_err();
        assert!(matches!(err, Error::EmptyClass { side: 'b', .. }));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = manifest("A", 50, 3, 0);
        let b = manifest("B", 20, 3, 0);
        let x = balanced_subsample(&a, &b, "organ", LabelState::Positive, 9).unwrap();
        let y = balanced_subsample(&a, &b, "organ", LabelState::Positive, 9).unwrap();
        let z = balanced_subsample(&a, &b, "organ", LabelState::Positive, 10).unwrap();
        assert_eq!(x, y);
        assert_ne!(x.0, z.0);
    }
}
