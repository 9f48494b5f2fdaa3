use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Splits whole items (recordings) into train/validation/test partitions.
///
/// Partition sizes are `round(n * ratio)` for train and validation, with the
/// remainder going to test; every partition receives at least one item.
pub fn split_dataset<T: Clone>(items: &[T], ratios: (f64, f64, f64), seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let (rt, rv, rs) = ratios;
    if !(rt > 0.0 && rv > 0.0 && rs > 0.0) {
        return Err(Error::invalid("ratios", "all ratios must be positive"));
    }
    if ((rt + rv + rs) - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("ratios", format!("sum to {}, not 1", rt + rv + rs)));
    }
    let n = items.len();
    if n < 3 {
        return Err(Error::invalid(
            "recordings",
            format!("{n} recordings cannot fill 3 partitions"),
        ));
    }
    let mut sizes = [(n as f64 * rt).round() as usize, (n as f64 * rv).round() as usize, 0];
    sizes[0] = sizes[0].min(n);
    sizes[1] = sizes[1].min(n - sizes[0]);
    sizes[2] = n - sizes[0] - sizes[1];
    for i in 0..3 {
        if sizes[i] == 0 {
            let donor = (0..3).max_by_key(|&j| sizes[j]).unwrap();
            sizes[donor] -= 1;
            sizes[i] = 1;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    let (a, rest) = order.split_at(sizes[0]);
    let (b, c) = rest.split_at(sizes[1]);
    Ok((pick(a), pick(b), pick(c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rounds_sizes() {
        let items: Vec<u32> = (0..10).collect();
        let (a, b, c) = split_dataset(&items, (0.8, 0.1, 0.1), 1).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (8, 1, 1));
        let again = split_dataset(&items, (0.8, 0.1, 0.1), 1).unwrap();
        assert_eq!((a, b, c), again);
    }

    #[test]
    fn too_few_items() {
        assert!(split_dataset(&[1, 2], (0.8, 0.1, 0.1), 0).is_err());
        assert!(split_dataset(&[1, 2, 3], (0.8, 0.1, 0.2), 0).is_err());
    }

    proptest! {
        #[test]
        fn partitions_input(n in 3usize..60, seed in any::<u64>()) {
            let items: Vec<usize> = (0..n).collect();
            let (a, b, c) = split_dataset(&items, (0.7, 0.15, 0.15), seed).unwrap();
            prop_assert!(!a.is_empty() && !b.is_empty() && !c.is_empty());
            let mut all: Vec<usize> = a.into_iter().chain(b).chain(c).collect();
            all.sort();
            prop_assert_eq!(all, items);
        }
    }
}
