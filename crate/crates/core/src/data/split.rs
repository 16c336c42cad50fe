use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitName {
    Train,
    Valid,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Valid => "valid",
            SplitName::Test => "test",
        }
    }
}

impl std::str::FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitName::Train),
            "valid" | "validation" => Ok(SplitName::Valid),
            "test" => Ok(SplitName::Test),
            _ => Err(Error::invalid(format!("unknown split `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            valid: 0.1,
            test: 0.1,
        }
    }
}

/// Seeded permutation followed by a contiguous cut. Validation and test
/// sizes are floored; the remainder goes to training.
pub fn split<T>(items: Vec<T>, ratios: SplitRatios, seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let sum = ratios.train + ratios.valid + ratios.test;
    if (sum - 1.0).abs() > 1e-9 || ratios.train < 0.0 || ratios.valid < 0.0 || ratios.test < 0.0 {
        return Err(Error::invalid(format!("split ratios must be non-negative and sum to 1, got {sum}")));
    }
    let n = items.len();
    if n < 3 {
        return Err(Error::invalid(format!("cannot split {n} samples three ways")));
    }
    let n_valid = (n as f64 * ratios.valid).floor() as usize;
    let n_test = (n as f64 * ratios.test).floor() as usize;
    let n_train = n - n_valid - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    let mut take = |range: std::ops::Range<usize>| -> Vec<T> {
        order[range].iter().map(|&i| slots[i].take().expect("each index once")).collect()
    };
    let train = take(0..n_train);
    let valid = take(n_train..n_train + n_valid);
    let test = take(n_train + n_valid..n);
    Ok((train, valid, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ten_samples() {
        let (a, b, c) = split((0..10).collect(), SplitRatios::default(), 1).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (8, 1, 1));
    }

    #[test]
    fn twelve_samples_floor_rule() {
        let (a, b, c) = split((0..12).collect(), SplitRatios::default(), 1).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (10, 1, 1));
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(split(vec![1, 2], SplitRatios::default(), 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn same_seed_same_partition() {
        let a = split((0..100).collect::<Vec<_>>(), SplitRatios::default(), 7).unwrap();
        let b = split((0..100).collect::<Vec<_>>(), SplitRatios::default(), 7).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 3usize..300, seed in any::<u64>()) {
            let (a, b, c) = split((0..n).collect::<Vec<_>>(), SplitRatios::default(), seed).unwrap();
            let mut all: Vec<usize> = a.into_iter().chain(b).chain(c).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
