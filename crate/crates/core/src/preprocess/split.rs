//! Deterministic train/test split.

use super::{BeatImage, PreprocessError};
use crate::rng::Rng;

#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub train: Vec<BeatImage>,
    pub test: Vec<BeatImage>,
    pub seed: u64,
}

/// Shuffles with the seeded generator and takes the first
/// `round(train_fraction * n)` items as the train set. The same seed always
/// produces the same partition.
pub fn split(
    items: Vec<BeatImage>,
    train_fraction: f64,
    seed: u64,
) -> Result<DatasetSplit, PreprocessError> {
    if items.is_empty() {
        return Err(PreprocessError::EmptyDataset);
    }
    let mut items = items;
    Rng::new(seed).shuffle(&mut items);
    let n_train = (train_fraction * items.len() as f64).round() as usize;
    let n_train = n_train.min(items.len());
    let test = items.split_off(n_train);
    Ok(DatasetSplit { train: items, test, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(label: u16) -> BeatImage {
        BeatImage { pixels: vec![label as f32; 4], label, meta_vector: [0.0, 0.0] }
    }

    fn labels(xs: &[BeatImage]) -> Vec<u16> {
        xs.iter().map(|b| b.label).collect()
    }

    #[test]
    fn nine_to_one_on_ten_items() {
        let items: Vec<BeatImage> = (0..10).map(item).collect();
        let s = split(items, 0.9, 257).unwrap();
        assert_eq!(s.train.len(), 9);
        assert_eq!(s.test.len(), 1);
        let mut all = labels(&s.train);
        all.extend(labels(&s.test));
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<u16>>());
    }

    #[test]
    fn same_seed_same_partition() {
        let a = split((0..100).map(item).collect(), 0.9, 257).unwrap();
        let b = split((0..100).map(item).collect(), 0.9, 257).unwrap();
        assert_eq!(labels(&a.train), labels(&b.train));
        assert_eq!(labels(&a.test), labels(&b.test));
    }

    #[test]
    fn different_seeds_differ() {
        let a = split((0..100).map(item).collect(), 0.9, 257).unwrap();
        let b = split((0..100).map(item).collect(), 0.9, 258).unwrap();
        assert_ne!(labels(&a.train), labels(&b.train));
    }

    #[test]
    fn empty_input_errors() {
        assert!(matches!(split(vec![], 0.9, 1), Err(PreprocessError::EmptyDataset)));
    }
}
