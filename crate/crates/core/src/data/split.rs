use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::LabeledDataset;
use crate::error::{Error, Result};

/// Per-class holdout quotas by largest remainder: each class gives up its
/// proportional share of `holdout`, rounded so the quotas sum exactly.
pub fn stratified_quotas(class_sizes: &[usize], holdout: usize) -> Vec<usize> {
    let total: usize = class_sizes.iter().sum();
    if total == 0 {
        return vec![0; class_sizes.len()];
    }
    let mut quotas: Vec<usize> = class_sizes.iter().map(|&n| holdout * n / total).collect();
    let mut rest: Vec<(usize, usize)> = class_sizes
        .iter()
        .enumerate()
        .map(|(c, &n)| ((holdout * n) % total, c))
        .collect();
    rest.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let missing = holdout - quotas.iter().sum::<usize>();
    for &(_, c) in rest.iter().take(missing) {
        quotas[c] += 1;
    }
    quotas
}

/// Splits off `holdout` samples as a validation set, preserving class
/// proportions. Returns `(train, validation)`; both keep original order.
pub fn stratified_split(data: &LabeledDataset, holdout: usize, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, val) = stratified_indices(data, holdout, seed)?;
    Ok((data.subset(&train), data.subset(&val)))
}

pub fn stratified_indices(data: &LabeledDataset, holdout: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if holdout > data.len() {
        return Err(Error::input(format!("cannot hold out {holdout} of {} samples", data.len())));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.class_count()];
    for (i, &l) in data.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let quotas = stratified_quotas(&sizes, holdout);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_val = vec![false; data.len()];
    for (members, &q) in by_class.iter_mut().zip(&quotas) {
        if q > members.len() {
            return Err(Error::input("class too small for a stratified holdout"));
        }
        members.shuffle(&mut rng);
        for &i in &members[..q] {
            in_val[i] = true;
        }
    }
    let (val, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| in_val[i]);
    Ok((train, val))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced(n: usize, classes: usize) -> LabeledDataset {
        let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
        LabeledDataset::new([1, 1, 1], (0..n).map(|i| i as f32).collect(), labels, classes).unwrap()
    }

    #[test]
    fn cifar_sized_split_holds_out_a_thousand_per_class() {
        assert_eq!(stratified_quotas(&[5000; 10], 10_000), vec![1000; 10]);
    }

    #[test]
    fn exact_split_counts() {
        let d = balanced(500, 10);
        let (train, val) = stratified_split(&d, 100, 3).unwrap();
        assert_eq!(val.len(), 100);
        assert_eq!(train.len(), 400);
        assert_eq!(val.class_histogram(), vec![10; 10]);
    }

    #[test]
    fn zero_holdout() {
        let d = balanced(20, 2);
        let (train, val) = stratified_split(&d, 0, 0).unwrap();
        assert!(val.is_empty());
        assert_eq!(train, d);
    }

    #[test]
    fn partition_is_exhaustive_and_disjoint() {
        let d = balanced(97, 3);
        let (tr, va) = stratified_indices(&d, 31, 11).unwrap();
        let mut all: Vec<usize> = tr.iter().chain(&va).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..97).collect::<Vec<_>>());
    }

    #[test]
    fn unbalanced_quotas_within_one_of_proportion() {
        let sizes = [70, 20, 7, 3];
        let q = stratified_quotas(&sizes, 33);
        assert_eq!(q.iter().sum::<usize>(), 33);
        for (n, q) in sizes.iter().zip(&q) {
            let exact = 33.0 * *n as f64 / 100.0;
            assert!((*q as f64 - exact).abs() < 1.0);
        }
    }

    #[test]
    fn holdout_larger_than_dataset() {
        assert!(stratified_split(&balanced(10, 2), 11, 0).is_err());
    }
}
