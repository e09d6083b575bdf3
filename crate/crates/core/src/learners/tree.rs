//! Quantile binning and histogram-split regression trees on squared loss.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// One feature column discretized into at most `n_bins` ordered bins.
///
/// Bin `b` holds the values `x` with `cuts[b-1] < x <= cuts[b]`; the last bin is unbounded above.
#[derive(Debug, Clone)]
pub(crate) struct BinnedFeature<T> {
    pub feature: usize,
    pub cuts: Vec<T>,
    pub bins: Vec<u16>,
}

impl<T: Scalar> BinnedFeature<T> {
    pub fn new(feature: usize, values: &[T], n_bins: usize) -> Self {
        let cuts = quantile_cuts(values, n_bins);
        let bins = values.iter().map(|&v| bin_of(&cuts, v)).collect();
        Self { feature, cuts, bins }
    }

    pub fn n_bins(&self) -> usize {
        self.cuts.len() + 1
    }
}

fn bin_of<T: Scalar>(cuts: &[T], v: T) -> u16 {
    cuts.partition_point(|&c| c < v) as u16
}

/// Cut points for a column. With few distinct values every gap gets a midpoint cut,
/// otherwise cuts sit at evenly spaced order statistics.
pub(crate) fn quantile_cuts<T: Scalar>(values: &[T], n_bins: usize) -> Vec<T> {
    let n_bins = n_bins.clamp(2, u16::MAX as usize);
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() <= 1 {
        return Vec::new();
    }
    let two = T::one() + T::one();
    if distinct.len() <= n_bins {
        return distinct.windows(2).map(|w| (w[0] + w[1]) / two).collect();
    }
    let n = sorted.len();
    let max = distinct[distinct.len() - 1];
    let mut cuts: Vec<T> = (1..n_bins).map(|i| sorted[i * n / n_bins]).filter(|&c| c < max).collect();
    cuts.dedup();
    cuts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node<T> {
    Split { feature: usize, threshold: T, left: usize, right: usize },
    Leaf { value: T },
}

/// Binary regression tree; `nodes[0]` is the root. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn eval(&self, value_of: impl Fn(usize) -> T) -> T {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    at = if value_of(*feature) <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

struct Candidate<T> {
    gain: T,
    slot: usize,
    bin: u16,
}

/// Fit one tree to `residual` over the given binned features; leaf values are
/// mean residuals scaled by `shrinkage`. Returns the tree and the per-row increments,
/// or `None` when the root cannot be split.
pub(crate) fn grow_tree<T: Scalar>(
    features: &[BinnedFeature<T>],
    residual: &[T],
    params: TreeParams,
    shrinkage: T,
) -> Option<(Tree<T>, Vec<T>)> {
    let n = residual.len();
    let mut nodes: Vec<Node<T>> = Vec::new();
    let mut increments = vec![T::zero(); n];
    // (node slot, rows, depth)
    let mut stack: Vec<(usize, Vec<u32>, usize)> = vec![(0, (0..n as u32).collect(), 0)];
    nodes.push(Node::Leaf { value: T::zero() });
    let mut any_split = false;

    while let Some((slot, rows, depth)) = stack.pop() {
        let split = if depth < params.max_depth { best_split(features, residual, &rows, params) } else { None };
        match split {
            Some(c) => {
                any_split = true;
                let feat = &features[c.slot];
                let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
                    rows.iter().partition(|&&r| feat.bins[r as usize] <= c.bin);
                let left = nodes.len();
                nodes.push(Node::Leaf { value: T::zero() });
                let right = nodes.len();
                nodes.push(Node::Leaf { value: T::zero() });
                nodes[slot] = Node::Split {
                    feature: feat.feature,
                    threshold: feat.cuts[c.bin as usize],
                    left,
                    right,
                };
                stack.push((right, right_rows, depth + 1));
                stack.push((left, left_rows, depth + 1));
            }
            None => {
                let sum: T = rows.iter().map(|&r| residual[r as usize]).sum();
                let value = shrinkage * sum / T::of_usize(rows.len());
                nodes[slot] = Node::Leaf { value };
                for &r in &rows {
                    increments[r as usize] = value;
                }
            }
        }
    }
    any_split.then_some((Tree { nodes }, increments))
}

fn best_split<T: Scalar>(
    features: &[BinnedFeature<T>],
    residual: &[T],
    rows: &[u32],
    params: TreeParams,
) -> Option<Candidate<T>> {
    let n = rows.len();
    if n < 2 * params.min_leaf {
        return None;
    }
    let total: T = rows.iter().map(|&r| residual[r as usize]).sum();
    let sum_sq: T = rows.iter().map(|&r| residual[r as usize] * residual[r as usize]).sum();
    let n_t = T::of_usize(n);
    let parent = total * total / n_t;
    // gains below this are indistinguishable from rounding noise in the node's SSE
    let min_gain = T::epsilon() * T::of(1024.0) * sum_sq.max(T::min_positive_value());

    let mut best: Option<Candidate<T>> = None;
    let mut sums: Vec<T> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for (slot, feat) in features.iter().enumerate() {
        let m = feat.n_bins();
        if m < 2 {
            continue;
        }
        sums.clear();
        sums.resize(m, T::zero());
        counts.clear();
        counts.resize(m, 0);
        for &r in rows {
            let b = feat.bins[r as usize] as usize;
            sums[b] = sums[b] + residual[r as usize];
            counts[b] += 1;
        }
        let mut left_sum = T::zero();
        let mut left_n = 0usize;
        for b in 0..m - 1 {
            left_sum = left_sum + sums[b];
            left_n += counts[b];
            if counts[b] == 0 || left_n < params.min_leaf {
                continue;
            }
            let right_n = n - left_n;
            if right_n < params.min_leaf {
                break;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / T::of_usize(left_n)
                + right_sum * right_sum / T::of_usize(right_n)
                - parent;
            if gain <= min_gain {
                continue;
            }
            // strict improvement only: ties keep the lower bin, then the lower feature
            if best.as_ref().map_or(true, |c| gain > c.gain) {
                best = Some(Candidate { gain, slot, bin: b as u16 });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn few_distinct_values_get_midpoint_cuts() {
        let cuts = quantile_cuts(&[0.0, 1.0, 1.0, 3.0], 256);
        assert_eq!(cuts, vec![0.5, 2.0]);
        assert!(quantile_cuts(&[2.0, 2.0], 256).is_empty());
    }

    #[test]
    fn many_values_respect_bin_budget() {
        let values: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
        let feat = BinnedFeature::new(0, &values, 16);
        assert!(feat.n_bins() <= 16);
        assert!(feat.n_bins() >= 15);
        let mut counts = vec![0usize; feat.n_bins()];
        for &b in &feat.bins {
            counts[b as usize] += 1;
        }
        // roughly equal mass per bin
        assert!(counts.iter().all(|&c| c > 400 && c < 900), "{counts:?}");
    }

    #[test]
    fn bins_agree_with_thresholds() {
        let values: Vec<f64> = (0..500).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let feat = BinnedFeature::new(0, &values, 8);
        for (&v, &b) in values.iter().zip(&feat.bins) {
            for (k, &c) in feat.cuts.iter().enumerate() {
                assert_eq!(v <= c, (b as usize) <= k);
            }
        }
    }

    #[test]
    fn stump_splits_a_step() {
        let x: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v < 30.0 { -1.0 } else { 2.0 }).collect();
        let feat = BinnedFeature::new(0, &x, 256);
        let (tree, inc) =
            grow_tree(&[feat], &y, TreeParams { max_depth: 1, min_leaf: 1 }, 1.0).unwrap();
        assert_eq!(tree.nodes.len(), 3);
        assert_eq!(tree.eval(|_| 10.0), -1.0);
        assert_eq!(tree.eval(|_| 50.0), 2.0);
        assert_eq!(inc, y);
    }

    #[test]
    fn pure_node_does_not_split() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y = vec![3.0; 50];
        let feat = BinnedFeature::new(0, &x, 256);
        assert!(grow_tree(&[feat], &y, TreeParams { max_depth: 3, min_leaf: 1 }, 1.0).is_none());
    }

    #[test]
    fn min_leaf_is_enforced() {
        let x: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v < 3.0 { 10.0 } else { 0.0 }).collect();
        let feat = BinnedFeature::new(0, &x, 256);
        let (tree, inc) =
            grow_tree(&[feat], &y, TreeParams { max_depth: 1, min_leaf: 10 }, 1.0).unwrap();
        let mut sizes = std::collections::HashMap::new();
        for v in inc {
            *sizes.entry(v.to_bits()).or_insert(0) += 1;
        }
        assert!(sizes.values().all(|&c| c >= 10));
        assert_eq!(tree.split_features().count(), 1);
    }

    #[test]
    fn equal_gain_prefers_lower_feature() {
        let x: Vec<f64> = (0..20).map(|i| (i % 2) as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| v * 4.0).collect();
        let a = BinnedFeature::new(0, &x, 256);
        let b = BinnedFeature::new(1, &x, 256);
        let (tree, _) = grow_tree(&[a, b], &y, TreeParams { max_depth: 1, min_leaf: 1 }, 1.0).unwrap();
        assert_eq!(tree.split_features().collect::<Vec<_>>(), vec![0]);
    }
}
