//! Feature-importance scores split into standalone, interaction and dependence parts.

mod loco;
mod pairwise;
mod sage;

pub use loco::{loco_dip, LocoEntry, LocoFold, LocoReport};
pub use pairwise::{pairwise_dip, PairwiseCell};
pub use sage::{sage_dip, SageEntry, SageReport, MAX_EXACT_FEATURES};

use crate::error::{DipError, Result};
use crate::scalar::Scalar;

/// Shapley weight `(d - s - 1)! s! / d!` of a coalition of size `s` among `d` players.
pub fn shapley_weight<T: Scalar>(s_size: usize, d: usize) -> Result<T> {
    if d == 0 || s_size >= d {
        return Err(DipError::InvalidParameter(format!("coalition size {s_size} out of range for {d} features")));
    }
    // 1 / (d * C(d-1, s)), with the binomial built up multiplicatively
    let m = d - 1;
    let k = s_size.min(m - s_size);
    let binom = (0..k).fold(1.0f64, |acc, i| acc * (m - i) as f64 / (i + 1) as f64);
    Ok(T::of(1.0 / (d as f64 * binom.round())))
}

pub(crate) fn mean_of<T: Scalar>(xs: impl IntoIterator<Item = T>) -> T {
    let (sum, n) = xs.into_iter().fold((T::zero(), 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        T::zero()
    } else {
        sum / T::of_usize(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights() {
        assert_eq!(shapley_weight::<f64>(0, 2).unwrap(), 0.5);
        assert!((shapley_weight::<f64>(1, 3).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!(shapley_weight::<f64>(3, 3).is_err());
        assert!(shapley_weight::<f64>(0, 0).is_err());
    }

    #[test]
    fn weights_sum_to_one_over_subsets() {
        for d in 1..=10usize {
            let total: f64 =
                (0u32..1 << (d - 1)).map(|mask| shapley_weight::<f64>(mask.count_ones() as usize, d).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-12, "d={d}: {total}");
        }
    }
}
