use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroupSpec, SplitPlan};
use crate::dip::{decompose, DipResult};
use crate::error::{DipError, Result};
use crate::learners::LearnerConfig;
use crate::scalar::Scalar;

/// Decomposition of `{a}` against `{b}` on the data restricted to those two columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseCell<T> {
    pub pair: (usize, usize),
    pub names: (String, String),
    pub result: DipResult<T>,
}

/// One cell per other feature `b`, each with `J = {focus}`. Results are in raw units.
pub fn pairwise_dip<T: Scalar>(
    data: &Dataset<T>,
    split: &SplitPlan,
    focus: usize,
    config: &LearnerConfig,
) -> Result<Vec<PairwiseCell<T>>> {
    let d = data.n_features();
    if d < 2 {
        return Err(DipError::InvalidGroup(format!("pairwise decomposition needs at least 2 features, got {d}")));
    }
    data.check_index(focus)?;
    let group = GroupSpec::new(vec![0], vec![1], 2)?;
    (0..d)
        .filter(|&b| b != focus)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|b| {
            let pair_data = data.project(&[focus, b])?;
            let result = decompose(&pair_data, split, &group, config)?;
            let names = data.feature_names();
            Ok(PairwiseCell { pair: (focus, b), names: (names[focus].clone(), names[b].clone()), result })
        })
        .collect()
}
