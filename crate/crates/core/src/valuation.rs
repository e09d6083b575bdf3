//! Held-out predictive power: baseline risk minus model risk.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{DipError, Result};
use crate::learners::Model;
use crate::scalar::{variance, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate<T> {
    pub subset: Vec<usize>,
    pub value: T,
    pub baseline_risk: T,
    pub model_risk: T,
    pub n_test: usize,
}

/// Variance of the target on the evaluation rows, used to report shares of explained variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer<T> {
    pub var_y: T,
}

impl<T: Scalar> Normalizer<T> {
    pub fn new(var_y: T) -> Result<Self> {
        if !(var_y > T::zero()) {
            return Err(DipError::ZeroVariance);
        }
        Ok(Self { var_y })
    }

    pub fn from_rows(data: &Dataset<T>, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(DipError::EmptyData("no evaluation rows"));
        }
        let ys: Vec<T> = idx.iter().map(|&i| data.target()[i]).collect();
        Self::new(variance(&ys))
    }
}

/// Mean squared error of `predictions` against the targets of rows `idx`.
pub(crate) fn risk_of<T: Scalar>(predictions: &[T], data: &Dataset<T>, idx: &[usize]) -> T {
    let y = data.target();
    idx.iter()
        .zip(predictions)
        .map(|(&i, &p)| (p - y[i]) * (p - y[i]))
        .sum::<T>()
        / T::of_usize(idx.len())
}

pub fn empirical_risk<T: Scalar>(model: &Model<T>, data: &Dataset<T>, idx: &[usize]) -> Result<T> {
    if idx.is_empty() {
        return Err(DipError::EmptyData("empty index set"));
    }
    let predictions = model.predict_rows(data, idx)?;
    Ok(risk_of(&predictions, data, idx))
}

/// Predictive power of `model_s` on the test rows relative to the constant `baseline`.
///
/// Values are not clamped; a model worse than the baseline gets a negative value.
pub fn value<T: Scalar>(
    model_s: &Model<T>,
    baseline: &Model<T>,
    data: &Dataset<T>,
    test_idx: &[usize],
) -> Result<ValueEstimate<T>> {
    let baseline_risk = empirical_risk(baseline, data, test_idx)?;
    let model_risk = empirical_risk(model_s, data, test_idx)?;
    Ok(ValueEstimate {
        subset: model_s.feature_scope(),
        value: baseline_risk - model_risk,
        baseline_risk,
        model_risk,
        n_test: test_idx.len(),
    })
}

pub fn normalize<T: Scalar>(estimate: &ValueEstimate<T>, norm: &Normalizer<T>) -> T {
    estimate.value / norm.var_y
}
