//! Decomposition of the cooperative impact of two feature groups into the
//! interaction surplus and the main-effect dependencies, with the dependencies
//! further split into cross-predictability and covariance.
//!
//! Every estimate is computed on test rows from models fit on training rows:
//!
//! ```text
//! psi  = v(J u Jbar) - v(J) - v(Jbar)
//! int  = v_full(J u Jbar) - v_ggam(J u Jbar)
//! dep  = int - psi
//! co   = 2 Cov(g_J, g_Jbar)
//! cp   = dep - co
//! ```

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroupSpec, SplitPlan};
use crate::error::{DipError, Result};
use crate::learners::{
    component_values_rows, fit_boosted, fit_constant, fit_ggam, Component, LearnerConfig, Model,
};
use crate::scalar::{covariance, Scalar};
use crate::valuation::{empirical_risk, Normalizer};

/// The eight numbers of a two-group decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipTerms<T> {
    pub v_j: T,
    pub v_jbar: T,
    pub v_joint: T,
    pub psi: T,
    pub interaction_surplus: T,
    pub dep: T,
    pub cross_pred: T,
    pub covariance: T,
}

/// Test-set risks of the models a decomposition needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleRisks<T> {
    pub baseline: T,
    pub full: T,
    pub j: T,
    pub jbar: T,
    pub ggam: T,
}

impl<T: Scalar> DipTerms<T> {
    /// Assemble the decomposition from risks and the main-effect covariance term `co`
    /// (already doubled). The three additivity identities hold by construction.
    pub fn from_risks(risks: BundleRisks<T>, co: T) -> Self {
        let v_joint = risks.baseline - risks.full;
        let v_j = risks.baseline - risks.j;
        let v_jbar = risks.baseline - risks.jbar;
        let v_ggam = risks.baseline - risks.ggam;
        let psi = v_joint - v_j - v_jbar;
        let interaction_surplus = v_joint - v_ggam;
        let dep = main_effect_dependencies(psi, interaction_surplus);
        Self {
            v_j,
            v_jbar,
            v_joint,
            psi,
            interaction_surplus,
            dep,
            cross_pred: dep - co,
            covariance: co,
        }
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            v_j: self.v_j * factor,
            v_jbar: self.v_jbar * factor,
            v_joint: self.v_joint * factor,
            psi: self.psi * factor,
            interaction_surplus: self.interaction_surplus * factor,
            dep: self.dep * factor,
            cross_pred: self.cross_pred * factor,
            covariance: self.covariance * factor,
        }
    }

    /// Same decomposition seen from the other group.
    pub fn swapped(&self) -> Self {
        Self { v_j: self.v_jbar, v_jbar: self.v_j, ..*self }
    }

    /// `v_joint - (v_j + v_jbar + int - cp - co)`; zero up to rounding.
    pub fn reconstruction_error(&self) -> T {
        self.v_joint
            - (self.v_j + self.v_jbar + self.interaction_surplus - self.cross_pred - self.covariance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipResult<T> {
    pub group: GroupSpec,
    #[serde(flatten)]
    pub terms: DipTerms<T>,
    pub normalizer: Normalizer<T>,
    pub normalized: bool,
}

impl<T: Scalar> DipResult<T> {
    /// Every term divided by the test variance of the target. Idempotent.
    pub fn normalize(&self) -> Self {
        if self.normalized {
            return self.clone();
        }
        Self {
            terms: self.terms.scaled(T::one() / self.normalizer.var_y),
            normalized: true,
            ..self.clone()
        }
    }
}

/// The five models of one decomposition, all fit on the same training rows.
#[derive(Debug, Clone)]
pub struct FitBundle<T> {
    pub f_full: Model<T>,
    pub f_j: Model<T>,
    pub f_jbar: Model<T>,
    pub f_const: Model<T>,
    pub ggam: Model<T>,
}

/// Fit the unrestricted model, the two restricted models, the baseline and the
/// groupwise additive model on the training rows of `split`.
pub fn fit_bundle<T: Scalar>(
    data: &Dataset<T>,
    split: &SplitPlan,
    group: &GroupSpec,
    config: &LearnerConfig,
) -> Result<FitBundle<T>> {
    let train = data.take_rows(&split.train_idx)?;
    let all = group.all();
    let ((f_full, f_j), (f_jbar, ggam)) = rayon::join(
        || rayon::join(|| fit_boosted(&train, &all, config), || fit_boosted(&train, &group.group_j, config)),
        || rayon::join(|| fit_boosted(&train, &group.group_jbar, config), || fit_ggam(&train, group, config)),
    );
    Ok(FitBundle {
        f_full: f_full?.0,
        f_j: f_j?.0,
        f_jbar: f_jbar?.0,
        f_const: fit_constant(&train)?,
        ggam: ggam?.0,
    })
}

fn bundle_risks<T: Scalar>(bundle: &FitBundle<T>, data: &Dataset<T>, test_idx: &[usize]) -> Result<BundleRisks<T>> {
    Ok(BundleRisks {
        baseline: empirical_risk(&bundle.f_const, data, test_idx)?,
        full: empirical_risk(&bundle.f_full, data, test_idx)?,
        j: empirical_risk(&bundle.f_j, data, test_idx)?,
        jbar: empirical_risk(&bundle.f_jbar, data, test_idx)?,
        ggam: empirical_risk(&bundle.ggam, data, test_idx)?,
    })
}

/// `v(J u Jbar) - v(J) - v(Jbar)` on the test rows.
pub fn cooperative_impact<T: Scalar>(bundle: &FitBundle<T>, data: &Dataset<T>, test_idx: &[usize]) -> Result<T> {
    let r = bundle_risks(bundle, data, test_idx)?;
    Ok(DipTerms::from_risks(r, T::zero()).psi)
}

/// Value of the unrestricted model minus value of the groupwise additive model.
pub fn interaction_surplus<T: Scalar>(bundle: &FitBundle<T>, data: &Dataset<T>, test_idx: &[usize]) -> Result<T> {
    let r = bundle_risks(bundle, data, test_idx)?;
    Ok(DipTerms::from_risks(r, T::zero()).interaction_surplus)
}

/// `Dep = Int - Psi`.
pub fn main_effect_dependencies<T: Scalar>(psi: T, int_surplus: T) -> T {
    int_surplus - psi
}

/// Twice the 1/n covariance of the two centered components on the test rows.
pub fn main_effect_covariance<T: Scalar>(ggam: &Model<T>, data: &Dataset<T>, test_idx: &[usize]) -> Result<T> {
    if test_idx.is_empty() {
        return Err(DipError::EmptyData("empty test set"));
    }
    let gj = component_values_rows(ggam, data, test_idx, Component::J)?;
    let gjbar = component_values_rows(ggam, data, test_idx, Component::JBar)?;
    Ok((T::one() + T::one()) * covariance(&gj, &gjbar))
}

/// Returns `(cross_pred, covariance)` with `cross_pred = dep - covariance`.
pub fn split_dependencies<T: Scalar>(
    bundle: &FitBundle<T>,
    data: &Dataset<T>,
    test_idx: &[usize],
    dep: T,
) -> Result<(T, T)> {
    let co = main_effect_covariance(&bundle.ggam, data, test_idx)?;
    Ok((dep - co, co))
}

/// Decomposition from an already fitted bundle, evaluated on `test_idx`.
pub fn decompose_bundle<T: Scalar>(
    bundle: &FitBundle<T>,
    data: &Dataset<T>,
    test_idx: &[usize],
    group: &GroupSpec,
) -> Result<DipResult<T>> {
    let normalizer = Normalizer::from_rows(data, test_idx)?;
    let risks = bundle_risks(bundle, data, test_idx)?;
    let co = main_effect_covariance(&bundle.ggam, data, test_idx)?;
    let terms = DipTerms::from_risks(risks, co);
    warn_if_not_monotone(&terms, normalizer.var_y);
    Ok(DipResult { group: group.clone(), terms, normalizer, normalized: false })
}

pub(crate) fn warn_if_not_monotone<T: Scalar>(terms: &DipTerms<T>, var_y: T) {
    let slack = T::of(0.05) * var_y;
    if terms.v_joint < terms.v_j.max(terms.v_jbar) - slack {
        log::warn!(
            "joint value {} is well below a restricted value ({}, {}); the unrestricted fit may be poor",
            terms.v_joint,
            terms.v_j,
            terms.v_jbar
        );
    }
}

/// Fit the bundle on the training rows and decompose on the test rows. The result is
/// in raw units; call [`DipResult::normalize`] for shares of `Var(Y)`.
pub fn decompose<T: Scalar>(
    data: &Dataset<T>,
    split: &SplitPlan,
    group: &GroupSpec,
    config: &LearnerConfig,
) -> Result<DipResult<T>> {
    if split.test_idx.is_empty() {
        return Err(DipError::EmptyData("empty test set"));
    }
    let bundle = fit_bundle(data, split, group, config)?;
    decompose_bundle(&bundle, data, &split.test_idx, group)
}
