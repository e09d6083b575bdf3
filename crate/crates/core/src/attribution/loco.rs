use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mean_of;
use crate::data::{Dataset, FoldPlan, GroupSpec, SplitPlan};
use crate::dip::{decompose_bundle, DipTerms, FitBundle};
use crate::error::{DipError, Result};
use crate::learners::{fit_boosted, fit_constant, fit_ggam, LearnerConfig};
use crate::scalar::Scalar;
use crate::valuation::Normalizer;

/// Leave-one-covariate-out score of one feature and its split.
///
/// `loco = standalone + interaction - dependencies`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocoEntry<T> {
    pub feature: usize,
    pub name: String,
    pub loco: T,
    pub standalone: T,
    pub interaction: T,
    pub dependencies: T,
    pub cross_pred: T,
    pub covariance: T,
}

impl<T: Scalar> LocoEntry<T> {
    pub fn from_terms(feature: usize, name: String, terms: &DipTerms<T>) -> Self {
        Self {
            feature,
            name,
            loco: terms.v_joint - terms.v_jbar,
            standalone: terms.v_j,
            interaction: terms.interaction_surplus,
            dependencies: terms.dep,
            cross_pred: terms.cross_pred,
            covariance: terms.covariance,
        }
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            loco: self.loco * factor,
            standalone: self.standalone * factor,
            interaction: self.interaction * factor,
            dependencies: self.dependencies * factor,
            cross_pred: self.cross_pred * factor,
            covariance: self.covariance * factor,
            ..self.clone()
        }
    }

    /// `loco - (standalone + interaction - dependencies)`; zero up to rounding.
    pub fn identity_error(&self) -> T {
        self.loco - (self.standalone + self.interaction - self.dependencies)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocoFold<T> {
    pub fold: usize,
    pub normalizer: Normalizer<T>,
    pub entries: Vec<LocoEntry<T>>,
}

/// Per-feature entries averaged over folds, with the per-fold records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocoReport<T> {
    pub entries: Vec<LocoEntry<T>>,
    pub folds: Vec<LocoFold<T>>,
    pub normalized: bool,
}

fn average<T: Scalar>(folds: &[LocoFold<T>]) -> Vec<LocoEntry<T>> {
    let Some(first) = folds.first() else { return Vec::new() };
    (0..first.entries.len())
        .map(|j| {
            let pick = |f: fn(&LocoEntry<T>) -> T| mean_of(folds.iter().map(|fold| f(&fold.entries[j])));
            LocoEntry {
                feature: first.entries[j].feature,
                name: first.entries[j].name.clone(),
                loco: pick(|e| e.loco),
                standalone: pick(|e| e.standalone),
                interaction: pick(|e| e.interaction),
                dependencies: pick(|e| e.dependencies),
                cross_pred: pick(|e| e.cross_pred),
                covariance: pick(|e| e.covariance),
            }
        })
        .collect()
}

impl<T: Scalar> LocoReport<T> {
    /// Each fold scaled by its own test variance, then averaged. Idempotent.
    pub fn normalized(&self) -> Self {
        if self.normalized {
            return self.clone();
        }
        let folds: Vec<LocoFold<T>> = self
            .folds
            .iter()
            .map(|f| LocoFold {
                entries: f.entries.iter().map(|e| e.scaled(T::one() / f.normalizer.var_y)).collect(),
                ..f.clone()
            })
            .collect();
        Self { entries: average(&folds), folds, normalized: true }
    }
}

fn loco_fold<T: Scalar>(
    data: &Dataset<T>,
    fold: usize,
    split: &SplitPlan,
    config: &LearnerConfig,
) -> Result<LocoFold<T>> {
    let d = data.n_features();
    let normalizer = Normalizer::from_rows(data, &split.test_idx)?;
    let train = data.take_rows(&split.train_idx)?;
    let all: Vec<usize> = (0..d).collect();
    let f_full = fit_boosted(&train, &all, config)?.0;
    let f_const = fit_constant(&train)?;
    let entries = (0..d)
        .into_par_iter()
        .map(|j| {
            let group = GroupSpec::complement_of(vec![j], d)?;
            let ((f_j, f_jbar), ggam) = rayon::join(
                || {
                    rayon::join(
                        || fit_boosted(&train, &group.group_j, config),
                        || fit_boosted(&train, &group.group_jbar, config),
                    )
                },
                || fit_ggam(&train, &group, config),
            );
            let bundle = FitBundle {
                f_full: f_full.clone(),
                f_j: f_j?.0,
                f_jbar: f_jbar?.0,
                f_const: f_const.clone(),
                ggam: ggam?.0,
            };
            let result = decompose_bundle(&bundle, data, &split.test_idx, &group)?;
            Ok(LocoEntry::from_terms(j, data.feature_names()[j].clone(), &result.terms))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LocoFold { fold, normalizer, entries })
}

/// LOCO of every feature against the rest, decomposed per fold. The full model and the
/// baseline are fit once per fold. Entries are in raw units.
pub fn loco_dip<T: Scalar>(data: &Dataset<T>, folds: &FoldPlan, config: &LearnerConfig) -> Result<LocoReport<T>> {
    if data.n_features() < 2 {
        return Err(DipError::InvalidGroup(format!("LOCO needs at least 2 features, got {}", data.n_features())));
    }
    if folds.folds.is_empty() {
        return Err(DipError::InvalidSplit("no folds".into()));
    }
    config.validate()?;
    let folds = folds
        .folds
        .par_iter()
        .enumerate()
        .map(|(k, split)| loco_fold(data, k, split, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(LocoReport { entries: average(&folds), folds, normalized: false })
}
