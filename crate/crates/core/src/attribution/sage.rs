use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_of, shapley_weight};
use crate::data::{Dataset, SplitPlan};
use crate::error::{DipError, Result};
use crate::learners::{fit_boosted, fit_constant, fit_groupwise, LearnerConfig};
use crate::scalar::Scalar;
use crate::valuation::{empirical_risk, Normalizer};

pub const MAX_EXACT_FEATURES: usize = 12;
const MAX_SAMPLED_FEATURES: usize = 64;

/// Shapley effect of one feature and its split.
///
/// `phi = standalone + avg_interaction - avg_dependencies`. In exact mode `n_orderings`
/// and `std_err` are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SageEntry<T> {
    pub feature: usize,
    pub name: String,
    pub phi: T,
    pub standalone: T,
    pub avg_interaction: T,
    pub avg_dependencies: T,
    pub n_orderings: usize,
    pub std_err: T,
}

impl<T: Scalar> SageEntry<T> {
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            phi: self.phi * factor,
            standalone: self.standalone * factor,
            avg_interaction: self.avg_interaction * factor,
            avg_dependencies: self.avg_dependencies * factor,
            std_err: self.std_err * factor,
            ..self.clone()
        }
    }

    /// `phi - (standalone + avg_interaction - avg_dependencies)`; zero up to rounding.
    pub fn identity_error(&self) -> T {
        self.phi - (self.standalone + self.avg_interaction - self.avg_dependencies)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SageReport<T> {
    pub entries: Vec<SageEntry<T>>,
    /// Sampled permutations; empty in exact mode.
    pub orderings: Vec<Vec<usize>>,
    /// `surpluses[o][j]`: surplus of feature `j` when it joins in ordering `o`.
    pub surpluses: Vec<Vec<T>>,
    /// Value of the full feature set; every row of `surpluses` sums to it.
    pub v_full: T,
    pub normalizer: Normalizer<T>,
    pub exact: bool,
    pub normalized: bool,
}

impl<T: Scalar> SageReport<T> {
    /// Every value divided by the test variance of the target. Idempotent.
    pub fn normalized(&self) -> Self {
        if self.normalized {
            return self.clone();
        }
        let f = T::one() / self.normalizer.var_y;
        Self {
            entries: self.entries.iter().map(|e| e.scaled(f)).collect(),
            surpluses: self.surpluses.iter().map(|row| row.iter().map(|&s| s * f).collect()).collect(),
            v_full: self.v_full * f,
            normalized: true,
            ..self.clone()
        }
    }

    /// Largest `|sum_j surplus - v_full|` over orderings.
    pub fn telescoping_error(&self) -> T {
        self.surpluses
            .iter()
            .map(|row| (row.iter().copied().sum::<T>() - self.v_full).abs())
            .fold(T::zero(), T::max)
    }
}

type Mask = u64;

fn members(mask: Mask) -> Vec<usize> {
    (0..MAX_SAMPLED_FEATURES).filter(|&i| mask & (1 << i) != 0).collect()
}

/// Values `v(S)` and groupwise values `v_ggam({j}, S)` for the coalitions a run needs,
/// each fit once on the training rows.
struct CoalitionCache<T> {
    value: HashMap<Mask, T>,
    ggam_value: HashMap<(usize, Mask), T>,
}

impl<T: Scalar> CoalitionCache<T> {
    fn build(
        data: &Dataset<T>,
        split: &SplitPlan,
        config: &LearnerConfig,
        masks: BTreeSet<Mask>,
        pairs: BTreeSet<(usize, Mask)>,
    ) -> Result<Self> {
        let train = data.take_rows(&split.train_idx)?;
        let test = &split.test_idx;
        let baseline = empirical_risk(&fit_constant(&train)?, data, test)?;
        let value = masks
            .into_par_iter()
            .map(|mask| {
                if mask == 0 {
                    return Ok((mask, T::zero()));
                }
                let model = fit_boosted(&train, &members(mask), config)?.0;
                Ok((mask, baseline - empirical_risk(&model, data, test)?))
            })
            .collect::<Result<HashMap<_, _>>>()?;
        let ggam_value = pairs
            .into_par_iter()
            .map(|(j, mask)| {
                let model = fit_groupwise(&train, &[j], &members(mask), config)?.0;
                Ok(((j, mask), baseline - empirical_risk(&model, data, test)?))
            })
            .collect::<Result<HashMap<_, _>>>()?;
        Ok(Self { value, ggam_value })
    }

    /// `(surplus, interaction, dependencies)` of `j` joining coalition `s`.
    ///
    /// The empty coalition contributes its whole surplus to the standalone term.
    fn split(&self, j: usize, s: Mask) -> (T, T, T) {
        let with = self.value[&(s | 1 << j)];
        let surplus = with - self.value[&s];
        if s == 0 {
            return (surplus, T::zero(), T::zero());
        }
        let psi = surplus - self.value[&(1 << j)];
        let int = with - self.ggam_value[&(j, s)];
        (surplus, int, int - psi)
    }
}

/// Shapley effects with their interaction/dependence split.
///
/// Sampled mode walks `n_orderings` random permutations drawn from `config.seed`; exact mode
/// enumerates every coalition with Shapley weights. Results are in raw units.
pub fn sage_dip<T: Scalar>(
    data: &Dataset<T>,
    split: &SplitPlan,
    n_orderings: usize,
    config: &LearnerConfig,
    exact: bool,
) -> Result<SageReport<T>> {
    let d = data.n_features();
    if d == 0 {
        return Err(DipError::EmptyScope);
    }
    if exact && d > MAX_EXACT_FEATURES {
        return Err(DipError::DimensionTooLarge { d, max: MAX_EXACT_FEATURES });
    }
    if !exact && n_orderings == 0 {
        return Err(DipError::InvalidParameter("need at least one ordering".into()));
    }
    if d > MAX_SAMPLED_FEATURES {
        return Err(DipError::DimensionTooLarge { d, max: MAX_SAMPLED_FEATURES });
    }
    config.validate()?;
    let normalizer = Normalizer::from_rows(data, &split.test_idx)?;
    let full: Mask = if d == 64 { Mask::MAX } else { (1 << d) - 1 };
    let names = data.feature_names();

    if exact {
        let masks: BTreeSet<Mask> = (0..=full).collect();
        let pairs: BTreeSet<(usize, Mask)> = (0..d)
            .flat_map(|j| (1..=full).filter(move |s| s & (1 << j) == 0).map(move |s| (j, s)))
            .collect();
        let cache = CoalitionCache::build(data, split, config, masks, pairs)?;
        let entries = (0..d)
            .map(|j| {
                let (mut phi, mut int, mut dep) = (T::zero(), T::zero(), T::zero());
                for s in (0..=full).filter(|s| s & (1 << j) == 0) {
                    let w: T = shapley_weight(s.count_ones() as usize, d)?;
                    let (surplus, i, p) = cache.split(j, s);
                    phi = phi + w * surplus;
                    int = int + w * i;
                    dep = dep + w * p;
                }
                Ok(SageEntry {
                    feature: j,
                    name: names[j].clone(),
                    phi,
                    standalone: cache.value[&(1 << j)],
                    avg_interaction: int,
                    avg_dependencies: dep,
                    n_orderings: 0,
                    std_err: T::zero(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(SageReport {
            entries,
            orderings: Vec::new(),
            surpluses: Vec::new(),
            v_full: cache.value[&full],
            normalizer,
            exact: true,
            normalized: false,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let orderings: Vec<Vec<usize>> = (0..n_orderings)
        .map(|_| {
            let mut p: Vec<usize> = (0..d).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect();
    let mut masks = BTreeSet::new();
    let mut pairs = BTreeSet::new();
    for p in &orderings {
        let mut s: Mask = 0;
        masks.insert(0);
        for &j in p {
            masks.insert(1 << j);
            if s != 0 {
                pairs.insert((j, s));
            }
            s |= 1 << j;
            masks.insert(s);
        }
    }
    let cache = CoalitionCache::build(data, split, config, masks, pairs)?;

    let mut surpluses = vec![vec![T::zero(); d]; n_orderings];
    let mut ints = vec![vec![T::zero(); d]; n_orderings];
    let mut deps = vec![vec![T::zero(); d]; n_orderings];
    for (o, p) in orderings.iter().enumerate() {
        let mut s: Mask = 0;
        for &j in p {
            (surpluses[o][j], ints[o][j], deps[o][j]) = cache.split(j, s);
            s |= 1 << j;
        }
    }
    let entries = (0..d)
        .map(|j| {
            let column = |m: &Vec<Vec<T>>| m.iter().map(|row| row[j]).collect::<Vec<T>>();
            let xs = column(&surpluses);
            let phi = mean_of(xs.iter().copied());
            let std_err = if n_orderings > 1 {
                let ss: T = xs.iter().map(|&x| (x - phi) * (x - phi)).sum();
                (ss / T::of_usize(n_orderings - 1) / T::of_usize(n_orderings)).sqrt()
            } else {
                T::zero()
            };
            SageEntry {
                feature: j,
                name: names[j].clone(),
                phi,
                standalone: cache.value[&(1 << j)],
                avg_interaction: mean_of(column(&ints)),
                avg_dependencies: mean_of(column(&deps)),
                n_orderings,
                std_err,
            }
        })
        .collect();
    Ok(SageReport {
        entries,
        orderings,
        surpluses,
        v_full: cache.value[&full],
        normalizer,
        exact: false,
        normalized: false,
    })
}
