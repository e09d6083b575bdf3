//! Squared-loss learners: the constant baseline, boosted trees over a feature
//! scope, and groupwise additive models fitted by cyclic boosting.

mod tree;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroupSpec};
use crate::error::{DipError, Result};
use crate::scalar::{mean, Scalar};

pub use tree::{Node, Tree};
use tree::{grow_tree, BinnedFeature, TreeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub n_bins: usize,
    /// Seeds the ordering sampler of sampled SAGE. Tree fitting itself draws no random numbers.
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self { rounds: 500, learning_rate: 0.1, max_depth: 4, min_leaf: 20, n_bins: 256, seed: 0 }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DipError::InvalidConfig(msg));
        if self.rounds < 1 {
            return bad("rounds must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning rate {} not in (0,1]", self.learning_rate));
        }
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1".into());
        }
        if self.min_leaf < 1 {
            return bad("min_leaf must be at least 1".into());
        }
        if self.n_bins < 2 || self.n_bins > u16::MAX as usize {
            return bad(format!("n_bins {} not in [2, {}]", self.n_bins, u16::MAX));
        }
        Ok(())
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams { max_depth: self.max_depth, min_leaf: self.min_leaf }
    }
}

/// Sum of trees over a fixed feature scope, plus an additive offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble<T> {
    pub offset: T,
    pub scope: Vec<usize>,
    pub scope_names: Vec<String>,
    pub trees: Vec<Tree<T>>,
}

impl<T: Scalar> TreeEnsemble<T> {
    fn empty(data: &Dataset<T>, scope: Vec<usize>) -> Self {
        let scope_names = scope.iter().map(|&f| data.feature_names()[f].clone()).collect();
        Self { offset: T::zero(), scope, scope_names, trees: Vec::new() }
    }

    fn check_columns(&self, data: &Dataset<T>) -> Result<()> {
        for (&f, name) in self.scope.iter().zip(&self.scope_names) {
            if data.feature_names().get(f) != Some(name) {
                return Err(DipError::MissingFeature(name.clone()));
            }
        }
        Ok(())
    }

    fn add_into(&self, data: &Dataset<T>, rows: &[usize], out: &mut [T]) {
        for o in out.iter_mut() {
            *o = *o + self.offset;
        }
        for tree in &self.trees {
            for (o, &r) in out.iter_mut().zip(rows) {
                *o = *o + tree.eval(|f| data.column(f)[r]);
            }
        }
    }

    pub fn predict_rows(&self, data: &Dataset<T>, rows: &[usize]) -> Result<Vec<T>> {
        self.check_columns(data)?;
        let mut out = vec![T::zero(); rows.len()];
        self.add_into(data, rows, &mut out);
        Ok(out)
    }

    /// Every feature index any tree splits on.
    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.trees.iter().flat_map(|t| t.split_features())
    }
}

/// `intercept + component_j(x_J) + component_jbar(x_Jbar)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupwiseModel<T> {
    pub intercept: T,
    pub component_j: TreeEnsemble<T>,
    pub component_jbar: TreeEnsemble<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Constant,
    TreeEnsemble,
    GroupwiseAdditive,
}

impl ModelKind {
    fn name(self) -> &'static str {
        match self {
            ModelKind::Constant => "constant",
            ModelKind::TreeEnsemble => "tree_ensemble",
            ModelKind::GroupwiseAdditive => "groupwise_additive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model<T> {
    Constant { value: T },
    TreeEnsemble(TreeEnsemble<T>),
    GroupwiseAdditive(GroupwiseModel<T>),
}

/// Which component of a groupwise model to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    J,
    JBar,
}

impl<T: Scalar> Model<T> {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Constant { .. } => ModelKind::Constant,
            Model::TreeEnsemble(_) => ModelKind::TreeEnsemble,
            Model::GroupwiseAdditive(_) => ModelKind::GroupwiseAdditive,
        }
    }

    pub fn intercept(&self) -> T {
        match self {
            Model::Constant { value } => *value,
            Model::TreeEnsemble(e) => e.offset,
            Model::GroupwiseAdditive(g) => g.intercept,
        }
    }

    pub fn feature_scope(&self) -> Vec<usize> {
        match self {
            Model::Constant { .. } => Vec::new(),
            Model::TreeEnsemble(e) => e.scope.clone(),
            Model::GroupwiseAdditive(g) => {
                let mut s: Vec<usize> =
                    g.component_j.scope.iter().chain(&g.component_jbar.scope).copied().collect();
                s.sort_unstable();
                s
            }
        }
    }

    pub fn predict(&self, data: &Dataset<T>) -> Result<Vec<T>> {
        let rows: Vec<usize> = (0..data.n_rows()).collect();
        self.predict_rows(data, &rows)
    }

    pub fn predict_rows(&self, data: &Dataset<T>, rows: &[usize]) -> Result<Vec<T>> {
        match self {
            Model::Constant { value } => Ok(vec![*value; rows.len()]),
            Model::TreeEnsemble(e) => e.predict_rows(data, rows),
            Model::GroupwiseAdditive(g) => {
                let a = g.component_j.predict_rows(data, rows)?;
                let b = g.component_jbar.predict_rows(data, rows)?;
                // summing the components first keeps predictions invariant to swapping them
                Ok(a.iter().zip(&b).map(|(&x, &y)| g.intercept + (x + y)).collect())
            }
        }
    }

    pub fn as_groupwise(&self) -> Result<&GroupwiseModel<T>> {
        match self {
            Model::GroupwiseAdditive(g) => Ok(g),
            other => Err(DipError::WrongModelKind {
                expected: ModelKind::GroupwiseAdditive.name(),
                actual: other.kind().name(),
            }),
        }
    }

    /// Debug dump of the fitted structure; the layout is not a stable format.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics<T> {
    pub train_mse_per_round: Vec<T>,
    pub final_train_mse: T,
}

pub fn fit_constant<T: Scalar>(train: &Dataset<T>) -> Result<Model<T>> {
    if train.n_rows() == 0 {
        return Err(DipError::EmptyData("cannot fit a constant to zero rows"));
    }
    Ok(Model::Constant { value: mean(train.target()) })
}

fn mean_square<T: Scalar>(xs: &[T]) -> T {
    xs.iter().map(|&x| x * x).sum::<T>() / T::of_usize(xs.len())
}

fn normalized_scope<T: Scalar>(train: &Dataset<T>, scope: &[usize]) -> Result<Vec<usize>> {
    if scope.is_empty() {
        return Err(DipError::EmptyScope);
    }
    let mut scope = scope.to_vec();
    scope.sort_unstable();
    scope.dedup();
    for &f in &scope {
        train.check_index(f)?;
    }
    Ok(scope)
}

fn check_fit_inputs<T: Scalar>(train: &Dataset<T>, config: &LearnerConfig) -> Result<()> {
    config.validate()?;
    if train.n_rows() <= config.min_leaf {
        return Err(DipError::InvalidConfig(format!(
            "{} training rows do not exceed min_leaf {}",
            train.n_rows(),
            config.min_leaf
        )));
    }
    Ok(())
}

fn bin_scope<T: Scalar>(train: &Dataset<T>, scope: &[usize], n_bins: usize) -> Vec<BinnedFeature<T>> {
    scope.iter().map(|&f| BinnedFeature::new(f, train.column(f), n_bins)).collect()
}

/// Gradient boosting on squared loss restricted to the `scope` features.
///
/// Starts from the target mean; each round fits one depth-limited histogram tree to the
/// current residual and adds it with shrinkage `learning_rate`. Stops early once the
/// residual admits no split. If no tree is ever added the constant model is returned.
pub fn fit_boosted<T: Scalar>(
    train: &Dataset<T>,
    scope: &[usize],
    config: &LearnerConfig,
) -> Result<(Model<T>, FitDiagnostics<T>)> {
    let scope = normalized_scope(train, scope)?;
    check_fit_inputs(train, config)?;
    let features = bin_scope(train, &scope, config.n_bins);
    let base = mean(train.target());
    let mut residual: Vec<T> = train.target().iter().map(|&y| y - base).collect();
    let shrink = T::of(config.learning_rate);
    let mut ensemble = TreeEnsemble::empty(train, scope);
    ensemble.offset = base;
    let mut history = Vec::with_capacity(config.rounds);
    let mut mse = mean_square(&residual);
    for _ in 0..config.rounds {
        match grow_tree(&features, &residual, config.tree_params(), shrink) {
            Some((tree, inc)) => {
                for (r, d) in residual.iter_mut().zip(&inc) {
                    *r = *r - *d;
                }
                ensemble.trees.push(tree);
                mse = mean_square(&residual);
            }
            // the residual did not change, so no later round can split either
            None => break,
        }
        history.push(mse);
    }
    history.resize(config.rounds, mse);
    let diagnostics = FitDiagnostics { train_mse_per_round: history, final_train_mse: mse };
    if ensemble.trees.is_empty() {
        return Ok((Model::Constant { value: base }, diagnostics));
    }
    Ok((Model::TreeEnsemble(ensemble), diagnostics))
}

/// Groupwise additive model for the two groups of `group`.
pub fn fit_ggam<T: Scalar>(
    train: &Dataset<T>,
    group: &GroupSpec,
    config: &LearnerConfig,
) -> Result<(Model<T>, FitDiagnostics<T>)> {
    fit_groupwise(train, &group.group_j, &group.group_jbar, config)
}

/// Cyclic boosting of a two-component additive model. Rounds alternate strictly between
/// a tree on `group_a` and a tree on `group_b`, each fitted to the shared residual, so the
/// additive structure holds by construction. The group holding the lowest feature index is
/// boosted first whatever the argument order, so swapping the groups only swaps the
/// components. The groups need not cover every column.
pub fn fit_groupwise<T: Scalar>(
    train: &Dataset<T>,
    group_a: &[usize],
    group_b: &[usize],
    config: &LearnerConfig,
) -> Result<(Model<T>, FitDiagnostics<T>)> {
    let a = normalized_scope(train, group_a)?;
    let b = normalized_scope(train, group_b)?;
    if a.iter().any(|f| b.contains(f)) {
        return Err(DipError::InvalidGroup("groups overlap".into()));
    }
    check_fit_inputs(train, config)?;
    let flipped = b[0] < a[0];
    let (a, b) = if flipped { (b, a) } else { (a, b) };
    let features = [bin_scope(train, &a, config.n_bins), bin_scope(train, &b, config.n_bins)];
    let mut components = [TreeEnsemble::empty(train, a), TreeEnsemble::empty(train, b)];
    let base = mean(train.target());
    let mut residual: Vec<T> = train.target().iter().map(|&y| y - base).collect();
    let shrink = T::of(config.learning_rate);
    let mut history = Vec::with_capacity(config.rounds);
    let mut mse = mean_square(&residual);
    let mut stalled = [false, false];
    for round in 0..config.rounds {
        let side = round % 2;
        if stalled[0] && stalled[1] {
            break;
        }
        match grow_tree(&features[side], &residual, config.tree_params(), shrink) {
            Some((tree, inc)) => {
                for (r, d) in residual.iter_mut().zip(&inc) {
                    *r = *r - *d;
                }
                components[side].trees.push(tree);
                mse = mean_square(&residual);
                stalled = [false, false];
            }
            None => stalled[side] = true,
        }
        history.push(mse);
    }
    history.resize(config.rounds, mse);
    if flipped {
        components.swap(0, 1);
    }
    let [component_j, component_jbar] = components;
    let model = Model::GroupwiseAdditive(GroupwiseModel { intercept: base, component_j, component_jbar });
    let model = center_components(&model, train)?;
    Ok((model, FitDiagnostics { train_mse_per_round: history, final_train_mse: mse }))
}

/// Move each component's mean over `train` into the intercept.
pub fn center_components<T: Scalar>(model: &Model<T>, train: &Dataset<T>) -> Result<Model<T>> {
    let g = model.as_groupwise()?;
    let rows: Vec<usize> = (0..train.n_rows()).collect();
    let mean_j = mean(&g.component_j.predict_rows(train, &rows)?);
    let mean_jbar = mean(&g.component_jbar.predict_rows(train, &rows)?);
    let mut out = g.clone();
    out.component_j.offset = out.component_j.offset - mean_j;
    out.component_jbar.offset = out.component_jbar.offset - mean_jbar;
    out.intercept = out.intercept + (mean_j + mean_jbar);
    Ok(Model::GroupwiseAdditive(out))
}

/// Evaluate one (centered) component of a groupwise model.
pub fn component_values<T: Scalar>(
    model: &Model<T>,
    rows: &Dataset<T>,
    which: Component,
) -> Result<Vec<T>> {
    let idx: Vec<usize> = (0..rows.n_rows()).collect();
    component_values_rows(model, rows, &idx, which)
}

pub fn component_values_rows<T: Scalar>(
    model: &Model<T>,
    data: &Dataset<T>,
    rows: &[usize],
    which: Component,
) -> Result<Vec<T>> {
    let g = model.as_groupwise()?;
    match which {
        Component::J => g.component_j.predict_rows(data, rows),
        Component::JBar => g.component_jbar.predict_rows(data, rows),
    }
}
