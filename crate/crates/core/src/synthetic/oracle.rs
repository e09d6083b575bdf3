//! Population values of the decomposition for the synthetic processes.

use std::collections::BTreeMap;
use std::fmt::Debug;

use num_rational::Rational64;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use super::{gaussian_pairs, GaussianInteractionParams, QuadraticGaussian, StudentVariant};
use crate::error::{DipError, Result};
use crate::scalar::{covariance, variance, Scalar};

/// Field used by the exact enumeration oracle.
pub trait OracleField: Clone + Debug + Num + Signed + PartialOrd + FromPrimitive + ToPrimitive {
    /// Whether a pivot candidate counts as zero.
    fn negligible(&self) -> bool;
}

impl OracleField for f64 {
    fn negligible(&self) -> bool {
        self.abs() < 1e-12
    }
}

impl OracleField for Rational64 {
    fn negligible(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
}

/// Population decomposition for a two-group process, in raw units of Var(Y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDip<F> {
    pub v_j: F,
    pub v_jbar: F,
    pub v_joint: F,
    pub int: F,
    pub cp: F,
    pub co: F,
    pub dep: F,
    pub psi: F,
    pub var_y: F,
}

impl<F: Clone + Num> OracleDip<F> {
    /// Every value divided by Var(Y); `var_y` becomes one.
    pub fn normalized(&self) -> Self {
        let s = |x: &F| x.clone() / self.var_y.clone();
        Self {
            v_j: s(&self.v_j),
            v_jbar: s(&self.v_jbar),
            v_joint: s(&self.v_joint),
            int: s(&self.int),
            cp: s(&self.cp),
            co: s(&self.co),
            dep: s(&self.dep),
            psi: s(&self.psi),
            var_y: F::one(),
        }
    }

    /// Residuals of `psi = int - dep`, `dep = cp + co` and the reconstruction of `v_joint`.
    pub fn identity_residuals(&self) -> [F; 3] {
        let c = |x: &F| x.clone();
        [
            c(&self.psi) - (c(&self.int) - c(&self.dep)),
            c(&self.dep) - (c(&self.cp) + c(&self.co)),
            c(&self.v_joint) - (c(&self.v_j) + c(&self.v_jbar) + c(&self.int) - c(&self.dep)),
        ]
    }

    pub fn map<G>(&self, f: impl Fn(&F) -> G) -> OracleDip<G> {
        OracleDip {
            v_j: f(&self.v_j),
            v_jbar: f(&self.v_jbar),
            v_joint: f(&self.v_joint),
            int: f(&self.int),
            cp: f(&self.cp),
            co: f(&self.co),
            dep: f(&self.dep),
            psi: f(&self.psi),
            var_y: f(&self.var_y),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCell<F> {
    pub x1: i64,
    pub x2: i64,
    pub prob: F,
    pub y: F,
}

/// Finite joint distribution of `(X1, X2, Y)` with `Y` a function of the features.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint<F> {
    pub cells: Vec<DiscreteCell<F>>,
}

fn expect<F: OracleField>(cells: &[DiscreteCell<F>], f: impl Fn(&DiscreteCell<F>) -> F) -> F {
    cells.iter().fold(F::zero(), |acc, c| acc + c.prob.clone() * f(c))
}

fn level_index(values: impl Iterator<Item = i64>) -> BTreeMap<i64, usize> {
    let mut levels: Vec<i64> = values.collect();
    levels.sort_unstable();
    levels.dedup();
    levels.into_iter().enumerate().map(|(i, l)| (l, i)).collect()
}

/// Variance of `E[f | key]`, where `key` indexes `n_levels` levels.
fn var_of_cond_mean<F: OracleField>(
    cells: &[DiscreteCell<F>],
    n_levels: usize,
    key: impl Fn(&DiscreteCell<F>) -> usize,
    f: impl Fn(&DiscreteCell<F>) -> F,
) -> F {
    let mut mass = vec![F::zero(); n_levels];
    let mut total = vec![F::zero(); n_levels];
    for c in cells {
        let k = key(c);
        mass[k] = mass[k].clone() + c.prob.clone();
        total[k] = total[k].clone() + c.prob.clone() * f(c);
    }
    let overall = total.iter().fold(F::zero(), |a, t| a + t.clone());
    mass.into_iter()
        .zip(total)
        .filter(|(m, _)| !num_traits::Zero::is_zero(m))
        .fold(F::zero(), |acc, (m, t)| {
            let d = t / m.clone() - overall.clone();
            acc + m * d.clone() * d
        })
}

/// Solves the symmetric system `a x = b`, setting free variables to zero when `a` is singular.
fn solve_consistent<F: OracleField>(mut a: Vec<Vec<F>>, mut b: Vec<F>) -> Vec<F> {
    let n = b.len();
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut row = 0;
    for col in 0..n {
        if row == n {
            break;
        }
        let best = (row..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("ordered field"));
        let Some(p) = best.filter(|&p| !a[p][col].negligible()) else { continue };
        a.swap(row, p);
        b.swap(row, p);
        let piv = a[row][col].clone();
        for k in col..n {
            a[row][k] = a[row][k].clone() / piv.clone();
        }
        b[row] = b[row].clone() / piv;
        for i in 0..n {
            if i == row || num_traits::Zero::is_zero(&a[i][col]) {
                continue;
            }
            let f = a[i][col].clone();
            for k in col..n {
                a[i][k] = a[i][k].clone() - f.clone() * a[row][k].clone();
            }
            b[i] = b[i].clone() - f * b[row].clone();
        }
        pivots.push((row, col));
        row += 1;
    }
    let mut x = vec![F::zero(); n];
    for (r, c) in pivots {
        x[c] = b[r].clone();
    }
    x
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

impl<F: OracleField> DiscreteJoint<F> {
    /// Exact decomposition by enumeration.
    ///
    /// The additive projection is unique up to constants shifted between the two components
    /// on each connected block of the support; those constants are chosen so both components
    /// have equal means on every block, the minimum-variance representative.
    pub fn oracle(&self) -> Result<OracleDip<F>> {
        let cells = &self.cells;
        if cells.is_empty() {
            return Err(DipError::EmptyData("no cells"));
        }
        let total = expect(cells, |_| F::one());
        if total != F::one() && !(total.clone() - F::one()).negligible() {
            return Err(DipError::InvalidParameter(format!("cell probabilities sum to {total:?}")));
        }
        let lv1 = level_index(cells.iter().map(|c| c.x1));
        let lv2 = level_index(cells.iter().map(|c| c.x2));
        let (n1, n2) = (lv1.len(), lv2.len());
        let k1 = |c: &DiscreteCell<F>| lv1[&c.x1];
        let k2 = |c: &DiscreteCell<F>| lv2[&c.x2];

        let ey = expect(cells, |c| c.y.clone());
        let var_y = expect(cells, |c| (c.y.clone() - ey.clone()) * (c.y.clone() - ey.clone()));
        let v1 = var_of_cond_mean(cells, n1, k1, |c| c.y.clone());
        let v2 = var_of_cond_mean(cells, n2, k2, |c| c.y.clone());

        // basis: intercept, x1 level indicators (level 0 is reference), x2 level indicators
        let dim = n1 + n2 - 1;
        let active = |c: &DiscreteCell<F>| {
            let mut idx = vec![0];
            if k1(c) > 0 {
                idx.push(k1(c));
            }
            if k2(c) > 0 {
                idx.push(n1 - 1 + k2(c));
            }
            idx
        };
        let mut gram = vec![vec![F::zero(); dim]; dim];
        let mut rhs = vec![F::zero(); dim];
        for c in cells {
            let idx = active(c);
            for &a in &idx {
                rhs[a] = rhs[a].clone() + c.prob.clone() * c.y.clone();
                for &b in &idx {
                    gram[a][b] = gram[a][b].clone() + c.prob.clone();
                }
            }
        }
        let theta = solve_consistent(gram, rhs);
        let mut g1: Vec<F> = (0..n1).map(|l| if l == 0 { F::zero() } else { theta[l].clone() }).collect();
        let mut g2: Vec<F> = (0..n2).map(|m| if m == 0 { F::zero() } else { theta[n1 - 1 + m].clone() }).collect();

        let mut parent: Vec<usize> = (0..n1 + n2).collect();
        for c in cells.iter().filter(|c| !num_traits::Zero::is_zero(&c.prob)) {
            let (a, b) = (find(&mut parent, k1(c)), find(&mut parent, n1 + k2(c)));
            parent[a] = b;
        }
        let roots: Vec<usize> = (0..n1 + n2).map(|i| find(&mut parent, i)).collect();
        let mut blocks: BTreeMap<usize, (F, F, F)> = BTreeMap::new();
        for c in cells {
            let e = blocks.entry(roots[k1(c)]).or_insert((F::zero(), F::zero(), F::zero()));
            e.0 = e.0.clone() + c.prob.clone();
            e.1 = e.1.clone() + c.prob.clone() * g1[k1(c)].clone();
            e.2 = e.2.clone() + c.prob.clone() * g2[k2(c)].clone();
        }
        let two = F::one() + F::one();
        for (root, (mass, s1, s2)) in blocks {
            if num_traits::Zero::is_zero(&mass) {
                continue;
            }
            let shift = (s2 - s1) / (two.clone() * mass);
            for (l, g) in g1.iter_mut().enumerate() {
                if roots[l] == root {
                    *g = g.clone() + shift.clone();
                }
            }
            for (m, g) in g2.iter_mut().enumerate() {
                if roots[n1 + m] == root {
                    *g = g.clone() - shift.clone();
                }
            }
        }
        let m1 = expect(cells, |c| g1[k1(c)].clone());
        let m2 = expect(cells, |c| g2[k2(c)].clone());
        let c1 = |c: &DiscreteCell<F>| g1[k1(c)].clone() - m1.clone();
        let c2 = |c: &DiscreteCell<F>| g2[k2(c)].clone() - m2.clone();

        let h = |c: &DiscreteCell<F>| c.y.clone() - ey.clone() - c1(c) - c2(c);
        let eh = expect(cells, &h);
        let int = expect(cells, |c| (h(c) - eh.clone()) * (h(c) - eh.clone()));
        let co = two * expect(cells, |c| c1(c) * c2(c));
        let cp = var_of_cond_mean(cells, n2, k2, c1) + var_of_cond_mean(cells, n1, k1, c2);
        let psi = var_y.clone() - v1.clone() - v2.clone();
        let dep = cp.clone() + co.clone();
        Ok(OracleDip { v_j: v1, v_jbar: v2, v_joint: var_y.clone(), int, cp, co, dep, psi, var_y })
    }
}

pub fn oracle_student_exact(variant: StudentVariant) -> OracleDip<Rational64> {
    let (num, den) = variant.p_equal();
    let same = Rational64::new(num, 2 * den);
    let differ = Rational64::new(den - num, 2 * den);
    let cells = [(0, 0), (0, 1), (1, 0), (1, 1)]
        .into_iter()
        .map(|(a, b)| DiscreteCell {
            x1: a,
            x2: b,
            prob: if a == b { same } else { differ },
            y: Rational64::from_integer(variant.points(a, b)),
        })
        .collect();
    DiscreteJoint { cells }.oracle().expect("student supports are connected and non-empty")
}

pub fn oracle_student<T: Scalar>(variant: StudentVariant) -> OracleDip<T> {
    oracle_student_exact(variant).map(|r| T::of(r.to_f64().expect("small rationals convert")))
}

pub fn oracle_digits() -> OracleDip<f64> {
    let mut cells = Vec::with_capacity(1000);
    for z0 in 0..10 {
        for z1 in 0..10 {
            for z2 in 0..10 {
                cells.push(DiscreteCell { x1: 10 * z0 + z1, x2: 10 * z0 + z2, prob: 1e-3, y: (z1 + z2) as f64 });
            }
        }
    }
    DiscreteJoint { cells }.oracle().expect("digit cells are valid")
}

/// Population decomposition of `X1 + X2 + c X1 X2` from its closed-form moments.
pub fn oracle_gaussian<T: Scalar>(params: GaussianInteractionParams) -> OracleDip<T> {
    let c = T::of(params.c);
    let b = T::of(params.beta);
    let one = T::one();
    let two = T::of(2.0);
    let four = T::of(4.0);
    let c2 = c * c;
    let b2 = b * b;
    let v_joint = two + two * b + c2 * (one + b2);
    let v = (one + b) * (one + b) + two * c2 * b2;
    let int = c2 * (one + b2) - four * c2 * b2 / (one + b2);
    let cp = two * b2 + four * c2 * b2 * b2 * b2 / ((one + b2) * (one + b2));
    let co = two * (b + two * c2 * b2 * b2 / ((one + b2) * (one + b2)));
    let psi = v_joint - two * v;
    OracleDip { v_j: v, v_jbar: v, v_joint, int, cp, co, dep: cp + co, psi, var_y: v_joint }
}

/// Second moments of `(X1, X2, X1^2, X2^2, X1 X2)` under a standard bivariate normal.
fn quadratic_moments(beta: f64) -> [[f64; 5]; 5] {
    let b = beta;
    [
        [1.0, b, 0.0, 0.0, 0.0],
        [b, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 2.0, 2.0 * b * b, 2.0 * b],
        [0.0, 0.0, 2.0 * b * b, 2.0, 2.0 * b],
        [0.0, 0.0, 2.0 * b, 2.0 * b, 1.0 + b * b],
    ]
}

fn quad_form(m: &[[f64; 5]; 5], u: &[f64; 5], w: &[f64; 5]) -> f64 {
    (0..5).map(|i| (0..5).map(|j| u[i] * m[i][j] * w[j]).sum::<f64>()).sum()
}

impl QuadraticGaussian {
    fn weights(&self) -> [f64; 5] {
        [self.a1, self.a2, self.b1, self.b2, self.k]
    }

    /// Weights of `E[Y | X1]` and `E[Y | X2]` (up to constants).
    fn conditional_weights(&self) -> ([f64; 5], [f64; 5]) {
        let b = self.beta;
        (
            [self.a1 + b * self.a2, 0.0, self.b1 + b * b * self.b2 + self.k * b, 0.0, 0.0],
            [0.0, self.a2 + b * self.a1, 0.0, self.b2 + b * b * self.b1 + self.k * b, 0.0],
        )
    }

    /// Additive projection weights `(g1, g2)` obtained by least squares on the four main-effect terms.
    fn additive_weights(&self) -> ([f64; 5], [f64; 5]) {
        let m = quadratic_moments(self.beta);
        let w = self.weights();
        let basis = [0usize, 1, 2, 3];
        let a: Vec<Vec<f64>> = basis.iter().map(|&i| basis.iter().map(|&j| m[i][j]).collect()).collect();
        let rhs: Vec<f64> = basis.iter().map(|&i| (0..5).map(|j| m[i][j] * w[j]).sum()).collect();
        let t = solve_consistent(a, rhs);
        ([t[0], 0.0, t[2], 0.0, 0.0], [0.0, t[1], 0.0, t[3], 0.0])
    }

    /// Exact population decomposition from Gaussian fourth moments.
    pub fn oracle(&self) -> OracleDip<f64> {
        let m = quadratic_moments(self.beta);
        let w = self.weights();
        let (e1, e2) = self.conditional_weights();
        let (g1, g2) = self.additive_weights();
        let h: [f64; 5] = std::array::from_fn(|i| w[i] - g1[i] - g2[i]);
        let b = self.beta;
        // E[g1 | X2] and E[g2 | X1], up to constants
        let g1_on_2 = [0.0, g1[0] * b, 0.0, g1[2] * b * b, 0.0];
        let g2_on_1 = [g2[1] * b, 0.0, g2[3] * b * b, 0.0, 0.0];
        let v_joint = quad_form(&m, &w, &w);
        let v_j = quad_form(&m, &e1, &e1);
        let v_jbar = quad_form(&m, &e2, &e2);
        let int = quad_form(&m, &h, &h);
        let co = 2.0 * quad_form(&m, &g1, &g2);
        let cp = quad_form(&m, &g1_on_2, &g1_on_2) + quad_form(&m, &g2_on_1, &g2_on_1);
        OracleDip {
            v_j,
            v_jbar,
            v_joint,
            int,
            cp,
            co,
            dep: cp + co,
            psi: v_joint - v_j - v_jbar,
            var_y: v_joint,
        }
    }

    /// Sample-moment version of [`Self::oracle`]: conditional expectations use their exact
    /// Gaussian forms, all variances and covariances are empirical over `n` draws.
    pub fn monte_carlo_oracle(&self, n: usize, seed: u64) -> OracleDip<f64> {
        let (x1, x2) = gaussian_pairs(self.beta, n, seed);
        let (e1, e2) = self.conditional_weights();
        let (g1, g2) = self.additive_weights();
        let b = self.beta;
        let eval = |w: &[f64; 5], a: f64, c: f64| w[0] * a + w[1] * c + w[2] * a * a + w[3] * c * c + w[4] * a * c;
        let col = |f: &dyn Fn(f64, f64) -> f64| x1.iter().zip(&x2).map(|(&a, &c)| f(a, c)).collect::<Vec<f64>>();
        let y = col(&|a, c| self.response(a, c));
        let c1 = col(&|a, c| eval(&e1, a, c));
        let c2 = col(&|a, c| eval(&e2, a, c));
        let f1 = col(&|a, c| eval(&g1, a, c));
        let f2 = col(&|a, c| eval(&g2, a, c));
        let f1_on_2 = col(&|_, c| g1[0] * b * c + g1[2] * b * b * c * c);
        let f2_on_1 = col(&|a, _| g2[1] * b * a + g2[3] * b * b * a * a);
        let h: Vec<f64> = (0..n).map(|i| y[i] - f1[i] - f2[i]).collect();
        let v_joint = variance(&y);
        let (v_j, v_jbar) = (variance(&c1), variance(&c2));
        let int = variance(&h);
        let co = 2.0 * covariance(&f1, &f2);
        let cp = variance(&f1_on_2) + variance(&f2_on_1);
        OracleDip {
            v_j,
            v_jbar,
            v_joint,
            int,
            cp,
            co,
            dep: cp + co,
            psi: v_joint - v_j - v_jbar,
            var_y: v_joint,
        }
    }
}
