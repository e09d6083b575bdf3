//! Data generating processes with known decompositions, and their oracles.
//!
//! Gaussian draws use `ChaCha8Rng` seeded with the caller's seed and the
//! ziggurat sampler of `rand_distr::StandardNormal`; correlated pairs are built
//! from two independent draws through the Cholesky factor of `[[1, b], [b, 1]]`.

mod oracle;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{DipError, Result};
use crate::scalar::Scalar;

pub use oracle::{
    oracle_digits, oracle_gaussian, oracle_student, oracle_student_exact, DiscreteCell, DiscreteJoint,
    OracleDip, OracleField,
};

/// `Y = X1 + X2 + c X1 X2` with standard normal marginals and correlation `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianInteractionParams {
    pub c: f64,
    pub beta: f64,
}

impl GaussianInteractionParams {
    pub fn new(c: f64, beta: f64) -> Result<Self> {
        if !c.is_finite() || !(0.0..1.0).contains(&beta) {
            return Err(DipError::InvalidParameter(format!("need finite c and beta in [0,1), got c={c}, beta={beta}")));
        }
        Ok(Self { c, beta })
    }

    pub fn as_quadratic(&self) -> QuadraticGaussian {
        QuadraticGaussian { a1: 1.0, a2: 1.0, b1: 0.0, b2: 0.0, k: self.c, beta: self.beta }
    }
}

/// `Y = a1 X1 + a2 X2 + b1 X1^2 + b2 X2^2 + k X1 X2` on a standard bivariate normal with correlation `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticGaussian {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub k: f64,
    pub beta: f64,
}

impl QuadraticGaussian {
    /// The three quadratic DGPs sharing correlation 0.5 and (rounded) value functions 0.7 / 0.3 / 1.
    pub fn trio(which: usize) -> Result<Self> {
        let (a1, a2, b1, b2, k) = match which {
            1 => (-4.3, -0.9, -3.9, 3.0, 0.0),
            2 => (-1.3, -4.7, 3.6, -3.0, 4.7),
            3 => (10.9, 2.4, -5.1, -5.3, 11.3),
            _ => return Err(DipError::InvalidParameter(format!("quadratic DGP {which} does not exist (1, 2 or 3)"))),
        };
        Ok(Self { a1, a2, b1, b2, k, beta: 0.5 })
    }

    pub fn response(&self, x1: f64, x2: f64) -> f64 {
        self.a1 * x1 + self.a2 * x2 + self.b1 * x1 * x1 + self.b2 * x2 * x2 + self.k * x1 * x2
    }

    fn validate(&self) -> Result<()> {
        GaussianInteractionParams::new(0.0, self.beta).map(|_| ())
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(DipError::InvalidParameter(format!("need at least 2 samples, got {n}")));
    }
    Ok(())
}

fn two_feature_dataset<T: Scalar>(x1: Vec<f64>, x2: Vec<f64>, y: Vec<f64>) -> Result<Dataset<T>> {
    let conv = |v: Vec<f64>| v.into_iter().map(T::of).collect::<Vec<T>>();
    Dataset::new(vec!["x1".into(), "x2".into()], vec![conv(x1), conv(x2)], "y", conv(y))
}

/// Standard bivariate normal draws with correlation `beta`.
pub(crate) fn gaussian_pairs(beta: f64, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tail = (1.0 - beta * beta).sqrt();
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    for _ in 0..n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        x1.push(z1);
        x2.push(beta * z1 + tail * z2);
    }
    (x1, x2)
}

pub fn gen_quadratic<T: Scalar>(dgp: &QuadraticGaussian, n: usize, seed: u64) -> Result<Dataset<T>> {
    dgp.validate()?;
    check_n(n)?;
    let (x1, x2) = gaussian_pairs(dgp.beta, n, seed);
    let y = x1.iter().zip(&x2).map(|(&a, &b)| dgp.response(a, b)).collect();
    two_feature_dataset(x1, x2, y)
}

pub fn gen_gaussian<T: Scalar>(params: GaussianInteractionParams, n: usize, seed: u64) -> Result<Dataset<T>> {
    let params = GaussianInteractionParams::new(params.c, params.beta)?;
    gen_quadratic(&params.as_quadratic(), n, seed)
}

pub fn gen_quadratic_trio<T: Scalar>(which: usize, n: usize, seed: u64) -> Result<Dataset<T>> {
    gen_quadratic(&QuadraticGaussian::trio(which)?, n, seed)
}

/// Two Ber(0.5) features with a prescribed probability of agreeing, and a points rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudentVariant {
    /// `Y = 4 X1 + 4 X2`, P(X1 = X2) = 0.75
    Redundancy,
    /// `Y = 4 X1 + 2 X2`, P(X1 = X2) = 0.25
    Enhancement,
    /// `Y = 8 (X1 or X2) - 1`, P(X1 = X2) = 0.75
    Interaction,
}

impl StudentVariant {
    pub const ALL: [StudentVariant; 3] = [Self::Redundancy, Self::Enhancement, Self::Interaction];

    /// P(X1 = X2) as a fraction (numerator, denominator).
    pub fn p_equal(self) -> (i64, i64) {
        match self {
            Self::Redundancy | Self::Interaction => (3, 4),
            Self::Enhancement => (1, 4),
        }
    }

    pub fn points(self, x1: i64, x2: i64) -> i64 {
        match self {
            Self::Redundancy => 4 * x1 + 4 * x2,
            Self::Enhancement => 4 * x1 + 2 * x2,
            Self::Interaction => 8 * i64::from(x1 == 1 || x2 == 1) - 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Redundancy => "redundancy",
            Self::Enhancement => "enhancement",
            Self::Interaction => "interaction",
        }
    }
}

impl fmt::Display for StudentVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StudentVariant {
    type Err = DipError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| DipError::InvalidParameter(format!("unknown student variant `{s}`")))
    }
}

pub fn gen_student<T: Scalar>(variant: StudentVariant, n: usize, seed: u64) -> Result<Dataset<T>> {
    check_n(n)?;
    let (num, den) = variant.p_equal();
    let p_equal = num as f64 / den as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x1, mut x2, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let a = i64::from(rng.gen_bool(0.5));
        let b = if rng.gen_bool(p_equal) { a } else { 1 - a };
        x1.push(a as f64);
        x2.push(b as f64);
        y.push(variant.points(a, b) as f64);
    }
    two_feature_dataset(x1, x2, y)
}

/// `X1 = 10 Z0 + Z1`, `X2 = 10 Z0 + Z2`, `Y = Z1 + Z2` with `Z` i.i.d. uniform on 0..=9.
pub fn gen_digits<T: Scalar>(n: usize, seed: u64) -> Result<Dataset<T>> {
    check_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x1, mut x2, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let z0 = rng.gen_range(0..10);
        let z1 = rng.gen_range(0..10);
        let z2 = rng.gen_range(0..10);
        x1.push(f64::from(10 * z0 + z1));
        x2.push(f64::from(10 * z0 + z2));
        y.push(f64::from(z1 + z2));
    }
    two_feature_dataset(x1, x2, y)
}
