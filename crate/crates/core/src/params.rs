//! Model parameters, population labels and moment snapshots.
//!
//! Noise intensities are stored as variances (`sigma2`), the quantity every
//! formula of the model consumes. A parameter table quoting "sigma = 0.01"
//! is read here as `sigma2 = 0.01`; pass `sigma.powi(2)` if your source
//! really means a standard deviation.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// The four interacting cell populations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Population {
    /// Normal muscle cells.
    N,
    /// Damaged muscle cells.
    D,
    /// Macrophages.
    M,
    /// Cytotoxic T lymphocytes.
    C,
}

impl Population {
    pub const ALL: [Population; 4] = [Population::N, Population::D, Population::M, Population::C];

    pub const fn index(self) -> usize {
        match self {
            Population::N => 0,
            Population::D => 1,
            Population::M => 2,
            Population::C => 3,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Population::N => "N",
            Population::D => "D",
            Population::M => "M",
            Population::C => "C",
        }
    }
}

impl fmt::Display for Population {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A value for each population, indexed by [`Population`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerPopulation<T>(pub [T; 4]);

impl<T> PerPopulation<T> {
    pub fn from_fn(mut f: impl FnMut(Population) -> T) -> Self {
        PerPopulation([
            f(Population::N),
            f(Population::D),
            f(Population::M),
            f(Population::C),
        ])
    }

    pub fn map<U>(&self, mut f: impl FnMut(Population, &T) -> U) -> PerPopulation<U> {
        PerPopulation::from_fn(|p| f(p, &self[p]))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Population, &T)> {
        Population::ALL.into_iter().zip(self.0.iter())
    }
}

impl<T: Clone> PerPopulation<T> {
    pub fn splat(value: T) -> Self {
        PerPopulation([value.clone(), value.clone(), value.clone(), value])
    }
}

impl<T> Index<Population> for PerPopulation<T> {
    type Output = T;
    fn index(&self, p: Population) -> &T {
        &self.0[p.index()]
    }
}

impl<T> IndexMut<Population> for PerPopulation<T> {
    fn index_mut(&mut self, p: Population) -> &mut T {
        &mut self.0[p.index()]
    }
}

/// All model constants.
///
/// `nu_control = 0` is the untreated model. `epsilon` records the cumulative
/// quasi-invariant scaling applied through [`ParameterSet::scaled`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterSet {
    pub beta: PerPopulation<f64>,
    pub sigma2: PerPopulation<f64>,
    pub gamma_m: f64,
    pub gamma_c: f64,
    pub nu_control: f64,
    pub epsilon: f64,
}

impl Default for ParameterSet {
    fn default() -> Self {
        Self::table1()
    }
}

impl ParameterSet {
    /// Reference values: beta = (0.2, 0.1, 0.2, 0.1), sigma^2 = 0.01,
    /// gamma_M = gamma_C = 0.05, no therapy, no scaling.
    pub fn table1() -> Self {
        ParameterSet {
            beta: PerPopulation([0.2, 0.1, 0.2, 0.1]),
            sigma2: PerPopulation::splat(0.01),
            gamma_m: 0.05,
            gamma_c: 0.05,
            nu_control: 0.0,
            epsilon: 1.0,
        }
    }

    pub fn with_control(mut self, nu: f64) -> Self {
        self.nu_control = nu;
        self
    }

    /// Effective linear loss rate of a population: `beta_C + nu` for C.
    pub fn decay_rate(&self, pop: Population) -> f64 {
        match pop {
            Population::C => self.beta[pop] + self.nu_control,
            _ => self.beta[pop],
        }
    }

    /// Whether `sigma_J^2 < 2 beta_J` holds for every population, the
    /// condition under which stationary variances are finite.
    pub fn has_finite_variances(&self) -> bool {
        Population::ALL
            .iter()
            .all(|&p| self.sigma2[p] < 2.0 * self.beta[p])
    }

    pub fn require_finite_variances(&self) -> Result<()> {
        match Population::ALL
            .iter()
            .find(|&&p| self.sigma2[p] >= 2.0 * self.beta[p])
        {
            Some(&p) => Err(Error::InfiniteVariance(p)),
            None => Ok(()),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for p in Population::ALL {
            if !(self.beta[p] > 0.0) {
                violations.push(Violation::NonPositiveBeta(p, self.beta[p]));
            }
            if !(self.sigma2[p] >= 0.0) {
                violations.push(Violation::NegativeSigma2(p, self.sigma2[p]));
            }
        }
        if !(self.gamma_m > 0.0) {
            violations.push(Violation::NonPositiveGamma(Population::M, self.gamma_m));
        }
        if !(self.gamma_c > 0.0) {
            violations.push(Violation::NonPositiveGamma(Population::C, self.gamma_c));
        }
        if !(self.nu_control >= 0.0) {
            violations.push(Violation::NegativeControl(self.nu_control));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            violations.push(Violation::EpsilonOutOfRange(self.epsilon));
        }
        for p in Population::ALL {
            if self.sigma2[p] >= 2.0 * self.beta[p] {
                violations.push(Violation::InfiniteVariance {
                    population: p,
                    sigma2: self.sigma2[p],
                    beta: self.beta[p],
                });
            }
        }
        ValidationReport { violations }
    }

    /// Quasi-invariant scaling: every rate and noise variance is multiplied
    /// by `eps`, and the recorded `epsilon` accumulates multiplicatively.
    pub fn scaled(&self, eps: f64) -> Result<ParameterSet> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::EpsilonOutOfRange(eps));
        }
        Ok(ParameterSet {
            beta: self.beta.map(|_, b| b * eps),
            sigma2: self.sigma2.map(|_, s| s * eps),
            gamma_m: self.gamma_m * eps,
            gamma_c: self.gamma_c * eps,
            nu_control: self.nu_control * eps,
            epsilon: self.epsilon * eps,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveBeta(Population, f64),
    NegativeSigma2(Population, f64),
    NonPositiveGamma(Population, f64),
    NegativeControl(f64),
    EpsilonOutOfRange(f64),
    InfiniteVariance {
        population: Population,
        sigma2: f64,
        beta: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveBeta(p, v) => write!(f, "β_{p} must be positive (got {v})"),
            Violation::NegativeSigma2(p, v) => write!(f, "σ_{p}² must be nonnegative (got {v})"),
            Violation::NonPositiveGamma(p, v) => write!(f, "γ_{p} must be positive (got {v})"),
            Violation::NegativeControl(v) => write!(f, "ν_control must be nonnegative (got {v})"),
            Violation::EpsilonOutOfRange(v) => {
                write!(f, "epsilon must lie in the range (0,1] (got {v})")
            }
            Violation::InfiniteVariance {
                population,
                sigma2,
                beta,
            } => write!(
                f,
                "σ_{population}² ≥ 2β_{population} ({sigma2} ≥ {}): requires σ² < 2β for finite variances",
                2.0 * beta
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    /// True when the only problems are infinite-variance flags.
    pub fn only_variance_flags(&self) -> bool {
        self.violations
            .iter()
            .all(|v| matches!(v, Violation::InfiniteVariance { .. }))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("all constraints satisfied");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Means and variances of the four populations at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentState {
    pub t: f64,
    pub mean: PerPopulation<f64>,
    pub var: PerPopulation<f64>,
}

impl MomentState {
    pub fn new(t: f64, mean: [f64; 4], var: [f64; 4]) -> Self {
        MomentState {
            t,
            mean: PerPopulation(mean),
            var: PerPopulation(var),
        }
    }

    /// m_N + m_D, conserved by the exchange dynamics.
    pub fn exchange_mass(&self) -> f64 {
        self.mean[Population::N] + self.mean[Population::D]
    }
}
