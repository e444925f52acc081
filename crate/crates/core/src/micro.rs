//! Microscopic interaction rules.
//!
//! Every rule maps nonnegative densities to a nonnegative density. The
//! `*_update` functions validate their inputs; the DSMC engine calls the
//! unchecked kernels in [`kernel`] after validating the parameter set once
//! through [`NoiseSampler::new`].

use rand::{Rng, RngExt};

use crate::error::{Error, Result};
use crate::params::{ParameterSet, Population};

/// Zero-mean law of the multiplicative noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseLaw {
    /// `±sqrt(variance)` with probability 1/2 each.
    #[default]
    TwoPoint,
    /// Uniform on `[-sqrt(3 variance), +sqrt(3 variance)]`.
    UniformSymmetric,
}

impl NoiseLaw {
    /// Largest |eta| the law can produce for unit variance.
    pub fn amplitude_factor(self) -> f64 {
        match self {
            NoiseLaw::TwoPoint => 1.0,
            NoiseLaw::UniformSymmetric => 3f64.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma2: f64,
    pub law: NoiseLaw,
}

/// Result of a single microscopic interaction.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct InteractionOutcome {
    pub updated_value: f64,
}

fn check_nonneg(what: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 {
        Ok(())
    } else {
        Err(Error::Negative { what, value })
    }
}

fn outcome(value: f64) -> Result<InteractionOutcome> {
    if value >= 0.0 {
        Ok(InteractionOutcome {
            updated_value: value,
        })
    } else {
        Err(Error::NegativeOutcome(value))
    }
}

/// Saturating response `x / (1 + x)`.
pub fn saturation(x: f64) -> Result<f64> {
    check_nonneg("density", x)?;
    Ok(kernel::saturation(x))
}

/// Normal cells after an encounter with a cytotoxic T lymphocyte of density `x_c`.
pub fn degeneration_update(x_n: f64, x_c: f64, eta: f64, beta_n: f64) -> Result<InteractionOutcome> {
    check_nonneg("x_N", x_n)?;
    check_nonneg("x_C", x_c)?;
    outcome(kernel::loss(x_n, x_c, eta, beta_n))
}

/// Damaged cells after clearance by macrophages of density `x_m`.
pub fn clearance_update(x_d: f64, x_m: f64, eta: f64, beta_d: f64) -> Result<InteractionOutcome> {
    check_nonneg("x_D", x_d)?;
    check_nonneg("x_M", x_m)?;
    outcome(kernel::loss(x_d, x_m, eta, beta_d))
}

/// Normal cells replenished by regeneration of cleared damaged cells.
pub fn replenish_update(x_n: f64, x_d: f64, x_m: f64, beta_d: f64) -> Result<InteractionOutcome> {
    check_nonneg("x_N", x_n)?;
    check_nonneg("x_D", x_d)?;
    check_nonneg("x_M", x_m)?;
    outcome(kernel::gain(x_n, x_d, x_m, beta_d))
}

/// Damaged cells gained from normal cells hit by T lymphocytes.
pub fn damage_gain_update(x_d: f64, x_n: f64, x_c: f64, beta_n: f64) -> Result<InteractionOutcome> {
    check_nonneg("x_D", x_d)?;
    check_nonneg("x_N", x_n)?;
    check_nonneg("x_C", x_c)?;
    outcome(kernel::gain(x_d, x_n, x_c, beta_n))
}

/// Natural decay with homeostatic fluctuation (macrophages, T lymphocytes).
pub fn decay_update(x: f64, eta: f64, beta: f64) -> Result<InteractionOutcome> {
    check_nonneg("density", x)?;
    outcome(kernel::decay(x, eta, beta))
}

/// Recruitment `x + gamma * source - nu * x`; `nu` is the therapy efficacy
/// and is only nonzero for T lymphocytes.
pub fn recruitment_update(x: f64, source: f64, gamma: f64, nu_control: f64) -> Result<InteractionOutcome> {
    check_nonneg("density", x)?;
    check_nonneg("source", source)?;
    check_nonneg("nu_control", nu_control)?;
    if nu_control > 1.0 {
        return Err(Error::ControlTooLarge(nu_control));
    }
    outcome(kernel::recruitment(x, source, gamma, nu_control))
}

/// Draw one noise value with the given variance.
pub fn sample_noise<R: Rng + ?Sized>(law: NoiseLaw, variance: f64, rng: &mut R) -> f64 {
    if variance <= 0.0 {
        return 0.0;
    }
    match law {
        NoiseLaw::TwoPoint => {
            let s = variance.sqrt();
            if rng.random::<bool>() {
                s
            } else {
                -s
            }
        }
        NoiseLaw::UniformSymmetric => {
            let a = (3.0 * variance).sqrt();
            a * (2.0 * rng.random::<f64>() - 1.0)
        }
    }
}

/// Noise source bound to a parameter set whose rules it has checked for
/// positivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSampler {
    law: NoiseLaw,
}

impl NoiseSampler {
    /// Fails if some rule could produce a negative density: the worst case
    /// is a saturated response (Phi = 1), requiring
    /// `1 - beta_J - a * sigma_J >= 0` with `a` the law's amplitude factor.
    pub fn new(law: NoiseLaw, params: &ParameterSet) -> Result<Self> {
        for p in Population::ALL {
            let margin = positivity_margin(law, params, p);
            if margin < 0.0 {
                return Err(Error::NoisePositivity {
                    population: p,
                    margin,
                });
            }
        }
        if params.nu_control > 1.0 {
            return Err(Error::ControlTooLarge(params.nu_control));
        }
        Ok(NoiseSampler { law })
    }

    pub fn law(&self) -> NoiseLaw {
        self.law
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, variance: f64, rng: &mut R) -> f64 {
        sample_noise(self.law, variance, rng)
    }
}

pub fn positivity_margin(law: NoiseLaw, params: &ParameterSet, pop: Population) -> f64 {
    1.0 - params.beta[pop] - law.amplitude_factor() * params.sigma2[pop].sqrt()
}

/// Unchecked forms of the rules, shared by the checked API and the DSMC
/// engine.
pub mod kernel {
    #[inline(always)]
    pub fn saturation(x: f64) -> f64 {
        x / (1.0 + x)
    }

    /// `x - beta Phi(partner) x + eta x`
    #[inline(always)]
    pub fn loss(x: f64, partner: f64, eta: f64, beta: f64) -> f64 {
        x * (1.0 - beta * saturation(partner) + eta)
    }

    /// `x + beta Phi(mediator) source`
    #[inline(always)]
    pub fn gain(x: f64, source: f64, mediator: f64, beta: f64) -> f64 {
        x + beta * saturation(mediator) * source
    }

    #[inline(always)]
    pub fn decay(x: f64, eta: f64, beta: f64) -> f64 {
        x * (1.0 - beta + eta)
    }

    #[inline(always)]
    pub fn recruitment(x: f64, source: f64, gamma: f64, nu: f64) -> f64 {
        x + gamma * source - nu * x
    }
}
