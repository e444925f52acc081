//! Inverse-Gamma quasi-equilibria, energy distances and decay envelopes.
//!
//! With coefficients frozen at the current means every Fokker–Planck
//! equation has an inverse-Gamma stationary state with constant shape
//! `nu_J = 1 + 2 beta_J / sigma_J^2` and mean-dependent scale `omega_J`.
//!
//! Distances use the energy distance with exponent `alpha = 2p - 1`, which
//! is the computational route to the negative Sobolev norm of order `p`.
//! The norm-labelled output applies the constant
//! `c_p = sqrt(2)/(2p-1) Gamma(3/2-p) / (2^(2p-1) Gamma(p))` to the energy
//! distance. That constant does not coincide with the one implied by the
//! Fourier definition of the norm (`2 Gamma(1-alpha) cos(pi alpha/2)/alpha`,
//! about 5.01 at p = 3/4 against 2); the energy distance itself is
//! therefore the primary observable.

use statrs::function::gamma::{gamma, gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::moments::means_rhs;
use crate::params::{MomentState, ParameterSet, PerPopulation, Population};

use Population::{C, D, M, N};

/// Inverse-Gamma law with density `omega^nu / Gamma(nu) x^-(nu+1) e^(-omega/x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseGammaSpec {
    pub nu: f64,
    pub omega: f64,
}

impl InverseGammaSpec {
    pub fn new(nu: f64, omega: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::NonPositive {
                what: "inverse-Gamma shape",
                value: nu,
            });
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::NonPositive {
                what: "inverse-Gamma scale",
                value: omega,
            });
        }
        Ok(InverseGammaSpec { nu, omega })
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.nu * self.omega.ln() - ln_gamma(self.nu) - (self.nu + 1.0) * x.ln() - self.omega / x
    }

    /// Density; zero for `x <= 0`.
    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.ln_pdf(x).exp()
        }
    }

    pub fn mean(&self) -> Option<f64> {
        (self.nu > 1.0).then(|| self.omega / (self.nu - 1.0))
    }

    pub fn variance(&self) -> Option<f64> {
        (self.nu > 2.0).then(|| {
            let d = self.nu - 1.0;
            self.omega * self.omega / (d * d * (self.nu - 2.0))
        })
    }

    pub fn mode(&self) -> f64 {
        self.omega / (self.nu + 1.0)
    }

    /// `P(X > length)`, the mass lost by truncating the domain at `length`.
    pub fn tail_mass(&self, length: f64) -> f64 {
        gamma_lr(self.nu, self.omega / length)
    }
}

/// Constant shape parameter; the therapy term enters through `beta_C + nu`.
pub fn shape(params: &ParameterSet, pop: Population) -> Result<f64> {
    let s2 = params.sigma2[pop];
    if !(s2 > 0.0) {
        return Err(Error::NonPositive {
            what: "sigma^2",
            value: s2,
        });
    }
    Ok(1.0 + 2.0 * params.decay_rate(pop) / s2)
}

/// Scale parameter `omega_J` at the given means.
pub fn scale(params: &ParameterSet, pop: Population, mean: &PerPopulation<f64>) -> Result<f64> {
    let b = &params.beta;
    let s2 = params.sigma2[pop];
    let driving = |q: Population| {
        if mean[q] > 0.0 {
            Ok(mean[q])
        } else {
            Err(Error::NonPositiveMean {
                population: q,
                value: mean[q],
            })
        }
    };
    let omega = match pop {
        N => 2.0 * b[D] * mean[M] * mean[D] / (s2 * driving(C)?),
        D => 2.0 * b[N] * mean[N] * mean[C] / (s2 * driving(M)?),
        M => 2.0 * params.gamma_m * mean[D] / s2,
        C => 2.0 * params.gamma_c * mean[M] / s2,
    };
    InverseGammaSpec::new(1.0, omega)?;
    Ok(omega)
}

/// Stationary state of the population's equation with coefficients frozen
/// at `mean`.
pub fn quasi_equilibrium(pop: Population, mean: &PerPopulation<f64>, params: &ParameterSet) -> Result<InverseGammaSpec> {
    InverseGammaSpec::new(shape(params, pop)?, scale(params, pop, mean)?)
}

/// `d omega_J / dt` along the mean equations, by the quotient rule.
pub fn omega_derivative(params: &ParameterSet, pop: Population, mean: &PerPopulation<f64>) -> Result<f64> {
    let omega = scale(params, pop, mean)?;
    let dm = means_rhs(mean, params);
    let rel = |q: Population| dm[q] / mean[q];
    Ok(match pop {
        N => omega * (rel(M) + rel(D) - rel(C)),
        D => omega * (rel(N) + rel(C) - rel(M)),
        M => 2.0 * params.gamma_m * dm[D] / params.sigma2[M],
        C => 2.0 * params.gamma_c * dm[M] / params.sigma2[C],
    })
}

/// Energy-distance exponent in `(1/2, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(f64);

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p > 0.5 && p < 1.0 {
            Ok(Exponent(p))
        } else {
            Err(Error::ExponentOutOfRange(p))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Power `2p - 1` of the distance kernel.
    pub fn alpha(self) -> f64 {
        2.0 * self.0 - 1.0
    }
}

/// Cell-averaged kernel `|x - y|^alpha` on a uniform grid: the energy
/// distance of two piecewise-constant densities is exact up to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEnergy {
    pub p: Exponent,
    pub dx: f64,
    weights: Vec<f64>,
}

impl GridEnergy {
    pub fn new(p: Exponent, dx: f64, n: usize) -> Self {
        let a = p.alpha();
        let prim = |u: f64| u.abs().powf(a + 2.0) / ((a + 1.0) * (a + 2.0));
        let scale = dx.powf(a);
        let weights = (0..n)
            .map(|k| {
                let k = k as f64;
                scale * (prim(k + 1.0) - 2.0 * prim(k) + prim(k - 1.0))
            })
            .collect();
        GridEnergy { p, dx, weights }
    }

    /// `E^p(f, g)` for cell values `f`, `g` of unit mass.
    pub fn distance(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        if f.len() != g.len() || f.len() > self.weights.len() {
            return Err(Error::GridMismatch(format!(
                "{} vs {} cells (kernel sized for {})",
                f.len(),
                g.len(),
                self.weights.len()
            )));
        }
        let h: Vec<f64> = f.iter().zip(g).map(|(a, b)| a - b).collect();
        let w = &self.weights;
        let mut total = 0.0;
        for i in 0..h.len() {
            let mut row = w[0] * h[i];
            for j in 0..i {
                row += 2.0 * w[i - j] * h[j];
            }
            total += h[i] * row;
        }
        Ok(-self.dx * self.dx * total)
    }
}

/// `E^p` between densities sampled on the same uniform grid.
pub fn energy_distance_grid(f: &[f64], g: &[f64], dx: f64, p: f64) -> Result<f64> {
    GridEnergy::new(Exponent::new(p)?, dx, f.len()).distance(f, g)
}

/// `E^p` between two sample sets by U-statistics: cross term over all
/// pairs, within-sample terms over distinct pairs (zero for one sample).
pub fn energy_distance_samples(x: &[f64], y: &[f64], p: f64) -> Result<f64> {
    let a = Exponent::new(p)?.alpha();
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let cross: f64 = x
        .iter()
        .map(|&u| y.iter().map(|&v| (u - v).abs().powf(a)).sum::<f64>())
        .sum::<f64>()
        / (x.len() * y.len()) as f64;
    let within = |s: &[f64]| {
        if s.len() < 2 {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in 0..s.len() {
            for j in 0..i {
                acc += (s[i] - s[j]).abs().powf(a);
            }
        }
        2.0 * acc / (s.len() * (s.len() - 1)) as f64
    };
    Ok(2.0 * cross - within(x) - within(y))
}

/// Printed equivalence constant between `E^p` and the norm.
pub fn norm_constant(p: Exponent) -> f64 {
    let p = p.get();
    std::f64::consts::SQRT_2 / (2.0 * p - 1.0) * gamma(1.5 - p) / (2f64.powf(2.0 * p - 1.0) * gamma(p))
}

/// Norm value `c_p E^p` from an energy distance.
pub fn hminus_p_from_energy(energy: f64, p: Exponent) -> f64 {
    norm_constant(p) * energy
}

pub fn hminus_p_norm(f: &[f64], g: &[f64], dx: f64, p: f64) -> Result<f64> {
    let e = Exponent::new(p)?;
    Ok(hminus_p_from_energy(energy_distance_grid(f, g, dx, p)?, e))
}

/// Constant of the interpolation inequality in the decay estimate.
pub fn interpolation_constant(p: Exponent) -> f64 {
    let p = p.get();
    let q = 3.0 - 2.0 * p;
    let r = (p - 0.5) / (2.0 - 2.0 * p);
    (2.0 / (2.0 * p - 1.0)).powf((2.0 - 2.0 * p) / q)
        * (1.0 / (1.0 - p)).powf((2.0 * p - 1.0) / q)
        * (r.powf(2.0 * (2.0 - 2.0 * p) / q) + r.powf((1.0 - 2.0 * p) / q))
}

/// Contraction rate and forcing of the differential inequality for `y_J`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCoefficients {
    pub t: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c_p: f64,
    /// `max_t (m_J + m_J^q)`.
    pub mass_bound: f64,
    /// `max_t 2 nu_J / omega_J`.
    pub scale_bound: f64,
}

pub fn envelope_coefficients(
    pop: Population,
    p: Exponent,
    trajectory: &[MomentState],
    params: &ParameterSet,
) -> Result<EnvelopeCoefficients> {
    if trajectory.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let pv = p.get();
    let q = 3.0 - 2.0 * pv;
    let nu = shape(params, pop)?;
    let rate = (2.0 * pv - 1.0) / q * (params.sigma2[pop] * q / 4.0 + params.decay_rate(pop));
    let gate = |s: &MomentState| match pop {
        N => s.mean[C],
        D => s.mean[M],
        M | C => 1.0,
    };
    let mut mass_bound = 0.0f64;
    let mut scale_bound = 0.0f64;
    let mut slopes = Vec::with_capacity(trajectory.len());
    for s in trajectory {
        let omega = scale(params, pop, &s.mean)?;
        mass_bound = mass_bound.max(s.mean[pop] + omega / (nu - 1.0));
        scale_bound = scale_bound.max(2.0 * nu / omega);
        slopes.push(omega_derivative(params, pop, &s.mean)?.abs());
    }
    let c_p = interpolation_constant(p);
    Ok(EnvelopeCoefficients {
        t: trajectory.iter().map(|s| s.t).collect(),
        a: trajectory.iter().map(|s| rate * gate(s)).collect(),
        b: slopes
            .iter()
            .map(|w| c_p * mass_bound * scale_bound * w / q)
            .collect(),
        c_p,
        mass_bound,
        scale_bound,
    })
}

/// Upper envelopes for `E^p(f_J, f_J^q)` along a moment trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayEnvelope {
    pub t: Vec<f64>,
    /// Grönwall bound, converted to energy-distance units.
    pub gronwall: Vec<f64>,
    /// `exp(-(3-2p) int a) - 1`; nonpositive whenever `a >= 0`.
    pub fig5: Vec<f64>,
    pub coefficients: EnvelopeCoefficients,
}

/// Integrates `y' <= -a y + b` from `y(0) = (c_p E0)^(1/(3-2p))`, with
/// trapezoidal quadrature on the trajectory's time grid, and maps the
/// bound back through `E = y^(3-2p) / c_p`.
pub fn decay_envelope(
    pop: Population,
    p: Exponent,
    trajectory: &[MomentState],
    params: &ParameterSet,
    initial_energy: f64,
) -> Result<DecayEnvelope> {
    let coef = envelope_coefficients(pop, p, trajectory, params)?;
    let q = 3.0 - 2.0 * p.get();
    let c = norm_constant(p);
    let mut y = (c * initial_energy.max(0.0)).powf(1.0 / q);
    let mut big_a = 0.0;
    let mut gronwall = vec![y.powf(q) / c];
    let mut fig5 = vec![0.0];
    for k in 1..coef.t.len() {
        let h = coef.t[k] - coef.t[k - 1];
        let da = 0.5 * h * (coef.a[k] + coef.a[k - 1]);
        let decay = (-da).exp();
        y = y * decay + 0.5 * h * (coef.b[k - 1] * decay + coef.b[k]);
        big_a += da;
        gronwall.push(y.powf(q) / c);
        fig5.push((-q * big_a).exp() - 1.0);
    }
    Ok(DecayEnvelope {
        t: coef.t.clone(),
        gronwall,
        fig5,
        coefficients: coef,
    })
}

/// Drift and diffusion coefficients of one Fokker–Planck equation:
/// `d_t f = d_x[(lambda x - mu) f] + kappa/2 d_xx(x^2 f)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftDiffusion {
    pub lambda: f64,
    pub mu: f64,
    pub kappa: f64,
}

impl DriftDiffusion {
    pub fn for_population(params: &ParameterSet, pop: Population, mean: &PerPopulation<f64>) -> Self {
        let b = &params.beta;
        let s2 = params.sigma2[pop];
        match pop {
            N => DriftDiffusion {
                lambda: b[N] * mean[C],
                mu: b[D] * mean[M] * mean[D],
                kappa: s2 * mean[C],
            },
            D => DriftDiffusion {
                lambda: b[D] * mean[M],
                mu: b[N] * mean[N] * mean[C],
                kappa: s2 * mean[M],
            },
            M => DriftDiffusion {
                lambda: b[M],
                mu: params.gamma_m * mean[D],
                kappa: s2,
            },
            C => DriftDiffusion {
                lambda: params.decay_rate(C),
                mu: params.gamma_c * mean[M],
                kappa: s2,
            },
        }
    }

    /// Inverse-Gamma stationary state, if diffusion and in-drift are positive.
    pub fn stationary(&self) -> Result<InverseGammaSpec> {
        if !(self.kappa > 0.0) {
            return Err(Error::NonPositive {
                what: "diffusion coefficient",
                value: self.kappa,
            });
        }
        InverseGammaSpec::new(1.0 + 2.0 * self.lambda / self.kappa, 2.0 * self.mu / self.kappa)
    }
}

/// Pointwise residual of the stationary operator applied to `f`, by
/// fifth-order central differences with step `h`.
pub fn stationary_residual(f: impl Fn(f64) -> f64, coeffs: &DriftDiffusion, x: f64, h: f64) -> f64 {
    let drift = |y: f64| (coeffs.lambda * y - coeffs.mu) * f(y);
    let spread = |y: f64| y * y * f(y);
    let d1 = |g: &dyn Fn(f64) -> f64| {
        (-g(x + 2.0 * h) + 8.0 * g(x + h) - 8.0 * g(x - h) + g(x - 2.0 * h)) / (12.0 * h)
    };
    let d2 = |g: &dyn Fn(f64) -> f64| {
        (-g(x + 2.0 * h) + 16.0 * g(x + h) - 30.0 * g(x) + 16.0 * g(x - h) - g(x - 2.0 * h)) / (12.0 * h * h)
    };
    d1(&drift) + 0.5 * coeffs.kappa * d2(&spread)
}
