//! Closed moment systems: the mean ODEs, the mean-field variance ODEs and
//! their equilibria.
//!
//! With therapy the C-equations use the effective loss rate `beta_C + nu`;
//! for the variance equation this is an extension obtained by the same
//! derivation as the controlled mean.

use crate::error::{Error, Result};
use crate::params::{MomentState, ParameterSet, PerPopulation, Population};

use Population::{C, D, M, N};

/// Time derivative of the means.
pub fn means_rhs(mean: &PerPopulation<f64>, params: &ParameterSet) -> PerPopulation<f64> {
    let b = &params.beta;
    let exchange = -b[N] * mean[N] * mean[C] + b[D] * mean[M] * mean[D];
    PerPopulation([
        exchange,
        -exchange,
        -b[M] * mean[M] + params.gamma_m * mean[D],
        -params.decay_rate(C) * mean[C] + params.gamma_c * mean[M],
    ])
}

/// `d(means_rhs)_i / d m_j`.
pub fn jacobian(mean: &PerPopulation<f64>, params: &ParameterSet) -> [[f64; 4]; 4] {
    let b = &params.beta;
    let row_n = [
        -b[N] * mean[C],
        b[D] * mean[M],
        b[D] * mean[D],
        -b[N] * mean[N],
    ];
    [
        row_n,
        row_n.map(|v| -v),
        [0.0, params.gamma_m, -b[M], 0.0],
        [0.0, 0.0, params.gamma_c, -params.decay_rate(C)],
    ]
}

/// Mean-dependent relaxation factor `g_J` of the variance equation.
pub fn variance_gate(mean: &PerPopulation<f64>, pop: Population) -> f64 {
    match pop {
        N => mean[C],
        D => mean[M],
        M | C => 1.0,
    }
}

/// Stationary variance for the given mean: `sigma^2 m^2 / (2 beta - sigma^2)`.
pub fn stationary_variance(params: &ParameterSet, pop: Population, mean: f64) -> Option<f64> {
    let gap = 2.0 * params.decay_rate(pop) - params.sigma2[pop];
    (gap > 0.0).then(|| params.sigma2[pop] * mean * mean / gap)
}

/// Time derivative of the mean-field variances.
pub fn variances_rhs(state: &MomentState, params: &ParameterSet) -> Result<PerPopulation<f64>> {
    let mut out = PerPopulation::splat(0.0);
    for p in Population::ALL {
        let gap = 2.0 * params.decay_rate(p) - params.sigma2[p];
        if gap <= 0.0 {
            return Err(Error::InfiniteVariance(p));
        }
        let target = params.sigma2[p] * state.mean[p] * state.mean[p] / gap;
        out[p] = -gap * variance_gate(&state.mean, p) * (state.var[p] - target);
    }
    Ok(out)
}

/// Coupled mean and variance system with its current state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldSystem {
    pub params: ParameterSet,
    pub state: MomentState,
}

impl MeanFieldSystem {
    pub fn new(params: ParameterSet, state: MomentState) -> Self {
        MeanFieldSystem { params, state }
    }

    /// Derivative of the state packed as a `MomentState` whose `t` is 1.
    fn rhs(&self, s: &MomentState) -> Result<MomentState> {
        Ok(MomentState {
            t: 1.0,
            mean: means_rhs(&s.mean, &self.params),
            var: variances_rhs(s, &self.params)?,
        })
    }

    /// One classical RK4 step of length `dt`.
    pub fn rk4_step(&mut self, dt: f64) -> Result<()> {
        let s = self.state;
        let axpy = |k: &MomentState, h: f64| MomentState {
            t: s.t + h,
            mean: PerPopulation::from_fn(|p| s.mean[p] + h * k.mean[p]),
            var: PerPopulation::from_fn(|p| s.var[p] + h * k.var[p]),
        };
        let k1 = self.rhs(&s)?;
        let k2 = self.rhs(&axpy(&k1, 0.5 * dt))?;
        let k3 = self.rhs(&axpy(&k2, 0.5 * dt))?;
        let k4 = self.rhs(&axpy(&k3, dt))?;
        let combine = |a: f64, k: [f64; 4]| a + dt / 6.0 * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3]);
        let next = MomentState {
            t: s.t + dt,
            mean: PerPopulation::from_fn(|p| {
                combine(s.mean[p], [k1.mean[p], k2.mean[p], k3.mean[p], k4.mean[p]])
            }),
            var: PerPopulation::from_fn(|p| {
                combine(s.var[p], [k1.var[p], k2.var[p], k3.var[p], k4.var[p]])
            }),
        };
        if let Some((p, &v)) = next.mean.iter().find(|(_, &v)| !(v > 0.0)) {
            return Err(Error::NonPositiveMean {
                population: p,
                value: v,
            });
        }
        self.state = next;
        Ok(())
    }

    /// Advance to time `t_end`, shortening the last step to land on it.
    pub fn advance_to(&mut self, t_end: f64, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::NonPositive {
                what: "dt",
                value: dt,
            });
        }
        while self.state.t < t_end {
            let remaining = t_end - self.state.t;
            if remaining <= 1e-12 * t_end.abs().max(1.0) {
                break;
            }
            self.rk4_step(dt.min(remaining))?;
        }
        self.state.t = t_end.max(self.state.t);
        Ok(())
    }
}

/// Fixed-step RK4 from `system.state`, recording every step up to `horizon`.
pub fn integrate(system: &MeanFieldSystem, horizon: f64, dt: f64) -> Result<Vec<MomentState>> {
    if !(dt > 0.0) {
        return Err(Error::NonPositive {
            what: "dt",
            value: dt,
        });
    }
    let t0 = system.state.t;
    let steps = ((horizon / dt) - 1e-9).ceil().max(0.0) as usize;
    let times: Vec<f64> = (1..=steps).map(|k| t0 + (k as f64 * dt).min(horizon)).collect();
    integrate_at(system, &times, dt)
}

/// Integrate and sample at the given increasing times (the initial state is
/// always the first entry).
pub fn integrate_at(system: &MeanFieldSystem, times: &[f64], dt: f64) -> Result<Vec<MomentState>> {
    let mut sys = *system;
    sys.params.require_finite_variances()?;
    let mut out = Vec::with_capacity(times.len() + 1);
    out.push(sys.state);
    for &t in times {
        if t <= sys.state.t {
            continue;
        }
        sys.advance_to(t, dt)?;
        out.push(sys.state);
    }
    Ok(out)
}

/// Closed-form equilibria for conserved mass `m0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSummary {
    pub mean: PerPopulation<f64>,
    /// `None` for populations with `sigma^2 >= 2 beta`.
    pub var: PerPopulation<Option<f64>>,
    pub valid_variances: bool,
}

pub fn equilibrium(params: &ParameterSet, m0: f64) -> Result<EquilibriumSummary> {
    if !(m0 > 0.0) {
        return Err(Error::NonPositive {
            what: "m0",
            value: m0,
        });
    }
    let b = &params.beta;
    let bc = params.decay_rate(C);
    let m_n = b[D] * bc * m0 / (b[D] * bc + b[N] * params.gamma_c);
    let m_d = m0 - m_n;
    let m_m = params.gamma_m / b[M] * m_d;
    let m_c = params.gamma_c * m_m / bc;
    let mean = PerPopulation([m_n, m_d, m_m, m_c]);
    let var = mean.map(|p, &m| stationary_variance(params, p, m));
    let valid_variances = var.0.iter().all(Option::is_some);
    Ok(EquilibriumSummary {
        mean,
        var,
        valid_variances,
    })
}
