//! Structure-preserving finite-volume solver for the mean-field
//! Fokker–Planck system
//! `d_t f_J = d_x[(lambda_J x - mu_J) f_J] + kappa_J/2 d_xx(x^2 f_J)`
//! on `[0, L]` with zero flux at both ends.
//!
//! The flux is written as `F = B f + D f_x` with `B = (lambda + kappa) x - mu`
//! and `D = kappa x^2 / 2`. Interface values of `f` are blended with the
//! weight `delta(w) = 1/w - 1/(e^w - 1)`, where `w` is the exact integral of
//! `B/D` across the two neighbouring cell centres. The resulting operator
//! has nonnegative off-diagonals, zero column sums, and annihilates the
//! inverse-Gamma density sampled at the cell centres.
//!
//! Time stepping is linearly implicit: coefficients are frozen at
//! extrapolated means and each population solves one tridiagonal system
//! per step (variable-step BDF2, falling back to backward Euler whenever
//! BDF2 would produce a negative value). Backward Euler maps nonnegative
//! data to nonnegative data for any step, so positivity never depends on
//! the step size.

use crate::error::{Error, Result};
use crate::metrics::DriftDiffusion;
use crate::params::{MomentState, ParameterSet, PerPopulation, Population};

pub use crate::metrics::DriftDiffusion as Coefficients;

/// Uniform cell-centred grid on `[0, length]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub length: f64,
    pub cells: usize,
}

impl Grid {
    pub fn new(length: f64, cells: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::NonPositive {
                what: "domain length",
                value: length,
            });
        }
        if cells < 3 {
            return Err(Error::InvalidArgument(format!("grid needs at least 3 cells, got {cells}")));
        }
        Ok(Grid { length, cells })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.center(i)).collect()
    }

    /// Position of the interface between cells `k` and `k + 1`.
    pub fn interface(&self, k: usize) -> f64 {
        (k as f64 + 1.0) * self.dx()
    }
}

/// Cell values of a probability density on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells {
            return Err(Error::GridMismatch(format!(
                "{} values for {} cells",
                values.len(),
                grid.cells
            )));
        }
        Ok(GridDensity { grid, values })
    }

    /// Samples `pdf` at the cell centres without renormalizing.
    pub fn from_pdf(grid: Grid, pdf: impl Fn(f64) -> f64) -> Self {
        GridDensity {
            values: grid.centers().into_iter().map(pdf).collect(),
            grid,
        }
    }

    /// Uniform density on `[mean - width/2, mean + width/2]` by exact cell
    /// overlaps; the part outside `[0, L]` is cut off and the rest rescaled
    /// to unit mass.
    pub fn uniform_box(grid: Grid, mean: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::NonPositive {
                what: "initial width",
                value: width,
            });
        }
        let lo = mean - 0.5 * width;
        let hi = mean + 0.5 * width;
        let dx = grid.dx();
        let values: Vec<f64> = (0..grid.cells)
            .map(|i| {
                let a = i as f64 * dx;
                let overlap = (hi.min(a + dx) - lo.max(a)).max(0.0);
                overlap / (dx * width)
            })
            .collect();
        let mut density = GridDensity { grid, values };
        if density.mass() <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "initial box [{lo}, {hi}] misses the domain [0, {}]",
                grid.length
            )));
        }
        density.normalize();
        Ok(density)
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }

    pub fn normalize(&mut self) {
        let m = self.mass();
        self.values.iter_mut().for_each(|v| *v /= m);
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    pub fn mean(&self) -> f64 {
        let g = self.grid;
        self.values.iter().enumerate().map(|(i, f)| f * g.center(i)).sum::<f64>() * g.dx()
    }

    pub fn variance(&self) -> f64 {
        let g = self.grid;
        let second: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let x = g.center(i);
                f * x * x
            })
            .sum::<f64>()
            * g.dx();
        let m = self.mean();
        second - m * m
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn l1_distance(&self, other: &GridDensity) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("densities live on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.grid.dx())
    }
}

/// `z / (e^z - 1)`, continuous through zero.
fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-10 {
        1.0 - 0.5 * z
    } else {
        z / z.exp_m1()
    }
}

/// Interface quantities of the blended flux
/// `F = B~ [(1 - delta) f_right + delta f_left] + d (f_right - f_left)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxWeights {
    /// Effective drift `B~`.
    pub advective: f64,
    /// `D / dx`.
    pub diffusive: f64,
    /// Weight of the left cell in the blended interface value.
    pub delta: f64,
    /// Coefficient of `f_right` in the flux.
    right: f64,
    /// Coefficient of `f_left` in the flux.
    left: f64,
}

/// `delta(w) = 1/w - 1/(e^w - 1)`; tends to 1/2 as `w -> 0`.
pub fn blending_weight(w: f64) -> f64 {
    if w.abs() < 1e-5 {
        0.5 - w / 12.0
    } else {
        1.0 / w - 1.0 / w.exp_m1()
    }
}

/// Flux weights at the interface `x` between centres `x - dx/2` and
/// `x + dx/2`. Vanishing diffusion falls back to upwinding.
pub fn flux_coefficients(coeffs: &DriftDiffusion, x: f64, dx: f64) -> Result<FluxWeights> {
    if !(x > 0.0 && dx > 0.0 && x - 0.5 * dx > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "interface {x} with spacing {dx} must lie strictly inside (0, inf)"
        )));
    }
    if coeffs.kappa < 0.0 {
        return Err(Error::Negative {
            what: "diffusion coefficient",
            value: coeffs.kappa,
        });
    }
    let drift = (coeffs.lambda + coeffs.kappa) * x - coeffs.mu;
    if coeffs.kappa == 0.0 {
        let (right, left) = if drift > 0.0 { (drift, 0.0) } else { (0.0, drift) };
        return Ok(FluxWeights {
            advective: drift,
            diffusive: 0.0,
            delta: if drift > 0.0 { 0.0 } else { 1.0 },
            right,
            left,
        });
    }
    let (xl, xr) = (x - 0.5 * dx, x + 0.5 * dx);
    let k = coeffs.kappa;
    let w = 2.0 * (coeffs.lambda + k) / k * (xr / xl).ln() + 2.0 * coeffs.mu / k * (1.0 / xr - 1.0 / xl);
    let d = 0.5 * k * x * x / dx;
    Ok(FluxWeights {
        advective: d * w,
        diffusive: d,
        delta: blending_weight(w),
        right: d * bernoulli(-w),
        left: -d * bernoulli(w),
    })
}

/// Tridiagonal flux-divergence operator `(A f)_i = (F_{i+1/2} - F_{i-1/2}) / dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Operator {
    pub fn assemble(grid: Grid, coeffs: &DriftDiffusion) -> Result<Self> {
        let n = grid.cells;
        let dx = grid.dx();
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for k in 0..n - 1 {
            let fw = flux_coefficients(coeffs, grid.interface(k), dx)?;
            // F_{k+1/2} = right f_{k+1} + left f_k enters row k with +, row k+1 with -
            sup[k] = fw.right / dx;
            diag[k] += fw.left / dx;
            diag[k + 1] -= fw.right / dx;
            sub[k + 1] = -fw.left / dx;
        }
        Ok(Operator { sub, diag, sup })
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * f[i];
                if i > 0 {
                    v += self.sub[i] * f[i - 1];
                }
                if i + 1 < n {
                    v += self.sup[i] * f[i + 1];
                }
                v
            })
            .collect()
    }

    /// Solves `(c0 I - dt A) x = rhs` by the Thomas algorithm. The matrix is
    /// a column-diagonally-dominant M-matrix, so no pivoting is needed and a
    /// nonnegative right-hand side gives a nonnegative solution.
    pub fn solve_shifted(&self, c0: f64, dt: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = rhs.len();
        let mut c = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut prev_c = 0.0;
        let mut prev_x = 0.0;
        for i in 0..n {
            let a = -dt * self.sub[i];
            let b = c0 - dt * self.diag[i];
            let denom = b - a * prev_c;
            if !(denom > 0.0 && denom.is_finite()) {
                return Err(Error::SingularSystem(i));
            }
            prev_c = -dt * self.sup[i] / denom;
            prev_x = (rhs[i] - a * prev_x) / denom;
            c[i] = prev_c;
            x[i] = prev_x;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        Ok(x)
    }
}

/// One backward-Euler step with frozen coefficients.
pub fn step_population(f: &GridDensity, coeffs: &DriftDiffusion, dt: f64) -> Result<GridDensity> {
    if !(dt > 0.0) {
        return Err(Error::NonPositive { what: "dt", value: dt });
    }
    let op = Operator::assemble(f.grid, coeffs)?;
    Ok(GridDensity {
        grid: f.grid,
        values: op.solve_shifted(1.0, dt, &f.values)?,
    })
}

/// Steps with ratio `dt_n / dt_{n-1}` above this use backward Euler.
const MAX_BDF2_RATIO: f64 = 2.0;

/// Variable-step BDF2 for one population with frozen coefficients; the
/// first step and any step whose BDF2 result has a negative entry fall back
/// to backward Euler.
#[derive(Debug, Clone)]
pub struct Bdf2Stepper {
    prev: Option<(Vec<f64>, f64)>,
    pub fallbacks: usize,
}

impl Default for Bdf2Stepper {
    fn default() -> Self {
        Self::new()
    }
}

impl Bdf2Stepper {
    pub fn new() -> Self {
        Bdf2Stepper { prev: None, fallbacks: 0 }
    }

    /// Ratio of `dt` to the previous step, if BDF2 is usable.
    pub fn ratio(&self, dt: f64) -> Option<f64> {
        self.prev
            .as_ref()
            .map(|(_, h)| dt / h)
            .filter(|&r| r <= MAX_BDF2_RATIO)
    }

    pub fn step(&mut self, f: &mut GridDensity, op: &Operator, dt: f64) -> Result<()> {
        let next = match (self.ratio(dt), &self.prev) {
            (Some(r), Some((old, _))) => {
                let c0 = (1.0 + 2.0 * r) / (1.0 + r);
                let c2 = r * r / (1.0 + r);
                let rhs: Vec<f64> = f
                    .values
                    .iter()
                    .zip(old)
                    .map(|(now, before)| (1.0 + r) * now - c2 * before)
                    .collect();
                let x = op.solve_shifted(c0, dt, &rhs)?;
                if x.iter().all(|&v| v >= 0.0) {
                    x
                } else {
                    self.fallbacks += 1;
                    op.solve_shifted(1.0, dt, &f.values)?
                }
            }
            _ => op.solve_shifted(1.0, dt, &f.values)?,
        };
        let old = std::mem::replace(&mut f.values, next);
        self.prev = Some((old, dt));
        Ok(())
    }
}

/// Grid means and variances of the four densities.
pub fn grid_moments(t: f64, densities: &PerPopulation<GridDensity>) -> MomentState {
    MomentState {
        t,
        mean: densities.map(|_, d| d.mean()),
        var: densities.map(|_, d| d.variance()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    /// Increasing report times; the first may equal the start time.
    pub report_times: Vec<f64>,
    pub dt_max: f64,
}

impl EvolveOptions {
    /// `dt = 0.5 dx` with reports every `interval` up to `horizon`.
    pub fn uniform(grid: Grid, horizon: f64, interval: f64) -> Self {
        let n = (horizon / interval).round().max(1.0) as usize;
        let mut report_times: Vec<f64> = (0..=n).map(|k| (k as f64 * interval).min(horizon)).collect();
        report_times.dedup();
        if *report_times.last().unwrap() < horizon {
            report_times.push(horizon);
        }
        EvolveOptions {
            report_times,
            dt_max: 0.5 * grid.dx(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOutput {
    /// Grid moments at each report time.
    pub moments: Vec<MomentState>,
    pub densities: PerPopulation<GridDensity>,
    pub steps: usize,
    /// Steps where some population fell back from BDF2 to backward Euler.
    pub fallbacks: usize,
}

/// Advances the coupled system, refreshing every population's coefficients
/// from the grid means of the same snapshot (linearly extrapolated to the
/// new time level once a history exists). `observer` sees the densities
/// at each report time.
pub fn evolve_system(
    initial: PerPopulation<GridDensity>,
    params: &ParameterSet,
    options: &EvolveOptions,
    mut observer: impl FnMut(f64, &PerPopulation<GridDensity>),
) -> Result<EvolveOutput> {
    if !(options.dt_max > 0.0) {
        return Err(Error::NonPositive {
            what: "dt_max",
            value: options.dt_max,
        });
    }
    let grid = initial[Population::N].grid;
    if Population::ALL.iter().any(|&p| initial[p].grid != grid) {
        return Err(Error::GridMismatch("populations on different grids".into()));
    }
    if options.report_times.windows(2).any(|w| w[1] <= w[0]) || options.report_times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidArgument("report times must be nonnegative and increasing".into()));
    }
    let mut f = initial;
    let mut t = 0.0;
    let mut steppers: [Bdf2Stepper; 4] = Default::default();
    let mut prev_mean: Option<PerPopulation<f64>> = None;
    let mut last_dt = 0.0;
    let mut steps = 0;
    let mut fallbacks = 0;
    let mut moments = Vec::with_capacity(options.report_times.len());
    for &target in &options.report_times {
        let span = target - t;
        if span > 0.0 {
            let n = (span / options.dt_max).ceil().max(1.0) as usize;
            let dt = span / n as f64;
            for k in 0..n {
                let mean = f.map(|_, d| d.mean());
                let frozen = match prev_mean {
                    Some(old) if last_dt > 0.0 => {
                        let r = dt / last_dt;
                        let guess = PerPopulation::from_fn(|p| mean[p] + r * (mean[p] - old[p]));
                        if guess.0.iter().all(|&m| m > 0.0) {
                            guess
                        } else {
                            mean
                        }
                    }
                    _ => mean,
                };
                if let Some(p) = Population::ALL.into_iter().find(|&p| !(frozen[p] > 0.0)) {
                    return Err(Error::NonPositiveMean {
                        population: p,
                        value: frozen[p],
                    });
                }
                let before: usize = steppers.iter().map(|s| s.fallbacks).sum();
                for p in Population::ALL {
                    let coeffs = DriftDiffusion::for_population(params, p, &frozen);
                    let op = Operator::assemble(grid, &coeffs)?;
                    let d = &mut f.0[p.index()];
                    steppers[p.index()].step(d, &op, dt)?;
                    if let Some((cell, &value)) = d.values.iter().enumerate().find(|(_, v)| **v < 0.0) {
                        return Err(Error::NegativeDensity {
                            population: p,
                            cell,
                            value,
                        });
                    }
                }
                let after: usize = steppers.iter().map(|s| s.fallbacks).sum();
                fallbacks += usize::from(after > before);
                prev_mean = Some(mean);
                last_dt = dt;
                steps += 1;
                t = if k + 1 == n { target } else { t + dt };
            }
        }
        moments.push(grid_moments(t, &f));
        observer(t, &f);
    }
    Ok(EvolveOutput {
        moments,
        densities: f,
        steps,
        fallbacks,
    })
}

/// Densities of the four populations sampled at the cell centres of the
/// quasi-equilibria at `mean`, each rescaled to unit mass.
pub fn discrete_quasi_equilibrium(
    grid: Grid,
    params: &ParameterSet,
    mean: &PerPopulation<f64>,
) -> Result<PerPopulation<GridDensity>> {
    let mut out = Vec::with_capacity(4);
    for p in Population::ALL {
        let ig = DriftDiffusion::for_population(params, p, mean).stationary()?;
        out.push(GridDensity::from_pdf(grid, |x| ig.pdf(x)).normalized());
    }
    let arr: [GridDensity; 4] = out.try_into().expect("four populations");
    Ok(PerPopulation(arr))
}
