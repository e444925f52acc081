//! Direct simulation Monte Carlo for the kinetic model.
//!
//! Each population is a set of equally weighted particles. A step applies
//! the eight interaction channels with independent Bernoulli trials per
//! particle, drawing partners from the pre-step snapshot (Jacobi update).
//! A particle hit by both of its channels composes them as loss then gain.
//!
//! Work is split into fixed contiguous chunks, one per worker stream, so a
//! run is bit-reproducible for a given seed and worker count regardless of
//! how rayon schedules the chunks.

use rand::{Rng, RngExt, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::micro::{kernel, sample_noise, NoiseLaw, NoiseSampler};
use crate::moments::jacobian;
use crate::params::{MomentState, ParameterSet, PerPopulation, Population};

use Population::{C, D, M, N};

/// Interaction kernel `1 + x`.
#[inline(always)]
pub fn kappa(x: f64) -> f64 {
    1.0 + x
}

/// Side of the uniform initial law with variance 0.1.
pub fn default_init_width() -> f64 {
    (6.0f64 / 5.0).sqrt()
}

/// Particle samples of all four populations.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    particles: PerPopulation<Vec<f64>>,
    scratch: PerPopulation<Vec<f64>>,
    streams: Vec<Xoshiro256PlusPlus>,
    /// Internal (unscaled) simulation time.
    pub t: f64,
}

impl ParticleEnsemble {
    /// Build from explicit samples; every population must hold the same
    /// nonzero number of nonnegative values.
    pub fn from_samples(samples: PerPopulation<Vec<f64>>, seed: u64, workers: usize) -> Result<Self> {
        let n = samples[N].len();
        if n == 0 {
            return Err(Error::EmptyEnsemble);
        }
        for (p, s) in samples.iter() {
            if s.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "population {p} has {} particles, expected {n}",
                    s.len()
                )));
            }
            if let Some(&v) = s.iter().find(|&&v| !(v >= 0.0)) {
                return Err(Error::Negative {
                    what: "particle density",
                    value: v,
                });
            }
        }
        let base = Xoshiro256PlusPlus::seed_from_u64(seed);
        Ok(ParticleEnsemble {
            scratch: PerPopulation::from_fn(|_| vec![0.0; n]),
            particles: samples,
            streams: worker_streams(base, workers.max(1)),
            t: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.particles[N].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn workers(&self) -> usize {
        self.streams.len()
    }

    pub fn samples(&self, pop: Population) -> &[f64] {
        &self.particles[pop]
    }

    pub fn particles(&self) -> &PerPopulation<Vec<f64>> {
        &self.particles
    }

    fn chunk_len(&self) -> usize {
        self.len().div_ceil(self.workers())
    }
}

/// Independent streams: the master generator jumped `k + 1` times for worker `k`.
fn worker_streams(mut base: Xoshiro256PlusPlus, workers: usize) -> Vec<Xoshiro256PlusPlus> {
    (0..workers)
        .map(|_| {
            base.jump();
            base.clone()
        })
        .collect()
}

/// Support of the initial law: `[m - w/2, m + w/2]` cut at zero (the
/// density is renormalised, not piled up at the origin).
pub fn initial_support(mean: f64, width: f64) -> (f64, f64) {
    ((mean - 0.5 * width).max(0.0), mean + 0.5 * width)
}

/// Exact moments of the initial uniform laws.
pub fn initial_moments(means: [f64; 4], width: f64) -> MomentState {
    let mut st = MomentState::new(0.0, [0.0; 4], [0.0; 4]);
    for p in Population::ALL {
        let (lo, hi) = initial_support(means[p.index()], width);
        st.mean.0[p.index()] = 0.5 * (lo + hi);
        st.var.0[p.index()] = (hi - lo) * (hi - lo) / 12.0;
    }
    st
}

/// Uniform samples on [`initial_support`], using all available rayon
/// threads as workers.
pub fn init_ensemble(n_particles: usize, initial_means: [f64; 4], seed: u64) -> Result<ParticleEnsemble> {
    init_ensemble_with(
        n_particles,
        initial_means,
        default_init_width(),
        seed,
        rayon::current_num_threads(),
    )
}

pub fn init_ensemble_with(
    n_particles: usize,
    initial_means: [f64; 4],
    width: f64,
    seed: u64,
    workers: usize,
) -> Result<ParticleEnsemble> {
    if n_particles == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if let Some(p) = Population::ALL.into_iter().find(|p| !(initial_means[p.index()] > 0.0)) {
        return Err(Error::NonPositiveMean {
            population: p,
            value: initial_means[p.index()],
        });
    }
    if !(width > 0.0) {
        return Err(Error::NonPositive {
            what: "initial width",
            value: width,
        });
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let samples = PerPopulation::from_fn(|p| {
        let (lo, hi) = initial_support(initial_means[p.index()], width);
        (0..n_particles)
            .map(|_| lo + (hi - lo) * rng.random::<f64>())
            .collect()
    });
    // streams are derived from the post-initialisation state so they never
    // overlap the draws above
    let mut ens = ParticleEnsemble::from_samples(samples, 0, workers)?;
    ens.streams = worker_streams(rng, workers.max(1));
    Ok(ens)
}

/// Time step and kernel majorant for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPlan {
    pub dt: f64,
    pub kappa_bound: f64,
}

impl StepPlan {
    /// Majorant over the partner ensembles whose values enter a kernel (C and M).
    pub fn kappa_bound(ens: &ParticleEnsemble) -> f64 {
        let max = |p: Population| ens.particles[p].iter().copied().fold(0.0, f64::max);
        kappa(max(C).max(max(M)))
    }

    pub fn checked(ens: &ParticleEnsemble, dt: f64) -> Result<Self> {
        Self::validate(dt, Self::kappa_bound(ens))
    }

    /// Largest admissible step not exceeding `dt_max`.
    pub fn auto(ens: &ParticleEnsemble, dt_max: f64) -> Self {
        let kappa_bound = Self::kappa_bound(ens);
        StepPlan {
            dt: dt_max.min(1.0 / kappa_bound),
            kappa_bound,
        }
    }

    fn validate(dt: f64, kappa_bound: f64) -> Result<Self> {
        if !(dt >= 0.0) || dt * kappa_bound > 1.0 {
            return Err(Error::StepTooLarge { dt, kappa_bound });
        }
        Ok(StepPlan { dt, kappa_bound })
    }
}

/// Parameters plus a noise sampler that has been checked for positivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interactions {
    pub params: ParameterSet,
    sampler: NoiseSampler,
}

impl Interactions {
    pub fn new(params: ParameterSet, law: NoiseLaw) -> Result<Self> {
        Ok(Interactions {
            params,
            sampler: NoiseSampler::new(law, &params)?,
        })
    }
}

/// Per-step aggregates over the new particle values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    pub sum: [f64; 4],
    /// `sum of (x_new - x_old)^2`.
    pub sum_sq_increment: [f64; 4],
    pub max: [f64; 4],
}

impl StepStats {
    fn merge(mut self, o: &StepStats) -> Self {
        for k in 0..4 {
            self.sum[k] += o.sum[k];
            self.sum_sq_increment[k] += o.sum_sq_increment[k];
            self.max[k] = self.max[k].max(o.max[k]);
        }
        self
    }
}

struct Snapshot<'a> {
    n: &'a [f64],
    d: &'a [f64],
    m: &'a [f64],
    c: &'a [f64],
}

const BLOCK: usize = 64;
const TWO_POW_53: f64 = 9_007_199_254_740_992.0;

/// Uniform partner by multiply-shift; the bias is below `len / 2^64`.
#[inline(always)]
fn pick(v: &[f64], rng: &mut Xoshiro256PlusPlus) -> f64 {
    let k = ((rng.next_u64() as u128 * v.len() as u128) >> 64) as usize;
    v[k]
}

/// Bernoulli trial with success probability `prob`; on success returns the
/// raw draw, whose lowest bit is independent of the decision.
#[inline(always)]
fn trial(rng: &mut Xoshiro256PlusPlus, prob: f64) -> Option<u64> {
    let bits = rng.next_u64();
    (((bits >> 11) as f64) < prob * TWO_POW_53).then_some(bits)
}

#[inline(always)]
fn noise(law: NoiseLaw, variance: f64, bits: u64, rng: &mut Xoshiro256PlusPlus) -> f64 {
    match law {
        NoiseLaw::TwoPoint => {
            let s = variance.sqrt();
            if bits & 1 == 1 {
                s
            } else {
                -s
            }
        }
        NoiseLaw::UniformSymmetric => sample_noise(law, variance, rng),
    }
}

/// One Monte Carlo step of length `dt`; partners come from the pre-step state.
pub fn step(ens: &mut ParticleEnsemble, model: &Interactions, dt: f64) -> Result<StepStats> {
    StepPlan::checked(ens, dt)?;
    Ok(step_unchecked(ens, model, dt))
}

fn step_unchecked(ens: &mut ParticleEnsemble, model: &Interactions, dt: f64) -> StepStats {
    let chunk = ens.chunk_len();
    let p = &model.params;
    let law = model.sampler.law();
    let (b_n, b_d, b_m, b_c) = (p.beta[N], p.beta[D], p.beta[M], p.beta[C]);
    let (s_n, s_d, s_m, s_c) = (p.sigma2[N], p.sigma2[D], p.sigma2[M], p.sigma2[C]);
    let (g_m, g_c, nu) = (p.gamma_m, p.gamma_c, p.nu_control);

    let [old_n, old_d, old_m, old_c] = &ens.particles.0;
    let snap = Snapshot {
        n: old_n,
        d: old_d,
        m: old_m,
        c: old_c,
    };
    let [new_n, new_d, new_m, new_c] = &mut ens.scratch.0;
    let tasks: Vec<_> = ens
        .streams
        .iter_mut()
        .zip(new_n.chunks_mut(chunk))
        .zip(new_d.chunks_mut(chunk))
        .zip(new_m.chunks_mut(chunk))
        .zip(new_c.chunks_mut(chunk))
        .enumerate()
        .map(|(k, ((((rng, n), d), m), c))| (k * chunk, rng, n, d, m, c))
        .collect();

    let partial: Vec<StepStats> = tasks
        .into_par_iter()
        .map(|(offset, rng, out_n, out_d, out_m, out_c)| {
            let mut st = StepStats::default();
            let mut record = |k: usize, old: f64, new: f64| {
                st.sum[k] += new;
                st.sum_sq_increment[k] += (new - old) * (new - old);
                st.max[k] = st.max[k].max(new);
            };
            // Partners are gathered a block at a time so the random loads
            // overlap instead of stalling behind the acceptance branches.
            let mut partners = [[0.0f64; BLOCK]; 8];
            #[allow(clippy::needless_range_loop)]
            for start in (0..out_n.len()).step_by(BLOCK) {
                let len = BLOCK.min(out_n.len() - start);
                for k in 0..len {
                    partners[0][k] = pick(snap.c, rng);
                    partners[1][k] = pick(snap.m, rng);
                    partners[2][k] = pick(snap.d, rng);
                    partners[3][k] = pick(snap.m, rng);
                    partners[4][k] = pick(snap.c, rng);
                    partners[5][k] = pick(snap.n, rng);
                    partners[6][k] = pick(snap.d, rng);
                    partners[7][k] = pick(snap.m, rng);
                }
                for k in 0..len {
                    let i = start + k;
                    let j = offset + i;

                    // N: degeneration by C, then replenishment from D via M
                    let x0 = snap.n[j];
                    let mut x = x0;
                    let c = partners[0][k];
                    if let Some(bits) = trial(rng, dt * kappa(c)) {
                        let eta = noise(law, s_n * kernel::saturation(c), bits, rng);
                        x = kernel::loss(x, c, eta, b_n);
                    }
                    let z = partners[1][k];
                    if trial(rng, dt * kappa(z)).is_some() {
                        x = kernel::gain(x, partners[2][k], z, b_d);
                    }
                    out_n[i] = x;
                    record(0, x0, x);

                    // D: clearance by M, then gain from N via C
                    let x0 = snap.d[j];
                    let mut x = x0;
                    let z = partners[3][k];
                    if let Some(bits) = trial(rng, dt * kappa(z)) {
                        let eta = noise(law, s_d * kernel::saturation(z), bits, rng);
                        x = kernel::loss(x, z, eta, b_d);
                    }
                    let c = partners[4][k];
                    if trial(rng, dt * kappa(c)).is_some() {
                        x = kernel::gain(x, partners[5][k], c, b_n);
                    }
                    out_d[i] = x;
                    record(1, x0, x);

                    // M: decay, then recruitment by D
                    let x0 = snap.m[j];
                    let mut x = x0;
                    if let Some(bits) = trial(rng, dt) {
                        x = kernel::decay(x, noise(law, s_m, bits, rng), b_m);
                    }
                    if trial(rng, dt).is_some() {
                        x = kernel::recruitment(x, partners[6][k], g_m, 0.0);
                    }
                    out_m[i] = x;
                    record(2, x0, x);

                    // C: decay, then recruitment by M with therapy removal
                    let x0 = snap.c[j];
                    let mut x = x0;
                    if let Some(bits) = trial(rng, dt) {
                        x = kernel::decay(x, noise(law, s_c, bits, rng), b_c);
                    }
                    if trial(rng, dt).is_some() {
                        x = kernel::recruitment(x, partners[7][k], g_c, nu);
                    }
                    out_c[i] = x;
                    record(3, x0, x);
                }
            }
            st
        })
        .collect();

    std::mem::swap(&mut ens.particles, &mut ens.scratch);
    ens.t += dt;
    partial
        .iter()
        .fold(StepStats::default(), |acc, s| acc.merge(s))
}

/// Expected one-step change of the empirical first and raw second moments
/// of each population, given the current ensemble as the frozen snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentIncrements {
    pub mean: PerPopulation<f64>,
    pub second: PerPopulation<f64>,
}

pub fn expected_moment_increments(ens: &ParticleEnsemble, params: &ParameterSet, dt: f64) -> MomentIncrements {
    let avg = |v: &[f64], f: &dyn Fn(f64) -> f64| v.iter().map(|&x| f(x)).sum::<f64>() / v.len() as f64;
    let (xn, xd, xm, xc) = (
        ens.samples(N),
        ens.samples(D),
        ens.samples(M),
        ens.samples(C),
    );

    // Loss channel with kernel partners: returns (E[x1]/x, E[x1^2]/x^2).
    let loss = |partners: &[f64], beta: f64, sigma2: f64| {
        let first = 1.0 - dt * beta * avg(partners, &|c| c);
        let second = 1.0
            + dt * avg(partners, &|c| {
                let phi = kernel::saturation(c);
                kappa(c) * ((1.0 - beta * phi).powi(2) + sigma2 * phi - 1.0)
            });
        (first, second)
    };
    // Gain `beta Phi(z) y` accepted with probability dt kappa(z): (E[G], E[G^2]).
    let gain = |sources: &[f64], mediators: &[f64], beta: f64| {
        let g1 = dt * beta * avg(sources, &|y| y) * avg(mediators, &|z| z);
        let g2 = dt * beta * beta * avg(sources, &|y| y * y) * avg(mediators, &|z| z * z / kappa(z));
        (g1, g2)
    };

    let kinetic = |own: &[f64], (l1, l2): (f64, f64), (g1, g2): (f64, f64)| {
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for &x in own {
            let e1 = l1 * x;
            let e2 = l2 * x * x;
            d1 += e1 + g1 - x;
            d2 += e2 + 2.0 * e1 * g1 + g2 - x * x;
        }
        let n = own.len() as f64;
        (d1 / n, d2 / n)
    };

    let (dn1, dn2) = kinetic(
        xn,
        loss(xc, params.beta[N], params.sigma2[N]),
        gain(xd, xm, params.beta[D]),
    );
    let (dd1, dd2) = kinetic(
        xd,
        loss(xm, params.beta[D], params.sigma2[D]),
        gain(xn, xc, params.beta[N]),
    );

    // Unit-rate decay then recruitment `(1 - nu) x + gamma s`.
    let immune = |own: &[f64], beta: f64, sigma2: f64, sources: &[f64], gamma: f64, nu: f64| {
        let l1 = 1.0 - dt * beta;
        let l2 = 1.0 + dt * ((1.0 - beta).powi(2) + sigma2 - 1.0);
        let s1 = avg(sources, &|s| s);
        let s2 = avg(sources, &|s| s * s);
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for &x in own {
            let e1 = l1 * x;
            let e2 = l2 * x * x;
            let f1 = (1.0 - dt) * e1 + dt * ((1.0 - nu) * e1 + gamma * s1);
            let f2 = (1.0 - dt) * e2
                + dt * ((1.0 - nu).powi(2) * e2 + 2.0 * (1.0 - nu) * gamma * e1 * s1 + gamma * gamma * s2);
            d1 += f1 - x;
            d2 += f2 - x * x;
        }
        let n = own.len() as f64;
        (d1 / n, d2 / n)
    };
    let (dm1, dm2) = immune(xm, params.beta[M], params.sigma2[M], xd, params.gamma_m, 0.0);
    let (dc1, dc2) = immune(
        xc,
        params.beta[C],
        params.sigma2[C],
        xm,
        params.gamma_c,
        params.nu_control,
    );

    MomentIncrements {
        mean: PerPopulation([dn1, dd1, dm1, dc1]),
        second: PerPopulation([dn2, dd2, dm2, dc2]),
    }
}

/// Sample means and unbiased sample variances (variance 0 for one particle).
pub fn estimate_moments(ens: &ParticleEnsemble) -> MomentState {
    let mut st = MomentState::new(ens.t, [0.0; 4], [0.0; 4]);
    for p in Population::ALL {
        let v = ens.samples(p);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
        st.mean[p] = mean;
        st.var[p] = if v.len() > 1 { ss / (n - 1.0) } else { 0.0 };
    }
    st
}

/// Options of a scaled run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub epsilon: f64,
    /// Report times on the mean-field clock, increasing, last one is the horizon.
    pub report_times: Vec<f64>,
    /// Upper bound for the internal step.
    pub dt_max: f64,
    pub noise: NoiseLaw,
}

impl RunOptions {
    /// Reports every `interval` up to `horizon`.
    pub fn uniform(epsilon: f64, horizon: f64, interval: f64) -> Self {
        let k = (horizon / interval - 1e-9).ceil().max(0.0) as usize;
        let report_times = (1..=k).map(|i| (i as f64 * interval).min(horizon)).collect();
        RunOptions {
            epsilon,
            report_times,
            dt_max: 0.5,
            noise: NoiseLaw::TwoPoint,
        }
    }
}

/// Moments on the mean-field clock with standard errors of the means.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trajectory: Vec<MomentState>,
    /// Standard error of each empirical mean.
    pub mean_se: Vec<PerPopulation<f64>>,
    /// Standard error of the empirical `m_N + m_D`.
    pub exchange_se: Vec<f64>,
    pub steps: usize,
}

type Cov = [[f64; 4]; 4];

/// Linear-noise propagation of the covariance of the empirical means:
/// `S <- (I + dt J) S (I + dt J)^T + diag(q)` with `q_J` the per-step
/// squared increments divided by `n^2`.
fn propagate(cov: &Cov, jac: &Cov, dt: f64, q: [f64; 4]) -> Cov {
    let mut a = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            a[i][j] = dt * jac[i][j] + if i == j { 1.0 } else { 0.0 };
        }
    }
    let mut tmp = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            tmp[i][j] = (0..4).map(|k| a[i][k] * cov[k][j]).sum();
        }
    }
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| tmp[i][k] * a[j][k]).sum::<f64>() + if i == j { q[i] } else { 0.0 };
        }
    }
    out
}

fn record(ens: &ParticleEnsemble, cov: &Cov, epsilon: f64, out: &mut RunOutput) {
    let mut st = estimate_moments(ens);
    st.t = ens.t * epsilon;
    out.trajectory.push(st);
    out.mean_se
        .push(PerPopulation::from_fn(|p| cov[p.index()][p.index()].max(0.0).sqrt()));
    out.exchange_se
        .push((cov[0][0] + cov[1][1] + 2.0 * cov[0][1]).max(0.0).sqrt());
}

/// Simulate the `epsilon`-scaled dynamics. Internal time runs to
/// `t / epsilon` for each report time `t`; `observer` sees the ensemble at
/// time 0 and at every report time (mean-field clock).
pub fn run(
    ens: &mut ParticleEnsemble,
    params: &ParameterSet,
    opts: &RunOptions,
    mut observer: impl FnMut(f64, &ParticleEnsemble),
) -> Result<RunOutput> {
    let scaled = params.scaled(opts.epsilon)?;
    let model = Interactions::new(scaled, opts.noise)?;
    if !(opts.dt_max > 0.0) {
        return Err(Error::NonPositive {
            what: "dt_max",
            value: opts.dt_max,
        });
    }
    let n = ens.len() as f64;
    let eps = opts.epsilon;

    let init = estimate_moments(ens);
    let mut cov = [[0.0; 4]; 4];
    for p in Population::ALL {
        cov[p.index()][p.index()] = init.var[p] / n;
    }
    let mut means = init.mean;
    let mut kappa_bound = StepPlan::kappa_bound(ens);
    let mut out = RunOutput {
        trajectory: Vec::new(),
        mean_se: Vec::new(),
        exchange_se: Vec::new(),
        steps: 0,
    };
    record(ens, &cov, eps, &mut out);
    observer(ens.t * eps, ens);

    for &t_report in &opts.report_times {
        let target = t_report / eps;
        while target - ens.t > 1e-9 * target.max(1.0) {
            let dt = opts.dt_max.min(1.0 / kappa_bound).min(target - ens.t);
            let jac = jacobian(&means, &scaled);
            let stats = step_unchecked(ens, &model, dt);
            out.steps += 1;
            let q = std::array::from_fn(|k| stats.sum_sq_increment[k] / (n * n));
            cov = propagate(&cov, &jac, dt, q);
            means = PerPopulation(std::array::from_fn(|k| stats.sum[k] / n));
            kappa_bound = kappa(stats.max[C.index()].max(stats.max[M.index()]));
        }
        ens.t = ens.t.max(target);
        record(ens, &cov, eps, &mut out);
        observer(t_report, ens);
    }
    Ok(out)
}

/// Density histogram on `[0, L]` normalised by the total sample count, so
/// its integral is `1 - overflow / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub values: Vec<f64>,
    /// Samples beyond `L`.
    pub overflow: usize,
    pub total: usize,
}

impl Histogram {
    pub fn from_samples(samples: &[f64], length: f64, n_bins: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if !(length > 0.0) || n_bins == 0 {
            return Err(Error::InvalidArgument(format!(
                "histogram needs L > 0 and at least one bin (L = {length}, bins = {n_bins})"
            )));
        }
        let width = length / n_bins as f64;
        let mut counts = vec![0usize; n_bins];
        let mut overflow = 0;
        for &x in samples {
            if x > length {
                overflow += 1;
            } else {
                let k = ((x / width) as usize).min(n_bins - 1);
                counts[k] += 1;
            }
        }
        let norm = 1.0 / (samples.len() as f64 * width);
        Ok(Histogram {
            edges: (0..=n_bins).map(|k| k as f64 * width).collect(),
            values: counts.iter().map(|&c| c as f64 * norm).collect(),
            overflow,
            total: samples.len(),
        })
    }

    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.bin_width()
    }
}

pub fn to_histogram(ens: &ParticleEnsemble, length: f64, n_bins: usize) -> Result<PerPopulation<Histogram>> {
    let [n, d, m, c] = Population::ALL.map(|p| Histogram::from_samples(ens.samples(p), length, n_bins));
    Ok(PerPopulation([n?, d?, m?, c?]))
}
