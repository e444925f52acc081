//! Experiment drivers. Each `*_outcome` function computes without touching
//! the file system; the matching `run_*` writes its CSVs and summarises.

use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{ensure, Context, Result};
use mdkinetic::dsmc::{self, initial_moments, init_ensemble_with, RunOptions, RunOutput};
use mdkinetic::fp::{self, EvolveOptions, Grid, GridDensity};
use mdkinetic::metrics::{decay_envelope, quasi_equilibrium, DecayEnvelope, Exponent, GridEnergy};
use mdkinetic::moments::{equilibrium, integrate, integrate_at, EquilibriumSummary, MeanFieldSystem};
use mdkinetic::{MomentState, ParameterSet, PerPopulation, Population};

use crate::config::{Experiment, RunConfig};
use crate::output::{num, nums, ExperimentReport, OutputDir};

/// Times at which the mean-field densities are written out in full.
pub const SNAPSHOT_TIMES: [f64; 4] = [0.0, 1.0, 8.0, 75.0];

fn moment_header() -> Vec<&'static str> {
    vec!["t", "m_N", "m_D", "m_M", "m_C", "V_N", "V_D", "V_M", "V_C"]
}

fn moment_row(s: &MomentState) -> Vec<String> {
    let mut row = vec![num(s.t)];
    row.extend(nums(s.mean.0));
    row.extend(nums(s.var.0));
    row
}

/// Increasing schedule `interval, 2 interval, ...` ending exactly at `horizon`.
pub fn schedule(horizon: f64, interval: f64) -> Vec<f64> {
    let k = (horizon / interval - 1e-9).ceil().max(0.0) as usize;
    (1..=k).map(|i| (i as f64 * interval).min(horizon)).collect()
}

#[derive(Debug, Clone)]
pub struct MomentsOutcome {
    /// Every integrator step, starting with the initial state.
    pub trajectory: Vec<MomentState>,
    pub equilibrium: EquilibriumSummary,
    pub max_exchange_drift: f64,
    pub elapsed: Duration,
}

pub fn moments_outcome(cfg: &RunConfig) -> Result<MomentsOutcome> {
    let start = Instant::now();
    let means = cfg.means_for(Experiment::Moments);
    let init = MomentState::new(0.0, means, [cfg.initial_variance; 4]);
    let system = MeanFieldSystem::new(cfg.params, init);
    let trajectory = integrate(&system, cfg.horizon_for(Experiment::Moments), cfg.ode_dt)?;
    let m0 = init.exchange_mass();
    let max_exchange_drift = trajectory
        .iter()
        .map(|s| (s.exchange_mass() - m0).abs())
        .fold(0.0, f64::max);
    Ok(MomentsOutcome {
        equilibrium: equilibrium(&cfg.params, m0)?,
        trajectory,
        max_exchange_drift,
        elapsed: start.elapsed(),
    })
}

pub fn run_moments(cfg: &RunConfig, dir: &Path) -> Result<ExperimentReport> {
    let o = moments_outcome(cfg)?;
    let mut out = OutputDir::create(dir)?;
    let every = (cfg.interval_for(Experiment::Moments) / cfg.ode_dt).round().max(1.0) as usize;
    let last = o.trajectory.len() - 1;
    let sampled: Vec<&MomentState> = o
        .trajectory
        .iter()
        .enumerate()
        .filter(|(k, _)| k % every == 0 || *k == last)
        .map(|(_, s)| s)
        .collect();
    out.write_csv("moments.csv", &moment_header(), sampled.iter().map(|s| moment_row(s)))?;
    let phase = |s: &MomentState, a: usize, b: usize, var: bool| {
        let v = if var { s.var } else { s.mean };
        nums([s.t, v.0[a], v.0[b]])
    };
    for (name, hdr, a, b, var) in [
        ("phase_mN_mD.csv", ["t", "m_N", "m_D"], 0, 1, false),
        ("phase_mM_mC.csv", ["t", "m_M", "m_C"], 2, 3, false),
        ("phase_VN_VD.csv", ["t", "V_N", "V_D"], 0, 1, true),
        ("phase_VM_VC.csv", ["t", "V_M", "V_C"], 2, 3, true),
    ] {
        out.write_csv(name, &hdr, sampled.iter().map(|s| phase(s, a, b, var)))?;
    }
    let eq = &o.equilibrium;
    out.write_csv(
        "equilibrium.csv",
        &["population", "mean", "variance"],
        Population::ALL.map(|p| {
            vec![
                p.name().to_owned(),
                num(eq.mean[p]),
                eq.var[p].map_or_else(|| "inf".to_owned(), num),
            ]
        }),
    )?;

    let mut report = ExperimentReport::new("moments");
    let end = o.trajectory.last().expect("initial state is always recorded");
    for p in Population::ALL {
        report.push(format!("terminal_m_{p}"), end.mean[p]);
    }
    for p in Population::ALL {
        report.push(format!("terminal_V_{p}"), end.var[p]);
    }
    for p in Population::ALL {
        report.push(format!("equilibrium_m_{p}"), eq.mean[p]);
    }
    for p in Population::ALL {
        if let Some(v) = eq.var[p] {
            report.push(format!("equilibrium_V_{p}"), v);
        }
    }
    report.push("max_exchange_drift", o.max_exchange_drift);
    report.push("seconds", o.elapsed.as_secs_f64());
    report.files = out.into_files();
    Ok(report)
}

/// One DSMC run next to the moment equations started from the same law.
#[derive(Debug, Clone)]
pub struct ConsistencyRun {
    pub epsilon: f64,
    pub dsmc: RunOutput,
    pub ode: Vec<MomentState>,
    /// Largest `|m_dsmc - m_ode| / se` over report times and populations.
    pub max_mean_z: f64,
    /// Largest `|m_N + m_D - m0| / se` over report times.
    pub max_exchange_z: f64,
    /// `|V_dsmc / V_ode - 1|` at the final report time.
    pub terminal_var_dev: PerPopulation<f64>,
    pub elapsed: Duration,
}

impl ConsistencyRun {
    pub fn max_terminal_var_dev(&self) -> f64 {
        self.terminal_var_dev.0.iter().copied().fold(0.0, f64::max)
    }
}

/// Seed of the `k`-th run derived from the master seed.
pub fn split_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k as u64 + 1))
}

pub fn consistency_run(cfg: &RunConfig, epsilon: f64, seed: u64) -> Result<ConsistencyRun> {
    let start = Instant::now();
    let means = cfg.means_for(Experiment::Consistency);
    let width = cfg.initial_width();
    let workers = cfg.workers.unwrap_or_else(rayon_threads);
    let mut ens = init_ensemble_with(cfg.n_particles, means, width, seed, workers)?;
    let times = schedule(
        cfg.horizon_for(Experiment::Consistency),
        cfg.interval_for(Experiment::Consistency),
    );
    let opts = RunOptions {
        report_times: times.clone(),
        dt_max: cfg.dt_max,
        ..RunOptions::uniform(epsilon, 0.0, 1.0)
    };
    let out = dsmc::run(&mut ens, &cfg.params, &opts, |_, _| {})?;
    let init = initial_moments(means, width);
    let ode = integrate_at(&MeanFieldSystem::new(cfg.params, init), &times, cfg.ode_dt)?;
    ensure!(ode.len() == out.trajectory.len(), "report schedules diverged");

    let m0 = init.exchange_mass();
    let mut max_mean_z = 0.0f64;
    let mut max_exchange_z = 0.0f64;
    for ((d, o), (se, xse)) in out
        .trajectory
        .iter()
        .zip(&ode)
        .zip(out.mean_se.iter().zip(&out.exchange_se))
    {
        for p in Population::ALL {
            max_mean_z = max_mean_z.max(z_score(d.mean[p] - o.mean[p], se[p]));
        }
        max_exchange_z = max_exchange_z.max(z_score(d.exchange_mass() - m0, *xse));
    }
    let (d, o) = (out.trajectory.last().unwrap(), ode.last().unwrap());
    let terminal_var_dev = PerPopulation::from_fn(|p| (d.var[p] / o.var[p] - 1.0).abs());
    Ok(ConsistencyRun {
        epsilon,
        dsmc: out,
        ode,
        max_mean_z,
        max_exchange_z,
        terminal_var_dev,
        elapsed: start.elapsed(),
    })
}

fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff.abs() / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn rayon_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn consistency_outcome(cfg: &RunConfig) -> Result<Vec<ConsistencyRun>> {
    cfg.epsilons
        .iter()
        .enumerate()
        .map(|(k, &eps)| {
            consistency_run(cfg, eps, split_seed(cfg.seed, k)).with_context(|| format!("DSMC run at epsilon = {eps}"))
        })
        .collect()
}

pub fn run_consistency(cfg: &RunConfig, dir: &Path) -> Result<ExperimentReport> {
    let runs = consistency_outcome(cfg)?;
    let mut out = OutputDir::create(dir)?;
    let mut header = vec!["t"];
    header.extend(["m_N", "m_D", "m_M", "m_C", "V_N", "V_D", "V_M", "V_C"]);
    header.extend(["se_N", "se_D", "se_M", "se_C", "se_exchange"]);
    header.extend(["ode_m_N", "ode_m_D", "ode_m_M", "ode_m_C", "ode_V_N", "ode_V_D", "ode_V_M", "ode_V_C"]);
    for r in &runs {
        let rows = r
            .dsmc
            .trajectory
            .iter()
            .zip(&r.dsmc.mean_se)
            .zip(&r.dsmc.exchange_se)
            .zip(&r.ode)
            .map(|(((d, se), xse), o)| {
                let mut row = moment_row(d);
                row.extend(nums(se.0));
                row.push(num(*xse));
                row.extend(nums(o.mean.0));
                row.extend(nums(o.var.0));
                row
            });
        out.write_csv(&format!("consistency_eps_{}.csv", r.epsilon), &header, rows)?;
    }
    out.write_csv(
        "consistency_summary.csv",
        &[
            "epsilon",
            "max_mean_z",
            "max_exchange_z",
            "var_dev_N",
            "var_dev_D",
            "var_dev_M",
            "var_dev_C",
            "steps",
            "seconds",
        ],
        runs.iter().map(|r| {
            let mut row = nums([r.epsilon, r.max_mean_z, r.max_exchange_z]);
            row.extend(nums(r.terminal_var_dev.0));
            row.push(r.dsmc.steps.to_string());
            row.push(num(r.elapsed.as_secs_f64()));
            row
        }),
    )?;
    let mut report = ExperimentReport::new("consistency");
    for r in &runs {
        report.push(format!("max_mean_z[eps={}]", r.epsilon), r.max_mean_z);
        report.push(format!("max_terminal_var_dev[eps={}]", r.epsilon), r.max_terminal_var_dev());
    }
    report.files = out.into_files();
    Ok(report)
}

/// Energy distance to the current quasi-equilibrium and its envelope.
#[derive(Debug, Clone)]
pub struct EnergyTrack {
    pub p: f64,
    pub population: Population,
    pub energy: Vec<f64>,
    pub envelope: DecayEnvelope,
}

impl EnergyTrack {
    /// Final over initial energy.
    pub fn decay_ratio(&self) -> f64 {
        self.energy.last().unwrap() / self.energy[0]
    }

    /// `max_t (E - envelope)`, positive only when the bound is violated.
    pub fn max_violation(&self) -> f64 {
        self.energy
            .iter()
            .zip(&self.envelope.gronwall)
            .map(|(e, g)| e - g)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct MeanfieldOutcome {
    pub grid: Grid,
    /// Grid moments at every report time, starting at 0.
    pub moments: Vec<MomentState>,
    /// `L1(f_J, f_J^inf)` at every report time.
    pub l1_to_equilibrium: Vec<PerPopulation<f64>>,
    pub snapshots: Vec<(f64, PerPopulation<GridDensity>)>,
    pub equilibrium_densities: PerPopulation<GridDensity>,
    pub energies: Vec<EnergyTrack>,
    pub min_value: f64,
    pub max_mass_error: f64,
    pub steps: usize,
    pub elapsed: Duration,
}

impl MeanfieldOutcome {
    pub fn terminal_l1(&self) -> PerPopulation<f64> {
        *self.l1_to_equilibrium.last().unwrap()
    }
}

/// Inverse-Gamma equilibrium densities sampled at the cell centres.
pub fn equilibrium_densities(grid: Grid, params: &ParameterSet, m0: f64) -> Result<PerPopulation<GridDensity>> {
    let eq = equilibrium(params, m0)?;
    let mut out = Vec::with_capacity(4);
    for p in Population::ALL {
        let ig = quasi_equilibrium(p, &eq.mean, params)?;
        out.push(GridDensity::from_pdf(grid, |x| ig.pdf(x)));
    }
    Ok(PerPopulation(out.try_into().expect("four populations")))
}

pub fn meanfield_outcome(cfg: &RunConfig) -> Result<MeanfieldOutcome> {
    let start = Instant::now();
    let grid = Grid::new(cfg.length, cfg.n_x)?;
    let means = cfg.means_for(Experiment::Meanfield);
    let width = cfg.initial_width();
    let mut initial = Vec::with_capacity(4);
    for p in Population::ALL {
        initial.push(GridDensity::uniform_box(grid, means[p.index()], width)?);
    }
    let initial = PerPopulation::<GridDensity>(initial.try_into().expect("four populations"));
    let m0 = initial[Population::N].mean() + initial[Population::D].mean();
    let f_inf = equilibrium_densities(grid, &cfg.params, m0)?;

    let horizon = cfg.horizon_for(Experiment::Meanfield);
    let mut times = schedule(horizon, cfg.interval_for(Experiment::Meanfield));
    times.extend(SNAPSHOT_TIMES.iter().copied().filter(|&t| t > 0.0 && t <= horizon));
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let mut report_times = vec![0.0];
    report_times.extend(times);
    let opts = EvolveOptions {
        report_times,
        dt_max: 0.5 * grid.dx(),
    };

    let exps: Vec<Exponent> = cfg
        .p_values
        .iter()
        .map(|&p| Exponent::new(p))
        .collect::<Result<_, _>>()?;
    let kernels: Vec<GridEnergy> = exps.iter().map(|&e| GridEnergy::new(e, grid.dx(), grid.cells)).collect();
    let mut energy: Vec<[Vec<f64>; 4]> = vec![Default::default(); exps.len()];
    let mut l1 = Vec::new();
    let mut snapshots = Vec::new();
    let mut min_value = f64::INFINITY;
    let mut max_mass_error = 0.0f64;
    let mut failure: Option<anyhow::Error> = None;

    let evolved = fp::evolve_system(initial, &cfg.params, &opts, |t, f| {
        if failure.is_some() {
            return;
        }
        let mut record = || -> Result<()> {
            let mean = f.map(|_, d| d.mean());
            let mut dist = PerPopulation([0.0; 4]);
            for p in Population::ALL {
                let d = &f[p];
                dist.0[p.index()] = d.l1_distance(&f_inf[p])?;
                min_value = min_value.min(d.min());
                max_mass_error = max_mass_error.max((d.mass() - 1.0).abs());
                let ig = quasi_equilibrium(p, &mean, &cfg.params)?;
                let q = GridDensity::from_pdf(grid, |x| ig.pdf(x)).normalized();
                for (k, kernel) in kernels.iter().enumerate() {
                    energy[k][p.index()].push(kernel.distance(&d.values, &q.values)?);
                }
            }
            l1.push(dist);
            if SNAPSHOT_TIMES.iter().any(|&s| (s - t).abs() < 1e-9) {
                snapshots.push((t, f.clone()));
            }
            Ok(())
        };
        if let Err(e) = record() {
            failure = Some(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }

    let mut energies = Vec::new();
    for (k, e) in exps.iter().enumerate() {
        for p in Population::ALL {
            let series = std::mem::take(&mut energy[k][p.index()]);
            let envelope = decay_envelope(p, *e, &evolved.moments, &cfg.params, series[0])?;
            energies.push(EnergyTrack {
                p: e.get(),
                population: p,
                energy: series,
                envelope,
            });
        }
    }
    Ok(MeanfieldOutcome {
        grid,
        moments: evolved.moments,
        l1_to_equilibrium: l1,
        snapshots,
        equilibrium_densities: f_inf,
        energies,
        min_value,
        max_mass_error,
        steps: evolved.steps,
        elapsed: start.elapsed(),
    })
}

pub fn run_meanfield(cfg: &RunConfig, dir: &Path) -> Result<ExperimentReport> {
    let o = meanfield_outcome(cfg)?;
    let mut out = OutputDir::create(dir)?;
    let mut header = moment_header();
    header.extend(["l1_N", "l1_D", "l1_M", "l1_C"]);
    out.write_csv(
        "meanfield_moments.csv",
        &header,
        o.moments.iter().zip(&o.l1_to_equilibrium).map(|(s, d)| {
            let mut row = moment_row(s);
            row.extend(nums(d.0));
            row
        }),
    )?;
    let density_header = ["x", "f_N", "f_D", "f_M", "f_C"];
    let density_rows = |f: &PerPopulation<GridDensity>| {
        let g = o.grid;
        (0..g.cells)
            .map(|i| {
                let mut row = vec![num(g.center(i))];
                row.extend(Population::ALL.map(|p| num(f[p].values[i])));
                row
            })
            .collect::<Vec<_>>()
    };
    for (t, f) in &o.snapshots {
        out.write_csv(&format!("densities_t{t}.csv"), &density_header, density_rows(f))?;
    }
    out.write_csv(
        "equilibrium_densities.csv",
        &density_header,
        density_rows(&o.equilibrium_densities),
    )?;
    let mut rows = Vec::new();
    for track in &o.energies {
        for (k, s) in o.moments.iter().enumerate() {
            rows.push(vec![
                num(s.t),
                track.population.name().to_owned(),
                num(track.p),
                num(track.energy[k]),
                num(track.envelope.gronwall[k]),
                num(track.envelope.fig5[k]),
            ]);
        }
    }
    out.write_csv(
        "energy.csv",
        &["t", "population", "p", "energy", "gronwall_envelope", "fig5_envelope"],
        rows,
    )?;

    let mut report = ExperimentReport::new("meanfield");
    let terminal = o.terminal_l1();
    for p in Population::ALL {
        report.push(format!("terminal_l1_{p}"), terminal[p]);
    }
    report.push(
        "max_decay_ratio",
        o.energies.iter().map(EnergyTrack::decay_ratio).fold(0.0, f64::max),
    );
    report.push(
        "max_envelope_violation",
        o.energies
            .iter()
            .map(EnergyTrack::max_violation)
            .fold(f64::NEG_INFINITY, f64::max),
    );
    report.push("min_value", o.min_value);
    report.push("max_mass_error", o.max_mass_error);
    report.push("steps", o.steps as f64);
    report.push("seconds", o.elapsed.as_secs_f64());
    report.files = out.into_files();
    Ok(report)
}

/// Moments and mean-field runs with the therapy control switched on,
/// preceded by the controlled and uncontrolled equilibria.
pub fn run_therapy(cfg: &RunConfig, nu: f64, dir: &Path) -> Result<Vec<ExperimentReport>> {
    let mut controlled = cfg.clone();
    controlled.params.nu_control = nu;
    controlled.validate()?;
    let m0 = {
        let m = cfg.means_for(Experiment::Moments);
        m[0] + m[1]
    };
    let free = equilibrium(&cfg.params, m0)?;
    let ctrl = equilibrium(&controlled.params, m0)?;
    let mut out = OutputDir::create(dir)?;
    out.write_csv(
        "therapy_equilibria.csv",
        &["population", "mean", "variance", "controlled_mean", "controlled_variance"],
        Population::ALL.map(|p| {
            let v = |x: Option<f64>| x.map_or_else(|| "inf".to_owned(), num);
            vec![
                p.name().to_owned(),
                num(free.mean[p]),
                v(free.var[p]),
                num(ctrl.mean[p]),
                v(ctrl.var[p]),
            ]
        }),
    )?;
    let mut summary = ExperimentReport::new("therapy");
    summary.push("nu_control", nu);
    for p in Population::ALL {
        summary.push(format!("controlled_m_{p}"), ctrl.mean[p]);
    }
    for p in Population::ALL {
        if let (Some(a), Some(b)) = (ctrl.var[p], free.var[p]) {
            summary.push(format!("controlled_V_{p}"), a);
            summary.push(format!("uncontrolled_V_{p}"), b);
        }
    }
    summary.files = out.into_files();
    Ok(vec![
        summary,
        run_moments(&controlled, &dir.join("moments"))?,
        run_meanfield(&controlled, &dir.join("meanfield"))?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_ends_at_horizon() {
        assert_eq!(schedule(1.0, 0.25), vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(schedule(1.0, 0.3).last(), Some(&1.0));
        assert!(schedule(0.0, 0.5).is_empty());
    }

    #[test]
    fn split_seeds_differ() {
        assert_ne!(split_seed(1, 0), split_seed(1, 1));
        assert_eq!(split_seed(1, 3), split_seed(1, 3));
    }

    #[test]
    fn moments_horizon_zero_is_initial_state() {
        let cfg = RunConfig {
            horizon: Some(0.0),
            ..RunConfig::default()
        };
        let o = moments_outcome(&cfg).unwrap();
        assert_eq!(o.trajectory.len(), 1);
        assert_eq!(o.trajectory[0].mean.0, [9.0, 1.0, 0.1, 0.5]);
    }

    #[test]
    fn small_meanfield_run() {
        let cfg = RunConfig {
            n_x: 200,
            horizon: Some(1.0),
            report_interval: Some(0.5),
            p_values: vec![0.75],
            ..RunConfig::default()
        };
        let o = meanfield_outcome(&cfg).unwrap();
        assert_eq!(o.moments.len(), 3);
        assert_eq!(o.snapshots.len(), 2);
        assert_eq!(o.energies.len(), 4);
        assert!(o.min_value >= 0.0);
        assert!(o.max_mass_error < 1e-12);
    }

    #[test]
    fn small_consistency_run() {
        let cfg = RunConfig {
            n_particles: 5000,
            horizon: Some(1.0),
            report_interval: Some(0.5),
            epsilons: vec![0.1],
            workers: Some(2),
            ..RunConfig::default()
        };
        let runs = consistency_outcome(&cfg).unwrap();
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].dsmc.trajectory.len(), 3);
        assert!(runs[0].max_mean_z.is_finite());
    }
}
