//! Exhaustive enumeration of one Monte Carlo step on tiny ensembles, built
//! only from the public microscopic rules.

use mdkinetic::dsmc::{expected_moment_increments, kappa, ParticleEnsemble};
use mdkinetic::micro::{
    clearance_update, damage_gain_update, decay_update, degeneration_update, recruitment_update, replenish_update,
    saturation,
};
use mdkinetic::{ParameterSet, PerPopulation, Population};

/// Weighted outcomes of a random post-interaction value.
type Law = Vec<(f64, f64)>;

fn moments(law: &Law) -> (f64, f64) {
    law.iter()
        .fold((0.0, 0.0), |(a, b), &(w, x)| (a + w * x, b + w * x * x))
}

fn uniform(values: &[f64]) -> impl Iterator<Item = (f64, f64)> + '_ {
    let w = 1.0 / values.len() as f64;
    values.iter().map(move |&v| (w, v))
}

/// Two-point noise: each sign with probability 1/2.
fn signs(variance: f64) -> [(f64, f64); 2] {
    let s = variance.sqrt();
    [(0.5, s), (0.5, -s)]
}

/// Loss channel with a kernel partner: accept with probability `dt kappa(c)`.
fn kernel_loss(
    x: f64,
    partners: &[f64],
    dt: f64,
    sigma2: f64,
    rule: impl Fn(f64, f64, f64) -> f64,
) -> Law {
    let mut out = Vec::new();
    for (wp, c) in uniform(partners) {
        let acc = dt * kappa(c);
        out.push((wp * (1.0 - acc), x));
        for (ws, eta) in signs(sigma2 * saturation(c).unwrap()) {
            out.push((wp * acc * ws, rule(x, c, eta)));
        }
    }
    out
}

/// Gain channel with source `y` and mediator `z`, accepted with `dt kappa(z)`.
fn kernel_gain(
    law: &Law,
    sources: &[f64],
    mediators: &[f64],
    dt: f64,
    rule: impl Fn(f64, f64, f64) -> f64,
) -> Law {
    let mut out = Vec::new();
    for &(w0, x) in law {
        for (wz, z) in uniform(mediators) {
            let acc = dt * kappa(z);
            out.push((w0 * wz * (1.0 - acc), x));
            for (wy, y) in uniform(sources) {
                out.push((w0 * wz * acc * wy, rule(x, y, z)));
            }
        }
    }
    out
}

fn immune(x: f64, sources: &[f64], dt: f64, beta: f64, sigma2: f64, gamma: f64, nu: f64) -> Law {
    let mut decayed = vec![(1.0 - dt, x)];
    for (ws, eta) in signs(sigma2) {
        decayed.push((dt * ws, decay_update(x, eta, beta).unwrap().updated_value));
    }
    let mut out = Vec::new();
    for (w0, v) in decayed {
        out.push((w0 * (1.0 - dt), v));
        for (wy, s) in uniform(sources) {
            out.push((w0 * dt * wy, recruitment_update(v, s, gamma, nu).unwrap().updated_value));
        }
    }
    out
}

/// Expected change of the empirical mean and raw second moment.
pub fn brute_force(s: &PerPopulation<Vec<f64>>, p: &ParameterSet, dt: f64) -> PerPopulation<(f64, f64)> {
    use Population::*;
    let mut out = PerPopulation([(0.0, 0.0); 4]);
    for pop in Population::ALL {
        let own = &s[pop];
        let n = own.len() as f64;
        for &x in own {
            let law = match pop {
                N => {
                    let lost = kernel_loss(x, &s[C], dt, p.sigma2[N], |x, c, eta| {
                        degeneration_update(x, c, eta, p.beta[N]).unwrap().updated_value
                    });
                    kernel_gain(&lost, &s[D], &s[M], dt, |x, y, z| {
                        replenish_update(x, y, z, p.beta[D]).unwrap().updated_value
                    })
                }
                D => {
                    let lost = kernel_loss(x, &s[M], dt, p.sigma2[D], |x, z, eta| {
                        clearance_update(x, z, eta, p.beta[D]).unwrap().updated_value
                    });
                    kernel_gain(&lost, &s[N], &s[C], dt, |x, y, c| {
                        damage_gain_update(x, y, c, p.beta[N]).unwrap().updated_value
                    })
                }
                M => immune(x, &s[D], dt, p.beta[M], p.sigma2[M], p.gamma_m, 0.0),
                C => immune(x, &s[M], dt, p.beta[C], p.sigma2[C], p.gamma_c, p.nu_control),
            };
            let total: f64 = law.iter().map(|(w, _)| w).sum();
            assert!((total - 1.0).abs() < 1e-13, "{pop}: weights sum to {total}");
            let (m1, m2) = moments(&law);
            out.0[pop.index()].0 += (m1 - x) / n;
            out.0[pop.index()].1 += (m2 - x * x) / n;
        }
    }
    out
}

/// Largest gap between the analytic increments and the enumeration, over
/// populations and both moments.
pub fn max_deviation(samples: &PerPopulation<Vec<f64>>, params: &ParameterSet, dt: f64) -> f64 {
    let ens = ParticleEnsemble::from_samples(samples.clone(), 1, 1).unwrap();
    let analytic = expected_moment_increments(&ens, params, dt);
    let exact = brute_force(samples, params, dt);
    Population::ALL
        .into_iter()
        .map(|pop| {
            let (m1, m2) = exact[pop];
            (analytic.mean[pop] - m1).abs().max((analytic.second[pop] - m2).abs())
        })
        .fold(0.0, f64::max)
}

fn spread(n: usize, lo: f64, hi: f64, phase: f64) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * (((i as f64 + phase) * 0.618_033_988_75) % 1.0))
        .collect()
}

/// Ensembles of at most ten particles per population, with step sizes.
pub fn cases() -> Vec<(&'static str, PerPopulation<Vec<f64>>, ParameterSet, f64)> {
    let mut strong = ParameterSet::table1().with_control(0.1);
    strong.sigma2 = PerPopulation([0.3, 0.3, 0.3, 0.3]);
    let mut quiet = ParameterSet::table1();
    quiet.sigma2 = PerPopulation::splat(0.0);
    vec![
        (
            "single particles",
            PerPopulation([vec![9.0], vec![1.0], vec![0.6], vec![0.6]]),
            ParameterSet::table1(),
            0.3,
        ),
        (
            "ten particles",
            PerPopulation([
                spread(10, 0.0, 10.0, 0.1),
                spread(10, 0.0, 5.0, 0.3),
                spread(10, 0.0, 2.0, 0.7),
                spread(10, 0.0, 1.5, 0.9),
            ]),
            ParameterSet::table1(),
            1.0 / 3.0,
        ),
        (
            "therapy, strong noise",
            PerPopulation([
                spread(7, 1.0, 9.0, 0.2),
                spread(7, 0.1, 4.0, 0.5),
                spread(7, 0.0, 1.0, 0.4),
                spread(7, 0.2, 2.0, 0.8),
            ]),
            strong,
            0.25,
        ),
        (
            "no noise, zero states",
            PerPopulation([vec![0.0, 3.0, 5.0], vec![0.0, 0.0, 2.0], vec![0.0, 0.5, 1.0], vec![0.0, 0.0, 0.0]]),
            quiet,
            0.5,
        ),
    ]
}
