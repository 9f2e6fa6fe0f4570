//! Experiment drivers. Replicas run on a worker pool and are merged in
//! replica-index order, so outputs do not depend on the worker count.

use std::time::Instant;

use rayon::prelude::*;
use trem_core::cloud::{census_check, census_expectations};
use trem_core::params::beta_c;
use trem_core::rng::{hash2, RngStream};
use trem_core::spectral::{eigensolve, eigenvalue_bound_check, perron_positivity_floor, BoundFlags};
use trem_core::{decompose, limits, Environment, Error, KernelView, ModelParams, Result};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::output::{num, Manifest, Table, ARTIFACT_VERSION};
use crate::stats;

pub const TAG_CENSUS: u64 = 0x10;
pub const TAG_SPECTRAL: u64 = 0x20;
pub const TAG_CLOCK: u64 = 0x30;
pub const TAG_AGING: u64 = 0x40;
pub const TAG_LLN: u64 = 0x50;
pub const TAG_COND: u64 = 0x60;
pub const TAG_BOOT: u64 = 0x70;

/// Field seed of environment `e` in a family keyed by (master, tag).
pub fn env_seed(master: u64, tag: u64, e: u64) -> u64 {
    hash2(hash2(master, tag), e)
}

/// `f(0..count)` on `workers` threads, collected in index order.
pub fn map_replicas<T, F>(workers: usize, count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    if workers <= 1 {
        return (0..count).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
    pool.install(|| (0..count).into_par_iter().map(&f).collect())
}

/// b_n of the back-end clock: the low-temperature scale above 2β_c(ε/2),
/// the high-temperature one below.
pub fn becp_scale(env: &Environment) -> f64 {
    let s = &env.scaling;
    if env.params.beta > 2.0 * s.beta_c_half {
        s.b_n_above
    } else {
        s.b_n_below
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CensusStat {
    pub stat: &'static str,
    pub mean: f64,
    pub sd: f64,
    pub expected: f64,
    /// (mean − expected)/(sd/√envs)
    pub zscore: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CensusReport {
    pub envs: u64,
    pub stats: Vec<CensusStat>,
    pub partition_ok: bool,
}

impl CensusReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[("stat", "label"), ("observed", "vertices"), ("expected", "vertices"), ("zscore", "se")]);
        for s in &self.stats {
            t.push(vec![s.stat.to_string(), num(s.mean), num(s.expected), num(s.zscore)]);
        }
        t
    }
}

pub fn census(base: &ModelParams, envs: u64, workers: usize) -> Result<CensusReport> {
    let per_env = map_replicas(workers, envs, |e| -> Result<(Vec<f64>, bool)> {
        let p = ModelParams { seed: env_seed(base.seed, TAG_CENSUS, e), ..*base };
        let env = Environment::dense(p)?;
        let d = decompose(&env, None)?;
        Ok((census_check(&d, &p).iter().map(|r| r.observed).collect(), d.check_partition()))
    });
    let per_env = per_env.into_iter().collect::<Result<Vec<_>>>()?;
    let stats = census_expectations(base)
        .iter()
        .enumerate()
        .map(|(k, &(stat, expected))| {
            let xs: Vec<f64> = per_env.iter().map(|(o, _)| o[k]).collect();
            let mean = stats::mean(&xs);
            let sd = stats::variance(&xs).sqrt();
            // with no spread in the sample, fall back to a Poisson scale
            let se = if sd > 0.0 { sd } else { expected.sqrt() } / (envs as f64).sqrt();
            let zscore = if se > 0.0 { (mean - expected) / se } else { 0.0 };
            CensusStat { stat, mean, sd, expected, zscore }
        })
        .collect();
    Ok(CensusReport { envs, stats, partition_ok: per_env.iter().all(|(_, ok)| *ok) })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralRow {
    pub env: u64,
    pub component: usize,
    pub n: u32,
    pub size: usize,
    pub theta0: f64,
    pub theta1: f64,
    pub rho0: f64,
    pub varsigma0: f64,
    pub varsigma1: f64,
    pub flags: BoundFlags,
    pub floor_ok: bool,
}

pub fn spectral_table(rows: &[SpectralRow]) -> Table {
    let mut t = Table::new(&[
        ("component_id", "env:index"),
        ("size", "vertices"),
        ("theta0", "1"),
        ("theta1", "1"),
        ("rho0", "1"),
        ("bound_flags", "code"),
    ]);
    for r in rows {
        t.push(vec![
            format!("{}:{}", r.env, r.component),
            r.size.to_string(),
            num(r.theta0),
            num(r.theta1),
            num(r.rho0),
            r.flags.code(),
        ]);
    }
    t
}

/// Spectral data of every component in `envs` environments; environment e
/// has dimension `ns[e % ns.len()]`.
pub fn spectral_suite(base: &ModelParams, ns: &[u32], envs: u64, workers: usize) -> Result<Vec<SpectralRow>> {
    let per_env = map_replicas(workers, envs, |e| -> Result<Vec<SpectralRow>> {
        let n = ns[(e % ns.len() as u64) as usize];
        let p = ModelParams { n, seed: env_seed(base.seed, TAG_SPECTRAL, e), ..*base };
        let env = Environment::dense(p)?;
        let d = decompose(&env, None)?;
        let mut rows = Vec::new();
        for (l, c) in d.components.iter().enumerate() {
            let chain = trem_core::spectral::build_absorbing(&env, c)?;
            let rep = eigensolve(&chain)?;
            rows.push(SpectralRow {
                env: e,
                component: l,
                n,
                size: c.size(),
                theta0: rep.vartheta[0],
                theta1: rep.vartheta[1],
                rho0: chain.rho0,
                varsigma0: rep.varsigma[0],
                varsigma1: rep.varsigma[1],
                flags: eigenvalue_bound_check(&chain, &rep),
                floor_ok: perron_positivity_floor(&chain, &rep).ok(),
            });
        }
        Ok(rows)
    });
    let mut out = Vec::new();
    for r in per_env {
        out.extend(r?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClockReport {
    /// S_n°(t)
    pub fecp: Vec<f64>,
    /// Ŝ_n(t); nondecreasing in t, so also its running supremum
    pub remainder: Vec<f64>,
    pub k_circ: Vec<u64>,
    pub trap_entries: Vec<u64>,
    /// every front-end increment divided by c_n, pooled in replica order
    pub increments: Vec<f64>,
}

/// Clock books of `replicas` trajectories from π° in one environment.
pub fn clock(kv: &KernelView, t: f64, replicas: u64, workers: usize) -> ClockReport {
    let c_n = kv.env.scaling.c_n;
    let seed = kv.env.params.seed;
    let runs = map_replicas(workers, replicas, |r| {
        let mut rng = RngStream::derived(seed, TAG_CLOCK, r);
        let x0 = kv.sample_initial(&mut rng);
        let mut incs = Vec::new();
        let b = kv.run_time_only_observed(x0, t, &mut rng, |dt| incs.push(dt / c_n));
        (b, incs)
    });
    let mut rep = ClockReport {
        fecp: Vec::with_capacity(runs.len()),
        remainder: Vec::with_capacity(runs.len()),
        k_circ: Vec::with_capacity(runs.len()),
        trap_entries: Vec::with_capacity(runs.len()),
        increments: Vec::new(),
    };
    for (b, incs) in runs {
        rep.fecp.push(b.front_time / c_n);
        rep.remainder.push(b.trap_time / c_n);
        rep.k_circ.push(b.k_circ);
        rep.trap_entries.push(b.trap_entries);
        rep.increments.extend(incs);
    }
    rep
}

/// ν_n°, ν̄_n° and the two limiting tails on the u-grid.
pub fn levy_table(kv: &KernelView, us: &[f64]) -> Result<Table> {
    let p = &kv.env.params;
    let circ = limits::estimator_nu_circ(kv, us)?;
    let bar = limits::estimator_nu_bar(kv, us, becp_scale(kv.env))?;
    let alpha = kv.env.scaling.alpha_eps;
    let mut t = Table::new(&[
        ("u", "1"),
        ("nu_circ", "1"),
        ("nu_bar", "1"),
        ("nu_limit", "1"),
        ("nudag_limit", "1"),
    ]);
    for (i, &u) in us.iter().enumerate() {
        t.push(vec![
            num(u),
            num(circ.nu_circ[i]),
            num(bar.nu_bar[i]),
            num(limits::levy_tail(alpha, u)?),
            num(limits::levy_dagger_tail(p.epsilon, p.beta, u)?),
        ]);
    }
    Ok(t)
}

pub fn laplace_table(rows: &[stats::LaplaceRow]) -> Table {
    let mut t = Table::new(&[("lambda", "1"), ("empirical", "1"), ("ci_lo", "1"), ("ci_hi", "1"), ("target", "1")]);
    for r in rows {
        t.push(vec![num(r.lambda), num(r.empirical), num(r.lo), num(r.hi), num(r.target)]);
    }
    t
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgingRow {
    pub w: f64,
    pub p_hat: f64,
    pub lo: f64,
    pub hi: f64,
    pub target: f64,
}

pub fn aging_table(rows: &[AgingRow]) -> Table {
    let mut t = Table::new(&[
        ("w", "1"),
        ("p_hat", "prob"),
        ("ci_lo", "prob"),
        ("ci_hi", "prob"),
        ("arcsine_target", "prob"),
    ]);
    for r in rows {
        t.push(vec![num(r.w), num(r.p_hat), num(r.lo), num(r.hi), num(r.target)]);
    }
    t
}

/// P(C_n(t, s) ≥ 1 − ρ) at s = t(1 − w)/w for each w, with 99% Wilson intervals.
pub fn aging(kv: &KernelView, ws: &[f64], t: f64, rho: f64, replicas: u64, workers: usize) -> Result<Vec<AgingRow>> {
    let alpha = kv.env.scaling.alpha_eps;
    let seed = kv.env.params.seed;
    ws.iter()
        .enumerate()
        .map(|(k, &w)| {
            if !(w > 0.0 && w < 1.0) {
                return Err(Error::Domain("w must lie in (0, 1)"));
            }
            let s = t * (1.0 - w) / w;
            let hits = map_replicas(workers, replicas, |r| {
                let mut rng = RngStream::derived(seed, TAG_AGING + k as u64, r);
                kv.sample_overlap(t, s, &mut rng) >= 1.0 - rho
            });
            let est = trem_core::kinetics::CorrelationEstimate::from_counts(
                hits.iter().filter(|&&h| h).count() as u64,
                replicas,
            );
            Ok(AgingRow { w, p_hat: est.p_hat, lo: est.lo, hi: est.hi, target: limits::arcsine_cdf(alpha, w)? })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LlnRow {
    pub n: u32,
    pub b_n: f64,
    pub mean: f64,
    pub var: f64,
    pub samples: Vec<f64>,
}

pub fn lln_table(rows: &[LlnRow]) -> Table {
    let mut t = Table::new(&[("n", "1"), ("mean_Kn_over_bn", "1"), ("sd", "1")]);
    for r in rows {
        t.push(vec![r.n.to_string(), num(r.mean), num(r.var.sqrt())]);
    }
    t
}

/// b_n⁻¹K_n(t) over `replicas` trajectories, one quenched environment per n.
pub fn lln(base: &ModelParams, ns: &[u32], t: f64, replicas: u64, workers: usize) -> Result<Vec<LlnRow>> {
    ns.iter()
        .map(|&n| {
            let p = ModelParams { n, seed: env_seed(base.seed, TAG_LLN, n as u64), ..*base };
            let env = Environment::dense(p)?;
            let d = decompose(&env, None)?;
            let kv = KernelView::new(&env, &d)?;
            let b_n = becp_scale(&env);
            let samples = map_replicas(workers, replicas, |r| {
                let mut rng = RngStream::derived(p.seed, TAG_LLN, r);
                let x0 = kv.sample_initial(&mut rng);
                kv.run_until_kn(x0, t, &mut rng).steps as f64 / b_n
            });
            Ok(LlnRow { n, b_n, mean: stats::mean(&samples), var: stats::variance(&samples), samples })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionRow {
    pub u: f64,
    pub c0: f64,
    pub nu_circ: f64,
    pub sigma_circ: f64,
    pub nu_rem: f64,
    pub lemma_rhs: f64,
    pub nu_bar: f64,
    pub sigma_bar_eq: f64,
    pub sigma_bar_ne: f64,
    /// replica medians of the path functionals
    pub path_nu: f64,
    pub path_sigma: f64,
    pub path_nu_bar: f64,
    pub path_sigma_bar: f64,
    pub nu_target: f64,
    pub nudag_target: f64,
}

pub fn conditions_table(rows: &[ConditionRow]) -> Table {
    let mut t = Table::new(&[
        ("u", "1"),
        ("c0", "1"),
        ("nu_circ", "1"),
        ("sigma_circ", "1"),
        ("nu_rem", "1"),
        ("lemma_rhs", "1"),
        ("nu_bar", "1"),
        ("sigma_bar_eq", "1"),
        ("sigma_bar_ne", "1"),
        ("path_nu", "1"),
        ("path_sigma", "1"),
        ("path_nu_bar", "1"),
        ("path_sigma_bar", "1"),
        ("nu_target", "1"),
        ("nudag_target", "1"),
    ]);
    for r in rows {
        t.push(
            [
                r.u, r.c0, r.nu_circ, r.sigma_circ, r.nu_rem, r.lemma_rhs, r.nu_bar, r.sigma_bar_eq, r.sigma_bar_ne,
                r.path_nu, r.path_sigma, r.path_nu_bar, r.path_sigma_bar, r.nu_target, r.nudag_target,
            ]
            .iter()
            .map(|&x| num(x))
            .collect(),
        );
    }
    t
}

/// Exact estimators and Monte Carlo path functionals of the limit conditions.
pub fn conditions(kv: &KernelView, us: &[f64], t: f64, replicas: u64, workers: usize) -> Result<Vec<ConditionRow>> {
    let p = &kv.env.params;
    let b_n = becp_scale(kv.env);
    let circ = limits::estimator_nu_circ(kv, us)?;
    let bar = limits::estimator_nu_bar(kv, us, b_n)?;
    let alpha = kv.env.scaling.alpha_eps;
    us.iter()
        .enumerate()
        .map(|(i, &u)| {
            let q = limits::q_tails(kv, b_n, u);
            let paths = map_replicas(workers, replicas, |r| {
                let mut rng = RngStream::derived(p.seed, TAG_COND + i as u64, r);
                limits::path_functionals(kv, t, u, &q, &mut rng)
            });
            let med = |f: fn(&limits::PathFunctionals) -> f64| stats::median(&paths.iter().map(f).collect::<Vec<_>>());
            Ok(ConditionRow {
                u,
                c0: limits::condition_c0(kv, u)?,
                nu_circ: circ.nu_circ[i],
                sigma_circ: circ.sigma_circ[i],
                nu_rem: circ.nu_rem[i],
                lemma_rhs: circ.lemma_rhs[i],
                nu_bar: bar.nu_bar[i],
                sigma_bar_eq: bar.sigma_bar_eq[i],
                sigma_bar_ne: bar.sigma_bar_ne[i],
                path_nu: med(|f| f.nu),
                path_sigma: med(|f| f.sigma),
                path_nu_bar: med(|f| f.nu_bar),
                path_sigma_bar: med(|f| f.sigma_bar),
                nu_target: t * limits::levy_tail(alpha, u)?,
                nudag_target: t * limits::levy_dagger_tail(p.epsilon, p.beta, u)?,
            })
        })
        .collect()
}

/// Typed results of one experiment run, kept for the acceptance checks.
#[derive(Clone, Debug)]
pub enum ExperimentData {
    Spectral(Vec<SpectralRow>),
    Census(CensusReport),
    Clock { report: ClockReport, laplace: Vec<stats::LaplaceRow>, hill: Option<limits::HillEstimate> },
    Aging(Vec<AgingRow>),
    Lln(Vec<LlnRow>),
    Conditions { rows: Vec<ConditionRow>, a3: f64 },
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub manifest: Manifest,
    pub data: ExperimentData,
}

impl RunOutput {
    pub fn write(&self, dir: &std::path::Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        self.manifest.write(dir)
    }
}

pub const LAPLACE_LAMBDAS: [f64; 3] = [0.5, 1.0, 2.0];
pub const HILL_TOP_FRACTION: f64 = 1e-3;
pub const AGING_WS: [f64; 3] = [0.25, 0.5, 0.75];

/// n, n − 3 and n − 6 ascending: the dimensions of the LLN sweep ending at n.
pub fn lln_dims(n: u32) -> Vec<u32> {
    [6, 3, 0].iter().filter(|&&d| n >= d + 2).map(|&d| n - d).collect()
}

/// Run one configured experiment; files are returned in memory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate().map_err(|_| Error::Domain("invalid configuration"))?;
    let start = Instant::now();
    let p = cfg.params;
    let mut m = Manifest::new();
    for (k, v) in cfg.echo() {
        m.set(k, v);
    }
    m.set("master_seed", p.seed);
    m.set("artifact_version", ARTIFACT_VERSION);
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut put = |name: &str, t: Table| files.push((name.to_string(), t.to_bytes()));
    let data = match cfg.kind {
        ExperimentKind::SpectralSuite => {
            let rows = spectral_suite(&p, &[p.n], cfg.replicas, cfg.workers)?;
            m.set("components", rows.len());
            m.set("bound_violations", rows.iter().filter(|r| !r.flags.all_ok()).count());
            put("spectral.csv", spectral_table(&rows));
            ExperimentData::Spectral(rows)
        }
        ExperimentKind::CloudCensus => {
            let rep = census(&p, cfg.replicas, cfg.workers)?;
            m.set("environments", rep.envs);
            m.set("partition_ok", rep.partition_ok);
            let zmax = rep.stats.iter().map(|s| s.zscore.abs()).fold(0.0, f64::max);
            m.set("max_abs_zscore", zmax);
            put("census.csv", rep.table());
            ExperimentData::Census(rep)
        }
        ExperimentKind::ClockConvergence => {
            let env = Environment::dense(p)?;
            let d = decompose(&env, None)?;
            let kv = KernelView::new(&env, &d)?;
            let report = clock(&kv, cfg.t, cfg.replicas, cfg.workers);
            let mut rng = RngStream::derived(p.seed, TAG_BOOT, 0);
            let laplace = stats::laplace_compare(&report.fecp, env.scaling.alpha_eps, &LAPLACE_LAMBDAS, &mut rng)?;
            let hill = limits::hill_tail_index(&report.increments, HILL_TOP_FRACTION).ok();
            m.set("median_fecp", stats::median(&report.fecp));
            m.set("median_remainder", stats::median(&report.remainder));
            if let Some(h) = &hill {
                m.set("hill_alpha", h.alpha);
            }
            put("levy.csv", levy_table(&kv, &cfg.u_grid)?);
            put("laplace.csv", laplace_table(&laplace));
            ExperimentData::Clock { report, laplace, hill }
        }
        ExperimentKind::AgingCurve => {
            let env = Environment::dense(p)?;
            let d = decompose(&env, None)?;
            let kv = KernelView::new(&env, &d)?;
            let rows = aging(&kv, &AGING_WS, cfg.t, cfg.rho, cfg.replicas, cfg.workers)?;
            for r in &rows {
                m.set(format!("p_hat_w{}", r.w), r.p_hat);
            }
            put("aging.csv", aging_table(&rows));
            ExperimentData::Aging(rows)
        }
        ExperimentKind::HightempLln => {
            let rows = lln(&p, &lln_dims(p.n), cfg.t, cfg.replicas, cfg.workers)?;
            for r in &rows {
                m.set(format!("mean_n{}", r.n), r.mean);
            }
            put("lln.csv", lln_table(&rows));
            ExperimentData::Lln(rows)
        }
        ExperimentKind::ConditionCheck => {
            let env = Environment::dense(p)?;
            let d = decompose(&env, None)?;
            let kv = KernelView::new(&env, &d)?;
            let rows = conditions(&kv, &cfg.u_grid, cfg.t, cfg.replicas, cfg.workers)?;
            let a3 = limits::condition_a3(&kv, cfg.t, 0.1, becp_scale(&env))?;
            m.set("a3_eps0.1", a3);
            put("conditions.csv", conditions_table(&rows));
            ExperimentData::Conditions { rows, a3 }
        }
    };
    m.set("wall_time_s", start.elapsed().as_secs_f64());
    Ok(RunOutput { files, manifest: m, data })
}

/// Regime defaults of each experiment kind at master seed `seed`.
pub fn default_config(kind: ExperimentKind, seed: u64) -> ExperimentConfig {
    let stable_beta = 2.0 * beta_c(0.5);
    let (n, c_star, beta, eps, replicas) = match kind {
        ExperimentKind::SpectralSuite => (16, 3.1, 1.0, 0.5, 50),
        ExperimentKind::CloudCensus => (14, 3.0, 1.0, 0.5, 200),
        ExperimentKind::ClockConvergence => (20, 2.05, stable_beta, 0.5, 1000),
        ExperimentKind::AgingCurve => (20, 2.05, stable_beta, 0.5, 1000),
        ExperimentKind::HightempLln => (18, 3.0, beta_c(0.25), 0.5, 500),
        ExperimentKind::ConditionCheck => (16, 2.05, stable_beta, 0.5, 100),
    };
    ExperimentConfig::new(kind, ModelParams { n, c_star, beta, epsilon: eps, seed })
        .with_replicas(replicas)
}
