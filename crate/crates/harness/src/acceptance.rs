//! The thirteen acceptance checks, shared by `trem check` and the
//! `acceptance` test target.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use trem_core::kinetics::{EffectiveMode, TrapData};
use trem_core::linalg::Mat;
use trem_core::params::beta_c;
use trem_core::rng::RngStream;
use trem_core::spectral::{perron_projector_bound, AbsorbingChain};
use trem_core::special::{gamma_fn, integrate};
use trem_core::{decompose, limits, Environment, KernelView, ModelParams, Result};

use crate::experiments::{self, env_seed, map_replicas, AgingRow, CensusReport, ClockReport, LlnRow, SpectralRow};
use crate::stats;

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {} {}: {} [{:.1}s]",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds
        )
    }
}

fn timed(id: u8, name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Outcome { id, name, pass, detail, seconds: start.elapsed().as_secs_f64() }
}

/// The stable regime shared by the clock, aging and remainder checks.
pub fn stable_params(seed: u64) -> ModelParams {
    ModelParams { n: 20, c_star: 2.05, beta: 2.0 * beta_c(0.5), epsilon: 0.5, seed }
}

const TAG_C1: u64 = 0xC1;
const TAG_C2: u64 = 0xC2;
const TAG_C4: u64 = 0xC4;
const TAG_C11: u64 = 0xCB;

pub fn criterion1(seed: u64, workers: usize) -> Outcome {
    timed(1, "size-2 sojourn law", || {
        const SAMPLES: u64 = 1_000_000;
        let res = map_replicas(workers, 100, |k| -> Result<(f64, usize, usize)> {
            let mut rng = RngStream::derived(seed, TAG_C1, k);
            let n = 3 + rng.below(28) as u32;
            let beta = 0.2 + 2.8 * rng.uniform();
            let sn = (n as f64).sqrt();
            let h = [-(0.1 + 2.9 * rng.uniform()) * sn, -(0.1 + 2.9 * rng.uniform()) * sn];
            let chain = AbsorbingChain::new(n, beta, vec![0, 1], h.to_vec())?;
            let rho0 = (-beta * h[0].max(h[1])).exp();
            let nf = n as f64;
            let q = (nf - 1.0) / (nf - 1.0 + rho0);
            let mut worst: f64 = 0.0;
            for v in 0..2 {
                // every neighbour of v: the partner, or an unoccupied vertex with H = 0
                let rate = |hy: f64| (-beta * (hy - h[v]).max(0.0)).exp() / nf;
                let inside = rate(h[1 - v]);
                let outside = (nf - 1.0) * rate(0.0);
                let exit = outside / (inside + outside);
                worst = worst.max(((exit - q) / q).abs());
                worst = worst.max(((chain.q_exit[v] - q) / q).abs());
            }
            let tr = TrapData::from_chain(chain)?;
            let mut exceed = [0u64; 21];
            for _ in 0..SAMPLES {
                let k = tr.sojourn_steps(0, &mut rng).min(21) as usize;
                for c in exceed.iter_mut().take(k).skip(1) {
                    *c += 1;
                }
            }
            let mut tested = 0;
            let mut bad = 0;
            for i in 1..=20 {
                let p = (1.0 - q).powi(i as i32);
                let p_hat = exceed[i] as f64 / SAMPLES as f64;
                let sd = (p * (1.0 - p) / SAMPLES as f64).sqrt();
                tested += 1;
                if (p_hat - p).abs() > 4.0 * sd {
                    bad += 1;
                }
            }
            Ok((worst, tested, bad))
        });
        let res = res.into_iter().collect::<Result<Vec<_>>>()?;
        let worst = res.iter().map(|r| r.0).fold(0.0, f64::max);
        let tested: usize = res.iter().map(|r| r.1).sum();
        let bad: usize = res.iter().map(|r| r.2).sum();
        Ok((
            worst <= 1e-12 && bad == 0,
            format!("max rel. exit-prob error {worst:.2e}; {bad}/{tested} tail points beyond 4 sd"),
        ))
    })
}

/// Random irreducible matrix reversible for the returned measure, scaled to
/// row sums at most 1; period 2 when `bipartite`, primitive otherwise.
fn random_reversible(rng: &mut RngStream, bipartite: bool) -> (Mat, Vec<f64>) {
    let size = 2 + rng.below(11) as usize;
    let colour: Vec<usize> = (0..size).map(|i| if i < 2 { i } else { rng.below(2) as usize }).collect();
    let mut s = Mat::zeros(size, size);
    fn link(s: &mut Mat, i: usize, j: usize, w: f64) {
        s[(i, j)] = w;
        s[(j, i)] = w;
    }
    for i in 1..size {
        // spanning tree to an earlier vertex (of the other colour when bipartite)
        let cands: Vec<usize> = (0..i).filter(|&j| !bipartite || colour[j] != colour[i]).collect();
        let j = cands[rng.below(cands.len() as u64) as usize];
        let w = 0.05 + rng.uniform();
        link(&mut s, i, j, w);
    }
    for i in 0..size {
        for j in i + 1..size {
            if (!bipartite || colour[i] != colour[j]) && rng.uniform() < 0.4 {
                let w = 0.05 + rng.uniform();
                link(&mut s, i, j, w);
            }
        }
    }
    if !bipartite {
        let d = rng.below(size as u64) as usize;
        s[(d, d)] = 0.05 + rng.uniform();
        for i in 0..size {
            if rng.uniform() < 0.3 {
                s[(i, i)] = 0.05 + rng.uniform();
            }
        }
    }
    let pi: Vec<f64> = (0..size).map(|_| 0.1 + rng.uniform()).collect();
    let mut a = Mat::zeros(size, size);
    for i in 0..size {
        for j in 0..size {
            a[(i, j)] = s[(i, j)] / pi[i];
        }
    }
    let top = a.row_sums().into_iter().fold(0.0, f64::max);
    for v in a.data.iter_mut() {
        *v /= top;
    }
    (a, pi)
}

pub fn criterion2(seed: u64, workers: usize) -> Outcome {
    timed(2, "Perron projector bounds", || {
        let res = map_replicas(workers, 1200, |k| -> Result<(usize, f64)> {
            let mut rng = RngStream::derived(seed, TAG_C2, k);
            let (a, pi) = random_reversible(&mut rng, k >= 1000);
            let mut bad = 0;
            let mut excess = f64::NEG_INFINITY;
            for m in 1..=50 {
                for row in perron_projector_bound(&a, &pi, m)? {
                    excess = excess.max(row.lhs - row.rhs);
                    if row.lhs > row.rhs + 1e-10 {
                        bad += 1;
                    }
                }
            }
            Ok((bad, excess))
        });
        let res = res.into_iter().collect::<Result<Vec<_>>>()?;
        let bad: usize = res.iter().map(|r| r.0).sum();
        let excess = res.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        Ok((bad == 0, format!("1000 primitive + 200 periodic matrices, {bad} violations, max lhs-rhs {excess:.2e}")))
    })
}

pub fn criterion3(rows: &[SpectralRow]) -> Outcome {
    timed(3, "eigenvalue bounds", || {
        let bad: Vec<String> =
            rows.iter().filter(|r| !r.flags.all_ok()).map(|r| format!("{}:{}={}", r.env, r.component, r.flags.code())).collect();
        let sizes = rows.iter().map(|r| r.size).max().unwrap_or(0);
        Ok((
            bad.is_empty(),
            format!("{} components (largest {sizes}), {} violations {}", rows.len(), bad.len(), bad.join(" ")),
        ))
    })
}

/// Σ_{j≥1} C(n,j) 2⁻ⁿ (n − j)/j: variance inflation of one state's occupation
/// count for the simple random walk on the hypercube.
pub fn hypercube_occupation_factor(n: u32) -> f64 {
    let nf = n as f64;
    let mut binom = 1.0;
    let mut acc = 0.0;
    for j in 1..=n {
        binom *= (nf - j as f64 + 1.0) / j as f64;
        acc += binom * (nf - j as f64) / j as f64;
    }
    acc / 2f64.powi(n as i32)
}

pub fn criterion4(seed: u64) -> Outcome {
    timed(4, "detailed balance and uniform effective law", || {
        // first environment of the family that has a component to exercise the exit laws
        let mut e = 0;
        let (env, d) = loop {
            let p = ModelParams { n: 10, c_star: 2.05, beta: 1.0, epsilon: 0.5, seed: env_seed(seed, TAG_C4, e) };
            let env = Environment::dense(p)?;
            let d = decompose(&env, None)?;
            if !d.components.is_empty() {
                break (env, d);
            }
            e += 1;
        };
        let kv = KernelView::new(&env, &d)?;
        let size = 1u64 << 10;
        let mut jump_res: f64 = 0.0;
        for x in 0..size {
            for b in 0..10 {
                let y = x ^ (1 << b);
                let a = kv.pi_unnormalized(x) * kv.jump_prob(x, y)?;
                let c = kv.pi_unnormalized(y) * kv.jump_prob(y, x)?;
                jump_res = jump_res.max((a - c).abs() / a.max(c));
            }
        }
        let v_circ: Vec<u64> = (0..size).filter(|&x| kv.in_v_circ(x)).collect();
        let rows: BTreeMap<u64, BTreeMap<u64, f64>> =
            v_circ.iter().map(|&x| (x, kv.effective_transition_row(x).into_iter().collect())).collect();
        let mut eff_res: f64 = 0.0;
        let mut row_err: f64 = 0.0;
        for (&x, row) in &rows {
            row_err = row_err.max((row.values().sum::<f64>() - 1.0).abs());
            for (&y, &p) in row {
                let back = rows.get(&y).and_then(|r| r.get(&x)).copied().unwrap_or(0.0);
                eff_res = eff_res.max((p - back).abs());
            }
        }
        const STEPS: u64 = 10_000_000;
        let mut rng = RngStream::derived(seed, TAG_C4, 1 << 32);
        let index: BTreeMap<u64, usize> = v_circ.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        let mut counts = vec![0u64; size as usize];
        let mut x = v_circ[rng.below(v_circ.len() as u64) as usize];
        for _ in 0..STEPS {
            counts[x as usize] += 1;
            x = kv.step_effective(x, EffectiveMode::Direct, &mut rng);
        }
        let expect = STEPS as f64 / v_circ.len() as f64;
        let sd = (expect * hypercube_occupation_factor(10)).sqrt();
        let worst_z = index.keys().map(|&x| (counts[x as usize] as f64 - expect).abs() / sd).fold(0.0, f64::max);
        let pass = jump_res <= 1e-10 && eff_res <= 1e-10 && row_err <= 1e-10 && worst_z <= 4.0;
        Ok((
            pass,
            format!(
                "env #{e} with {} components; p_n residual {jump_res:.1e}, effective residual {eff_res:.1e}, row-sum error {row_err:.1e}; max occupation |z| {worst_z:.2} over {} states",
                d.components.len(),
                v_circ.len()
            ),
        ))
    })
}

pub fn criterion5(rep: &CensusReport) -> Outcome {
    timed(5, "cloud census", || {
        let worst = rep.stats.iter().map(|s| s.zscore.abs()).fold(0.0, f64::max);
        let parts: Vec<String> =
            rep.stats.iter().map(|s| format!("{} {:.3}/{:.3} (z {:.2})", s.stat, s.mean, s.expected, s.zscore)).collect();
        Ok((worst <= 4.0 && rep.partition_ok, format!("{} envs: {}", rep.envs, parts.join(", "))))
    })
}

/// (sin πα/π)∫₀^w u^{α−1}(1−u)^{−α} du after u = w s^{1/α}.
pub fn arcsine_quadrature(alpha: f64, w: f64) -> Result<f64> {
    let pi = std::f64::consts::PI;
    let inner = integrate(|s| (1.0 - w * s.powf(1.0 / alpha)).powf(-alpha), 0.0, 1.0, 1e-15, 1e-13)?;
    Ok((pi * alpha).sin() / pi * w.powf(alpha) / alpha * inner)
}

pub fn criterion6() -> Outcome {
    timed(6, "arcsine, beta and gamma numerics", || {
        let mut worst_id: f64 = 0.0;
        for a in [0.2, 0.5, 0.8] {
            worst_id = worst_id.max((limits::arcsine_cdf(a, 1.0)? - 1.0).abs());
        }
        worst_id = worst_id.max((limits::arcsine_cdf(0.5, 0.5)? - 0.5).abs());
        let mut worst_q: f64 = 0.0;
        for a in [0.2, 0.5, 0.8] {
            for k in 1..=50 {
                let w = 0.98 * k as f64 / 50.0;
                worst_q = worst_q.max((limits::arcsine_cdf(a, w)? - arcsine_quadrature(a, w)?).abs());
            }
        }
        let g = (gamma_fn(0.5)? - std::f64::consts::PI.sqrt()).abs();
        Ok((
            worst_id <= 1e-10 && worst_q <= 1e-8 && g <= 1e-12,
            format!("identities {worst_id:.1e}, quadrature {worst_q:.1e}, gamma(1/2) {g:.1e}"),
        ))
    })
}

pub fn criterion7() -> Outcome {
    timed(7, "oracle integral convergence", || {
        let beta = 2.0 * beta_c(0.5);
        let us: Vec<f64> = (0..8).map(|i| 0.5 * 8f64.powf(i as f64 / 7.0)).collect();
        let mut monotone = true;
        let mut last_gap: f64 = 0.0;
        for &u in &us {
            let mut prev = f64::INFINITY;
            for k in 6..=10 {
                let o = limits::VnOracle::new(2f64.powi(k), beta, 3.0, 0.25)?;
                let gap = ((o.expectation(u)? - o.limit(u)?) / o.limit(u)?).abs();
                monotone &= gap < prev;
                prev = gap;
            }
            last_gap = last_gap.max(prev);
        }
        Ok((monotone && last_gap <= 0.15, format!("monotone {monotone}, max gap at n=1024 {last_gap:.4}")))
    })
}

pub fn criterion8(clock: &ClockReport, laplace: &[stats::LaplaceRow], hill: Option<&limits::HillEstimate>) -> Outcome {
    timed(8, "front-end stable limit", || {
        let worst = laplace.iter().map(|r| (r.empirical - r.target).abs()).fold(0.0, f64::max);
        let rows: Vec<String> = laplace
            .iter()
            .map(|r| format!("l={} {:.4} vs {:.4}", r.lambda, r.empirical, r.target))
            .collect();
        let hill_ok = hill.map_or(false, |h| (0.35..=0.65).contains(&h.alpha));
        let hill_txt = hill.map_or("hill n/a".to_string(), |h| format!("hill {:.3} ({} exceedances)", h.alpha, h.exceedances));
        Ok((
            worst <= 0.08 && hill_ok,
            format!("{} replicas; {}; max gap {worst:.4}; {hill_txt}", clock.fecp.len(), rows.join(", ")),
        ))
    })
}

pub fn criterion9(rows: &[AgingRow]) -> Outcome {
    timed(9, "aging curve", || {
        let mid = rows.iter().find(|r| r.w == 0.5).map(|r| r.p_hat).unwrap_or(f64::NAN);
        let monotone = rows.windows(2).all(|w| w[1].p_hat > w[0].p_hat);
        let txt: Vec<String> = rows.iter().map(|r| format!("w={} {:.3} (target {:.3})", r.w, r.p_hat, r.target)).collect();
        Ok(((mid - 0.5).abs() <= 0.15 && monotone, format!("{}; monotone {monotone}", txt.join(", "))))
    })
}

pub fn criterion10(rows: &[LlnRow]) -> Outcome {
    timed(10, "high-temperature law of large numbers", || {
        let in_band = rows.iter().all(|r| (0.5..=2.0).contains(&r.mean));
        let decreasing = rows.windows(2).all(|w| w[1].var < w[0].var);
        let txt: Vec<String> = rows.iter().map(|r| format!("n={} mean {:.4} var {:.3e}", r.n, r.mean, r.var)).collect();
        Ok((in_band && decreasing, format!("{}; variance decreasing {decreasing}", txt.join(", "))))
    })
}

pub fn criterion11(seed: u64, workers: usize) -> Outcome {
    timed(11, "step-ratio bound", || {
        let p = ModelParams { n: 16, c_star: 3.0, beta: 1.0, epsilon: 0.5, seed: env_seed(seed, TAG_C11, 0) };
        let env = Environment::dense(p)?;
        let d = decompose(&env, None)?;
        let kv = KernelView::new(&env, &d)?;
        let bound = 1.0 + 1.0 / 16.0;
        let ok = map_replicas(workers, 1000, |r| {
            let mut rng = RngStream::derived(p.seed, TAG_C11, r);
            let x0 = kv.sample_initial(&mut rng);
            let b = kv.run_time_only(x0, 1.0, &mut rng);
            b.k_dagger() as f64 / b.k_circ as f64 <= bound
        });
        let frac = ok.iter().filter(|&&o| o).count() as f64 / ok.len() as f64;
        Ok((frac >= 0.95, format!("{:.1}% of 1000 replicas within 1+1/n ({} trap vertices)", 100.0 * frac, d.component_vertex_total())))
    })
}

pub fn criterion12(clock: &ClockReport) -> Outcome {
    timed(12, "remainder smallness", || {
        let rem = stats::median(&clock.remainder);
        let fecp = stats::median(&clock.fecp);
        Ok((rem <= 0.05 * fecp, format!("median sup remainder {rem:.3e} vs median front-end {fecp:.3e}")))
    })
}

/// Everything the CSV-producing checks need, with the files they emit.
#[derive(Clone, Debug)]
pub struct CheckData {
    pub spectral: Vec<SpectralRow>,
    pub census: CensusReport,
    pub clock: ClockReport,
    pub laplace: Vec<stats::LaplaceRow>,
    pub hill: Option<limits::HillEstimate>,
    pub aging: Vec<AgingRow>,
    pub lln: Vec<LlnRow>,
    pub files: Vec<(String, Vec<u8>)>,
}

pub fn gather(seed: u64, workers: usize) -> Result<CheckData> {
    let spectral_p = ModelParams { n: 12, c_star: 3.1, beta: 1.0, epsilon: 0.5, seed };
    let ns: Vec<u32> = (12..=20).collect();
    let spectral = experiments::spectral_suite(&spectral_p, &ns, 50, workers)?;
    let census_p = ModelParams { n: 14, c_star: 3.0, beta: 1.0, epsilon: 0.5, seed };
    let census = experiments::census(&census_p, 200, workers)?;

    let p = stable_params(seed);
    let env = Environment::dense(p)?;
    let d = decompose(&env, None)?;
    let kv = KernelView::new(&env, &d)?;
    let clock = experiments::clock(&kv, 1.0, 1000, workers);
    let mut rng = RngStream::derived(seed, experiments::TAG_BOOT, 0);
    let laplace = stats::laplace_compare(&clock.fecp, env.scaling.alpha_eps, &experiments::LAPLACE_LAMBDAS, &mut rng)?;
    let hill = limits::hill_tail_index(&clock.increments, experiments::HILL_TOP_FRACTION).ok();
    let levy = experiments::levy_table(&kv, &crate::config::default_u_grid())?;
    let aging = experiments::aging(&kv, &experiments::AGING_WS, 1.0, 0.25, 1000, workers)?;

    let lln_p = ModelParams { n: 12, c_star: 3.0, beta: beta_c(0.25), epsilon: 0.5, seed };
    let lln = experiments::lln(&lln_p, &[12, 15, 18], 1.0, LLN_REPLICAS, workers)?;

    let files = vec![
        ("spectral.csv".to_string(), experiments::spectral_table(&spectral).to_bytes()),
        ("census.csv".to_string(), census.table().to_bytes()),
        ("levy.csv".to_string(), levy.to_bytes()),
        ("laplace.csv".to_string(), experiments::laplace_table(&laplace).to_bytes()),
        ("aging.csv".to_string(), experiments::aging_table(&aging).to_bytes()),
        ("lln.csv".to_string(), experiments::lln_table(&lln).to_bytes()),
    ];
    Ok(CheckData { spectral, census, clock, laplace, hill, aging, lln, files })
}

pub const LLN_REPLICAS: u64 = 500;

pub fn criterion13(seed: u64, reference: &[(String, Vec<u8>)]) -> Outcome {
    timed(13, "determinism", || {
        let mut diffs = Vec::new();
        for workers in [1, 8] {
            let again = gather(seed, workers)?;
            for ((name, a), (_, b)) in reference.iter().zip(&again.files) {
                if a != b {
                    diffs.push(format!("{name}@{workers}"));
                }
            }
        }
        let n = reference.len();
        Ok((diffs.is_empty(), format!("{n} CSV files re-run with workers 1 and 8; differing: {}", if diffs.is_empty() { "none".into() } else { diffs.join(" ") })))
    })
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub outcomes: Vec<Outcome>,
    pub files: Vec<(String, Vec<u8>)>,
}

impl CheckReport {
    pub fn all_pass(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }
}

/// Run criteria 1–13; `report` sees each outcome as soon as it is known.
pub fn run_all(seed: u64, workers: usize, mut report: impl FnMut(&Outcome)) -> Result<CheckReport> {
    let mut outcomes = Vec::new();
    let mut push = |o: Outcome| {
        report(&o);
        outcomes.push(o);
    };
    push(criterion1(seed, workers));
    push(criterion2(seed, workers));
    let data = gather(seed, workers)?;
    push(criterion3(&data.spectral));
    push(criterion4(seed));
    push(criterion5(&data.census));
    push(criterion6());
    push(criterion7());
    push(criterion8(&data.clock, &data.laplace, data.hill.as_ref()));
    push(criterion9(&data.aging));
    push(criterion10(&data.lln));
    push(criterion11(seed, workers));
    push(criterion12(&data.clock));
    push(criterion13(seed, &data.files));
    Ok(CheckReport { outcomes, files: data.files })
}
