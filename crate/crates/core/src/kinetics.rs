//! The jump chain, its clock books, trap sojourns and the effective chain on V°.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Gamma};

use crate::cloud::{CloudDecomposition, Site};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::linalg::{mmatrix_solve, Mat};
use crate::rng::RngStream;
use crate::special::wilson_interval;
use crate::spectral::{build_absorbing, eigensolve, AbsorbingChain, SOLVER_CAP};

/// Pathwise books of one trajectory of J_n.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClockRecord {
    pub steps: u64,
    pub front_time: f64,
    pub back_steps: u64,
    pub trap_time: f64,
    pub k_circ: u64,
    pub k_dagger: u64,
    pub trap_entries: u64,
}

impl ClockRecord {
    pub fn total_time(&self) -> f64 {
        self.front_time + self.trap_time
    }
}

/// Time books only; trap step counts are not sampled.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeBooks {
    pub k_circ: u64,
    pub trap_entries: u64,
    pub front_time: f64,
    pub trap_time: f64,
}

impl TimeBooks {
    pub fn k_dagger(&self) -> u64 {
        self.k_circ + self.trap_entries
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sojourn {
    pub steps: u64,
    pub time: f64,
    /// index of the last vertex visited inside the component
    pub last: usize,
    pub exit: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SojournOutcome {
    Exited { time: f64, last: usize, exit: u64 },
    Inside { at: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EffectiveMode {
    Direct,
    Fallback,
}

#[derive(Clone, Debug)]
struct StepRow {
    /// (cumulative probability, target index) for moves inside the component
    inner: Vec<(f64, usize)>,
    inner_total: f64,
    outside: Vec<u64>,
}

/// Spectral data of −L* for continuous-time sojourn sampling.
#[derive(Clone, Debug)]
struct SojournSpectrum {
    varsigma: Vec<f64>,
    /// f_k(v) at (v, k)
    f: Mat,
    /// f_k(w) μ*(w)
    fm: Mat,
    /// f_k(w) μ*(w) κ(w) / ς_k
    g: Mat,
    /// Σ_w μ*(w) f_k(w)
    c: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TrapData {
    pub chain: AbsorbingChain,
    /// φ_z(y): rows are entry vertices, columns follow `chain.boundary`
    pub exit_law: Mat,
    /// ℓ_z(w): probability that w is the last vertex before exit
    pub last_law: Mat,
    /// E_z T* in steps
    pub mean_steps: Vec<f64>,
    /// E_z of the continuous sojourn time
    pub mean_time: Vec<f64>,
    exit_cum: Mat,
    last_cum: Mat,
    rows: Vec<StepRow>,
    spectrum: Option<SojournSpectrum>,
}

fn cumulate(m: &Mat) -> Mat {
    let mut c = m.clone();
    for i in 0..m.rows {
        let mut acc = 0.0;
        for j in 0..m.cols {
            acc += m[(i, j)];
            c[(i, j)] = acc;
        }
    }
    c
}

/// Index j with cum[j−1] ≤ u·total < cum[j], over one row.
fn pick_row(cum: &Mat, i: usize, u: f64) -> usize {
    let row = cum.row(i);
    let target = u * row[row.len() - 1];
    let j = row.partition_point(|&c| c <= target);
    j.min(row.len() - 1)
}

impl TrapData {
    pub fn new(env: &Environment, comp: &crate::cloud::Component) -> Result<Self> {
        Self::from_chain(build_absorbing(env, comp)?)
    }

    pub fn from_chain(chain: AbsorbingChain) -> Result<Self> {
        let size = chain.size();
        let exit_law = mmatrix_solve(&chain.q, &chain.q_exit, &chain.to_boundary)?;
        let mut kill = Mat::zeros(size, size);
        for i in 0..size {
            kill[(i, i)] = chain.q_exit[i];
        }
        let last_law = mmatrix_solve(&chain.q, &chain.q_exit, &kill)?;
        let ones = Mat { rows: size, cols: 1, data: vec![1.0; size] };
        let mean_steps = mmatrix_solve(&chain.q, &chain.q_exit, &ones)?.data;
        let mean_time = mmatrix_solve(&chain.rates, &chain.kappa, &ones)?.data;

        let n = chain.n;
        let rows = (0..size)
            .map(|i| {
                let x = chain.vertices[i];
                let mut inner = Vec::new();
                let mut acc = 0.0;
                let mut outside = Vec::new();
                for b in 0..n {
                    let y = x ^ (1u64 << b);
                    match chain.index_of(y) {
                        Some(j) => {
                            acc += chain.q[(i, j)];
                            inner.push((acc, j));
                        }
                        None => outside.push(y),
                    }
                }
                StepRow { inner, inner_total: acc, outside }
            })
            .collect();

        let spectrum = eigensolve(&chain).ok().map(|rep| {
            let f = rep.cont_vectors.clone();
            let mut fm = f.clone();
            let mut g = f.clone();
            let mut c = vec![0.0; size];
            for w in 0..size {
                for k in 0..size {
                    fm[(w, k)] = f[(w, k)] * chain.mu_star[w];
                    g[(w, k)] = fm[(w, k)] * chain.kappa[w] / rep.varsigma[k];
                    c[k] += fm[(w, k)];
                }
            }
            SojournSpectrum { varsigma: rep.varsigma, f, fm, g, c }
        });

        Ok(TrapData {
            exit_cum: cumulate(&exit_law),
            last_cum: cumulate(&last_law),
            chain,
            exit_law,
            last_law,
            mean_steps,
            mean_time,
            rows,
            spectrum,
        })
    }

    pub fn size(&self) -> usize {
        self.chain.size()
    }

    pub fn has_spectrum(&self) -> bool {
        self.spectrum.is_some()
    }

    /// One step of J_n from inside the component: `Ok(j)` stays at index j,
    /// `Err(y)` leaves to the outside vertex y.
    pub fn step_inside(&self, i: usize, rng: &mut RngStream) -> core::result::Result<usize, u64> {
        let row = &self.rows[i];
        let u = rng.uniform();
        if u < row.inner_total {
            let k = row.inner.partition_point(|&(c, _)| c <= u).min(row.inner.len() - 1);
            Ok(row.inner[k].1)
        } else {
            let frac = (u - row.inner_total) / (1.0 - row.inner_total);
            let k = ((frac * row.outside.len() as f64) as usize).min(row.outside.len() - 1);
            Err(row.outside[k])
        }
    }

    /// Exit vertex drawn from the exact exit law of entry index `z`.
    pub fn sample_exit(&self, z: usize, rng: &mut RngStream) -> u64 {
        self.chain.boundary[pick_row(&self.exit_cum, z, rng.uniform())]
    }

    fn uniform_outside(&self, w: usize, rng: &mut RngStream) -> u64 {
        let out = &self.rows[w].outside;
        out[rng.below(out.len() as u64) as usize]
    }

    /// P_z(T̂ > t) from the spectral expansion.
    pub fn survival(&self, z: usize, t: f64) -> Option<f64> {
        let s = self.spectrum.as_ref()?;
        let v: f64 = (0..self.size()).map(|k| s.f[(z, k)] * s.c[k] * libm::exp(-s.varsigma[k] * t)).sum();
        Some(v.clamp(0.0, 1.0))
    }

    fn last_tail(s: &SojournSpectrum, z: usize, w: usize, t: f64) -> f64 {
        (0..s.varsigma.len())
            .map(|k| s.f[(z, k)] * s.g[(w, k)] * libm::exp(-s.varsigma[k] * t))
            .sum()
    }

    /// Solve P_z(T̂ > t, last = w) = target for t in [0, hi].
    fn invert_time(s: &SojournSpectrum, z: usize, w: usize, target: f64, hi_cap: f64) -> f64 {
        let mut lo = 0.0;
        let mut hi = if hi_cap.is_finite() { hi_cap } else { 1.0 / s.varsigma[0] };
        if !hi_cap.is_finite() {
            while Self::last_tail(s, z, w, hi) > target && hi < 1e300 {
                hi *= 2.0;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if Self::last_tail(s, z, w, mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Continuous-time sojourn from index z observed up to `horizon`
    /// (infinite horizon always exits). Needs the spectral data.
    pub fn sojourn_spectral(&self, z: usize, horizon: f64, rng: &mut RngStream) -> Option<SojournOutcome> {
        let s = self.spectrum.as_ref()?;
        let size = self.size();
        let finite = horizon.is_finite();
        if finite {
            let surv = self.survival(z, horizon)?;
            if rng.uniform() < surv {
                let weights: Vec<f64> = (0..size)
                    .map(|w| {
                        (0..size)
                            .map(|k| s.f[(z, k)] * libm::exp(-s.varsigma[k] * horizon) * s.fm[(w, k)])
                            .sum::<f64>()
                            .max(0.0)
                    })
                    .collect();
                return Some(SojournOutcome::Inside { at: pick_weighted(&weights, rng.uniform()) });
            }
        }
        let (w, lo_tail, total) = if finite {
            let weights: Vec<f64> = (0..size)
                .map(|w| (self.last_law[(z, w)] - Self::last_tail(s, z, w, horizon)).max(0.0))
                .collect();
            let w = pick_weighted(&weights, rng.uniform());
            (w, Self::last_tail(s, z, w, horizon).max(0.0), self.last_law[(z, w)])
        } else {
            let w = pick_row(&self.last_cum, z, rng.uniform());
            (w, 0.0, self.last_law[(z, w)])
        };
        let target = lo_tail + rng.uniform() * (total - lo_tail);
        let time = Self::invert_time(s, z, w, target, horizon);
        let exit = self.uniform_outside(w, rng);
        Some(SojournOutcome::Exited { time, last: w, exit })
    }

    /// Full sojourn by explicit stepping; holding times aggregated per vertex.
    pub fn sojourn_explicit(&self, z: usize, rng: &mut RngStream) -> Sojourn {
        let size = self.size();
        let mut visits = vec![0u64; size];
        let mut i = z;
        let exit = loop {
            visits[i] += 1;
            match self.step_inside(i, rng) {
                Ok(j) => i = j,
                Err(y) => break y,
            }
        };
        let mut time = 0.0;
        for (v, &m) in visits.iter().enumerate() {
            if m > 0 {
                time += gamma_sample(m as f64, rng) / self.chain.lambda[v];
            }
        }
        Sojourn { steps: visits.iter().sum(), time, last: i, exit }
    }

    /// Exact sojourn of a size-2 component: geometric number of visits
    /// alternating between the two vertices.
    pub fn sojourn_pair(&self, z: usize, rng: &mut RngStream) -> Sojourn {
        debug_assert_eq!(self.size(), 2);
        let q = self.chain.q_exit[0];
        let k = geometric(q, rng);
        let o = 1 - z;
        let m_z = k.div_ceil(2);
        let m_o = k / 2;
        let mut time = gamma_sample(m_z as f64, rng) / self.chain.lambda[z];
        if m_o > 0 {
            time += gamma_sample(m_o as f64, rng) / self.chain.lambda[o];
        }
        let last = if k % 2 == 1 { z } else { o };
        let exit = self.uniform_outside(last, rng);
        Sojourn { steps: k, time, last, exit }
    }

    /// Steps and time of one sojourn, exact in distribution.
    pub fn sojourn(&self, z: usize, rng: &mut RngStream) -> Sojourn {
        if self.size() == 2 {
            self.sojourn_pair(z, rng)
        } else {
            self.sojourn_explicit(z, rng)
        }
    }

    /// Step count of one sojourn; no clock is sampled.
    pub fn sojourn_steps(&self, z: usize, rng: &mut RngStream) -> u64 {
        if self.size() == 2 {
            return geometric(self.chain.q_exit[0], rng);
        }
        let mut i = z;
        let mut steps = 1;
        while let Ok(j) = self.step_inside(i, rng) {
            i = j;
            steps += 1;
        }
        steps
    }

    /// Time and exit of one sojourn, avoiding explicit stepping when possible.
    pub fn sojourn_time(&self, z: usize, rng: &mut RngStream) -> (f64, u64) {
        if self.size() == 2 {
            let s = self.sojourn_pair(z, rng);
            return (s.time, s.exit);
        }
        match self.sojourn_spectral(z, f64::INFINITY, rng) {
            Some(SojournOutcome::Exited { time, exit, .. }) => (time, exit),
            _ => {
                let s = self.sojourn_explicit(z, rng);
                (s.time, s.exit)
            }
        }
    }
}

fn pick_weighted(w: &[f64], u: f64) -> usize {
    let total: f64 = w.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    for (i, &x) in w.iter().enumerate() {
        acc += x;
        if target < acc {
            return i;
        }
    }
    w.iter().rposition(|&x| x > 0.0).unwrap_or(w.len() - 1)
}

/// Number of trials up to and including the first success, success prob q.
pub fn geometric(q: f64, rng: &mut RngStream) -> u64 {
    if q >= 1.0 {
        return 1;
    }
    let u = rng.uniform();
    // ln(1 − q) without cancellation when q is tiny
    let l = libm::log1p(-q);
    let k = libm::floor(libm::log(u) / l);
    if k >= 1.8e19 {
        u64::MAX
    } else {
        1 + k as u64
    }
}

/// Gamma(shape, 1) draw; shape 1 is a plain exponential.
pub fn gamma_sample(shape: f64, rng: &mut RngStream) -> f64 {
    if shape == 1.0 {
        return rng.exp1();
    }
    match Gamma::new(shape, 1.0) {
        Ok(g) => g.sample(rng),
        Err(_) => 0.0,
    }
}

/// Metropolis kernel of one environment with per-component caches.
pub struct KernelView<'a> {
    pub env: &'a Environment,
    pub decomp: &'a CloudDecomposition,
    /// indexed like `decomp.components`; `None` above the solver cap
    pub traps: Vec<Option<TrapData>>,
    /// λ_n on `decomp.occupied_vertices()`
    lambda_occ: Vec<f64>,
    beta: f64,
    n: u32,
}

impl<'a> KernelView<'a> {
    pub fn new(env: &'a Environment, decomp: &'a CloudDecomposition) -> Result<Self> {
        let traps = decomp
            .components
            .iter()
            .map(|c| {
                if c.size() > SOLVER_CAP {
                    Ok(None)
                } else {
                    TrapData::new(env, c).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut kv = KernelView {
            env,
            decomp,
            traps,
            lambda_occ: Vec::new(),
            beta: env.params.beta,
            n: env.n(),
        };
        kv.lambda_occ = decomp.occupied_vertices().iter().map(|&x| kv.holding_direct(x)).collect();
        Ok(kv)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    #[inline]
    fn h(&self, x: u64) -> f64 {
        match self.decomp.classify(x) {
            Site::Unoccupied => 0.0,
            _ => self.env.hamiltonian(x),
        }
    }

    #[inline]
    fn rate_unchecked(&self, x: u64, y: u64) -> f64 {
        libm::exp(-self.beta * (self.h(y) - self.h(x)).max(0.0)) / self.n as f64
    }

    fn holding_direct(&self, x: u64) -> f64 {
        (0..self.n).map(|b| self.rate_unchecked(x, x ^ (1u64 << b))).sum()
    }

    fn check_adjacent(&self, x: u64, y: u64) -> Result<()> {
        let lim = 1u64 << self.n;
        if x >= lim || y >= lim || (x ^ y).count_ones() != 1 {
            return Err(Error::Adjacency(x, y));
        }
        Ok(())
    }

    /// λ_n(x, y) for neighbours x, y.
    pub fn jump_rate(&self, x: u64, y: u64) -> Result<f64> {
        self.check_adjacent(x, y)?;
        Ok(self.rate_unchecked(x, y))
    }

    /// λ_n(x); equal to 1 off the occupied set.
    pub fn holding_param(&self, x: u64) -> f64 {
        match self.decomp.occupied_vertices().binary_search(&x) {
            Ok(i) => self.lambda_occ[i],
            Err(_) => 1.0,
        }
    }

    pub fn jump_prob(&self, x: u64, y: u64) -> Result<f64> {
        Ok(self.jump_rate(x, y)? / self.holding_param(x))
    }

    /// Unnormalized reversible measure of the jump chain, λ_n(x)e^{−βH(x)}.
    pub fn pi_unnormalized(&self, x: u64) -> f64 {
        self.holding_param(x) * libm::exp(-self.beta * self.h(x))
    }

    pub fn in_v_circ(&self, x: u64) -> bool {
        !matches!(self.decomp.classify(x), Site::Trap(_))
    }

    /// Trap component and index of x inside it.
    pub fn locate(&self, x: u64) -> Option<(usize, usize)> {
        let l = self.decomp.trap_of(x)?;
        let i = self.decomp.components[l].index_of(x)?;
        Some((l, i))
    }

    fn trap(&self, l: usize) -> &TrapData {
        self.traps[l].as_ref().expect("component exceeds the solver cap")
    }

    /// One step of J_n from x with a single uniform draw.
    pub fn step(&self, x: u64, rng: &mut RngStream) -> u64 {
        match self.locate(x) {
            None => x ^ (1u64 << rng.below(self.n as u64)),
            Some((l, i)) => match self.traps[l].as_ref() {
                Some(t) => match t.step_inside(i, rng) {
                    Ok(j) => t.chain.vertices[j],
                    Err(y) => y,
                },
                None => self.step_generic(x, rng),
            },
        }
    }

    fn step_generic(&self, x: u64, rng: &mut RngStream) -> u64 {
        let total = self.holding_param(x);
        let target = rng.uniform() * total;
        let mut acc = 0.0;
        for b in 0..self.n {
            let y = x ^ (1u64 << b);
            acc += self.rate_unchecked(x, y);
            if target < acc {
                return y;
            }
        }
        x ^ (1u64 << (self.n - 1))
    }

    /// Uniform start on V° by rejection from the cube.
    pub fn sample_initial(&self, rng: &mut RngStream) -> u64 {
        let mask = (1u64 << self.n) - 1;
        loop {
            let x = rng.next_u64() & mask;
            if self.in_v_circ(x) {
                return x;
            }
        }
    }

    /// k explicit steps of J_n with one exponential mark per step.
    pub fn simulate_clock(&self, x0: u64, k: u64, rng: &mut RngStream) -> ClockRecord {
        let mut rec = ClockRecord::default();
        let mut x = x0;
        let mut inside_prev = false;
        for _ in 0..k {
            let dt = rng.exp1() / self.holding_param(x);
            if self.in_v_circ(x) {
                rec.front_time += dt;
                rec.k_circ += 1;
                inside_prev = false;
            } else {
                rec.trap_time += dt;
                rec.back_steps += 1;
                if !inside_prev {
                    rec.trap_entries += 1;
                }
                inside_prev = true;
            }
            x = self.step(x, rng);
        }
        rec.steps = k;
        rec.k_dagger = rec.k_circ + rec.trap_entries;
        rec
    }

    /// Arrival times and vertices of k explicit steps; entry 0 is (0, x0).
    pub fn simulate_path(&self, x0: u64, k: u64, rng: &mut RngStream) -> Vec<(f64, u64)> {
        let mut out = Vec::with_capacity(k as usize + 1);
        let mut x = x0;
        let mut t = 0.0;
        out.push((t, x));
        for _ in 0..k {
            t += rng.exp1() / self.holding_param(x);
            x = self.step(x, rng);
            out.push((t, x));
        }
        out
    }

    fn sojourn_at(&self, y: u64, rng: &mut RngStream) -> Sojourn {
        let (l, i) = self.locate(y).expect("not a trap vertex");
        match self.traps[l].as_ref() {
            Some(t) => t.sojourn(i, rng),
            None => self.sojourn_generic(y, rng),
        }
    }

    fn sojourn_generic(&self, y: u64, rng: &mut RngStream) -> Sojourn {
        let mut x = y;
        let mut steps = 0;
        let mut time = 0.0;
        loop {
            steps += 1;
            time += rng.exp1() / self.holding_param(x);
            let next = self.step_generic(x, rng);
            if self.in_v_circ(next) {
                return Sojourn { steps, time, last: 0, exit: next };
            }
            x = next;
        }
    }

    /// Λ† from entry vertex y.
    pub fn sample_sojourn_steps(&self, y: u64, rng: &mut RngStream) -> u64 {
        self.sojourn_at(y, rng).steps
    }

    /// Λ̂† from entry vertex y.
    pub fn sample_sojourn_time(&self, y: u64, rng: &mut RngStream) -> f64 {
        self.sojourn_at(y, rng).time
    }

    /// J_n from x0 ∈ V° until ⌊a_n t⌋ visits to V° have been made.
    pub fn run_until_kn(&self, x0: u64, t: f64, rng: &mut RngStream) -> ClockRecord {
        let target = libm::floor(self.env.scaling.a_n as f64 * t) as u64;
        let mut rec = ClockRecord::default();
        let mut x = x0;
        while rec.k_circ < target {
            rec.k_circ += 1;
            rec.front_time += rng.exp1() / self.holding_param(x);
            if rec.k_circ == target {
                break;
            }
            let y = x ^ (1u64 << rng.below(self.n as u64));
            if self.in_v_circ(y) {
                x = y;
            } else {
                let s = self.sojourn_at(y, rng);
                rec.back_steps += s.steps;
                rec.trap_time += s.time;
                rec.trap_entries += 1;
                x = s.exit;
            }
        }
        rec.steps = rec.k_circ + rec.back_steps;
        rec.k_dagger = rec.k_circ + rec.trap_entries;
        rec
    }

    /// As `run_until_kn` but trap sojourns are sampled in time only.
    pub fn run_time_only(&self, x0: u64, t: f64, rng: &mut RngStream) -> TimeBooks {
        self.run_time_only_observed(x0, t, rng, |_| {})
    }

    /// `run_time_only`, passing every front-end clock increment to `on_front`.
    pub fn run_time_only_observed<F: FnMut(f64)>(&self, x0: u64, t: f64, rng: &mut RngStream, mut on_front: F) -> TimeBooks {
        let target = libm::floor(self.env.scaling.a_n as f64 * t) as u64;
        let mut b = TimeBooks::default();
        let mut x = x0;
        while b.k_circ < target {
            b.k_circ += 1;
            let dt = rng.exp1() / self.holding_param(x);
            on_front(dt);
            b.front_time += dt;
            if b.k_circ == target {
                break;
            }
            let y = x ^ (1u64 << rng.below(self.n as u64));
            if self.in_v_circ(y) {
                x = y;
            } else {
                let (l, i) = self.locate(y).expect("trap vertex");
                let (time, exit) = match self.traps[l].as_ref() {
                    Some(tr) => tr.sojourn_time(i, rng),
                    None => {
                        let s = self.sojourn_generic(y, rng);
                        (s.time, s.exit)
                    }
                };
                b.trap_time += time;
                b.trap_entries += 1;
                x = exit;
            }
        }
        b
    }

    /// Positions of X_n at the sorted query times, started at x0 ∈ V°.
    pub fn positions_at(&self, x0: u64, times: &[f64], rng: &mut RngStream) -> Vec<u64> {
        let mut out = Vec::with_capacity(times.len());
        let mut now = 0.0;
        let mut x = x0;
        let mut q = 0;
        // inside a trap: (component, index)
        let mut trapped: Option<(usize, usize)> = None;
        while q < times.len() {
            match trapped {
                None => {
                    let leave = now + rng.exp1() / self.holding_param(x);
                    while q < times.len() && times[q] < leave {
                        out.push(x);
                        q += 1;
                    }
                    now = leave;
                    let y = x ^ (1u64 << rng.below(self.n as u64));
                    match self.locate(y) {
                        None => x = y,
                        Some(loc) => trapped = Some(loc),
                    }
                }
                Some((l, i)) => {
                    let tr = self.trap(l);
                    if !tr.has_spectrum() {
                        // explicit walk inside with exponential holding times
                        let v = tr.chain.vertices[i];
                        let leave = now + rng.exp1() / self.holding_param(v);
                        while q < times.len() && times[q] < leave {
                            out.push(v);
                            q += 1;
                        }
                        now = leave;
                        match tr.step_inside(i, rng) {
                            Ok(j) => trapped = Some((l, j)),
                            Err(y) => {
                                x = y;
                                trapped = None;
                            }
                        }
                        continue;
                    }
                    let horizon = times[q] - now;
                    match tr.sojourn_spectral(i, horizon, rng).expect("spectrum") {
                        SojournOutcome::Inside { at } => {
                            out.push(tr.chain.vertices[at]);
                            now = times[q];
                            q += 1;
                            trapped = Some((l, at));
                        }
                        SojournOutcome::Exited { time, exit, .. } => {
                            now += time;
                            x = exit;
                            trapped = None;
                        }
                    }
                }
            }
        }
        out
    }

    /// C_n(t, s) for one trajectory started uniformly on V°.
    pub fn sample_overlap(&self, t: f64, s: f64, rng: &mut RngStream) -> f64 {
        let x0 = self.sample_initial(rng);
        let c = self.env.scaling.c_n;
        let pos = self.positions_at(x0, &[c * t, c * (t + s)], rng);
        1.0 - 2.0 * (pos[0] ^ pos[1]).count_ones() as f64 / self.n as f64
    }

    /// Exit law report of component l.
    pub fn effective_kernel(&self, l: usize) -> Result<ExitLawReport> {
        let comp = &self.decomp.components[l];
        let tr = self.traps[l].as_ref().ok_or(Error::SolverCap { size: comp.size(), cap: SOLVER_CAP })?;
        let phi = tr.exit_law.clone();
        let reference: Vec<f64> = phi.row(0).to_vec();
        let mut spread: f64 = 0.0;
        for z in 1..phi.rows {
            let tv: f64 = phi.row(z).iter().zip(&reference).map(|(a, b)| libm::fabs(a - b)).sum::<f64>() * 0.5;
            spread = spread.max(tv);
        }
        let total: f64 = comp.boundary_counts.iter().map(|&c| c as f64).sum();
        let formula = comp.boundary_counts.iter().map(|&c| c as f64 / total).collect();
        let row_sums = phi.row_sums();
        Ok(ExitLawReport { boundary: tr.chain.boundary.clone(), phi, reference, spread, formula, row_sums })
    }

    /// One step of J° from x ∈ V°.
    pub fn step_effective(&self, x: u64, mode: EffectiveMode, rng: &mut RngStream) -> u64 {
        let y = x ^ (1u64 << rng.below(self.n as u64));
        match self.locate(y) {
            None => y,
            Some((l, i)) => match (mode, self.traps[l].as_ref()) {
                (EffectiveMode::Direct, Some(t)) => t.sample_exit(i, rng),
                _ => self.sojourn_at(y, rng).exit,
            },
        }
    }

    /// Exact row p°(x, ·) as sorted (vertex, probability) pairs.
    pub fn effective_transition_row(&self, x: u64) -> Vec<(u64, f64)> {
        let nf = self.n as f64;
        let mut row: Vec<(u64, f64)> = Vec::new();
        for b in 0..self.n {
            let y = x ^ (1u64 << b);
            match self.locate(y) {
                None => row.push((y, 1.0 / nf)),
                Some((l, i)) => {
                    let t = self.trap(l);
                    for (k, &z) in t.chain.boundary.iter().enumerate() {
                        let p = t.exit_law[(i, k)];
                        if p > 0.0 {
                            row.push((z, p / nf));
                        }
                    }
                }
            }
        }
        row.sort_by_key(|e| e.0);
        let mut merged: Vec<(u64, f64)> = Vec::with_capacity(row.len());
        for (v, p) in row {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        merged
    }

    /// S_n°(t) sampled by running J° directly for ⌊a_n t⌋ steps.
    pub fn direct_fecp(&self, t: f64, rng: &mut RngStream) -> f64 {
        let k = libm::floor(self.env.scaling.a_n as f64 * t) as u64;
        if k == 0 {
            return 0.0;
        }
        let mut x = self.sample_initial(rng);
        let mut total = 0.0;
        for j in 0..k {
            total += rng.exp1() / self.holding_param(x);
            if j + 1 < k {
                x = self.step_effective(x, EffectiveMode::Direct, rng);
            }
        }
        total / self.env.scaling.c_n
    }

    /// b_n⁻¹ Σ Λ† over the first k†(t) steps of J†, for each horizon in `ts`
    /// (sorted); the horizons share one path.
    pub fn direct_becp_path(&self, ts: &[f64], b_n: f64, rng: &mut RngStream) -> Vec<f64> {
        let a = self.env.scaling.a_n as f64;
        let mut out = Vec::with_capacity(ts.len());
        let mut x = self.sample_initial(rng);
        let mut visits = 0u64;
        let mut acc = 0u64;
        for &t in ts {
            let target = libm::floor(a * t) as u64;
            while visits < target {
                visits += 1;
                if visits == target {
                    break;
                }
                let y = x ^ (1u64 << rng.below(self.n as u64));
                if self.in_v_circ(y) {
                    x = y;
                } else {
                    let s = self.sojourn_at(y, rng);
                    acc += s.steps;
                    x = s.exit;
                }
            }
            out.push(acc as f64 / b_n);
        }
        out
    }

    pub fn direct_becp(&self, t: f64, b_n: f64, rng: &mut RngStream) -> f64 {
        self.direct_becp_path(&[t], b_n, rng)[0]
    }

    /// Monte Carlo estimate of P(C_n(t, s) ≥ 1 − ρ) over `replicas` streams.
    pub fn correlation_probability(&self, t: f64, s: f64, rho: f64, replicas: u64, seed: u64) -> CorrelationEstimate {
        let mut hits = 0;
        for r in 0..replicas {
            let mut rng = RngStream::new(seed, r);
            if self.sample_overlap(t, s, &mut rng) >= 1.0 - rho {
                hits += 1;
            }
        }
        CorrelationEstimate::from_counts(hits, replicas)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationEstimate {
    pub p_hat: f64,
    pub lo: f64,
    pub hi: f64,
    pub hits: u64,
    pub replicas: u64,
}

impl CorrelationEstimate {
    pub fn from_counts(hits: u64, replicas: u64) -> Self {
        let (lo, hi) = wilson_interval(hits, replicas, 2.5758293035489);
        CorrelationEstimate { p_hat: hits as f64 / replicas.max(1) as f64, lo, hi, hits, replicas }
    }
}

#[derive(Clone, Debug)]
pub struct ExitLawReport {
    pub boundary: Vec<u64>,
    pub phi: Mat,
    /// exit law from the first vertex of the component
    pub reference: Vec<f64>,
    /// max total variation between entry vertices and the reference
    pub spread: f64,
    /// m*(y)/Σm*
    pub formula: Vec<f64>,
    pub row_sums: Vec<f64>,
}
