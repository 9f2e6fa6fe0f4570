//! Limit objects and the environment-side estimators compared against them.

use alloc::vec;
use alloc::vec::Vec;

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::kinetics::{EffectiveMode, KernelView};
use crate::linalg::{mmatrix_solve, Mat};
use crate::params::beta_c;
use crate::rng::RngStream;
use crate::special::{gamma_fn, integrate, inv_norm_sf, log_norm_sf, norm_sf, reg_inc_beta};
use crate::spectral::absorption_tails_discrete;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain("alpha must lie in (0, 1)"))
    }
}

/// ν(u, ∞) = u^{−α} α Γ(α).
pub fn levy_tail(alpha: f64, u: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(u > 0.0) {
        return Err(Error::Domain("u must be positive"));
    }
    Ok(libm::pow(u, -alpha) * alpha * gamma_fn(alpha)?)
}

/// ψ(λ) = ∫(1 − e^{−λu}) ν(du) = (πα / sin πα) λ^α.
pub fn levy_laplace_exponent(alpha: f64, lambda: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if lambda < 0.0 {
        return Err(Error::Domain("lambda must be non-negative"));
    }
    let pi = core::f64::consts::PI;
    Ok(pi * alpha / libm::sin(pi * alpha) * libm::pow(lambda, alpha))
}

/// Tail of the back-end Lévy measure: index 2α(ε/2), ν†(u,∞) = u^{−2α}2αΓ(2α).
pub fn levy_dagger_tail(eps: f64, beta: f64, u: f64) -> Result<f64> {
    levy_tail(2.0 * beta_c(eps / 2.0) / beta, u)
}

/// Generalized arcsine law at w = t/(t+s): (sin απ/π) ∫₀^w u^{α−1}(1−u)^{−α} du.
pub fn arcsine_cdf(alpha: f64, w: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Domain("w must lie in [0, 1]"));
    }
    reg_inc_beta(alpha, 1.0 - alpha, w)
}

/// Apply `f(y, p)` over the row p°(x, ·) of the effective chain.
fn for_each_effective<F: FnMut(u64, f64)>(kv: &KernelView, x: u64, mut f: F) {
    let nf = kv.n() as f64;
    for b in 0..kv.n() {
        let y = x ^ (1u64 << b);
        match kv.locate(y) {
            None => f(y, 1.0 / nf),
            Some((l, i)) => {
                let t = kv.traps[l].as_ref().expect("component exceeds the solver cap");
                for (k, &z) in t.chain.boundary.iter().enumerate() {
                    f(z, t.exit_law[(i, k)] / nf);
                }
            }
        }
    }
}

fn v_circ_vertices<'k>(kv: &'k KernelView<'_>) -> impl Iterator<Item = u64> + 'k {
    (0..1u64 << kv.n()).filter(move |&x| kv.in_v_circ(x))
}

/// e^{−u c_n λ_n(x)}.
#[inline]
fn circ_weight(kv: &KernelView, x: u64, u: f64) -> f64 {
    let c = kv.env.scaling.c_n;
    libm::exp(-u * c * kv.holding_param(x))
}

/// e^{−u c_n / w_n(x)} = e^{−u/γ_n(x)}.
#[inline]
fn rem_weight(env: &Environment, x: u64, u: f64) -> f64 {
    libm::exp(-u * libm::exp(env.scaling.log_c_n - env.log_weight(x)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircTable {
    pub u: Vec<f64>,
    pub nu_circ: Vec<f64>,
    pub sigma_circ: Vec<f64>,
    pub nu_rem: Vec<f64>,
    pub sigma_rem: Vec<f64>,
    /// right side of the ν° vs ν^REM comparison
    pub lemma_rhs: Vec<f64>,
}

impl CircTable {
    pub fn lemma_violations(&self) -> usize {
        (0..self.u.len())
            .filter(|&i| libm::fabs(self.nu_circ[i] - self.nu_rem[i]) > self.lemma_rhs[i])
            .count()
    }
}

/// h^u(y) = Σ_x p°(y, x) e^{−u c_n λ_n(x)}.
pub fn h_circ(kv: &KernelView, y: u64, u: f64) -> f64 {
    let mut acc = 0.0;
    for_each_effective(kv, y, |x, p| acc += p * circ_weight(kv, x, u));
    acc
}

/// ν_n°, σ_n° and their untruncated counterparts on a u-grid (dense only).
pub fn estimator_nu_circ(kv: &KernelView, us: &[f64]) -> Result<CircTable> {
    let env = kv.env;
    if !env.is_dense() {
        return Err(Error::Capacity { n: env.n(), cap: 0 });
    }
    let n = env.n();
    let nf = n as f64;
    let size = 1u64 << n;
    let a_n = env.scaling.a_n as f64;
    let v_circ = kv.decomp.v_circ_size() as f64;
    let mut t = CircTable {
        u: us.to_vec(),
        nu_circ: vec![],
        sigma_circ: vec![],
        nu_rem: vec![],
        sigma_rem: vec![],
        lemma_rhs: vec![],
    };
    let p = &env.params;
    let eps_n = libm::log(a_n) / (nf * core::f64::consts::LN_2);
    let alpha_n = beta_c(eps_n) / p.beta;
    for &u in us {
        let mut nu = 0.0;
        let mut sig = 0.0;
        for y in v_circ_vertices(kv) {
            nu += circ_weight(kv, y, u);
            // Σ_x Σ_x' f(x) p°(x, y) p°(y, x') f(x') with p° symmetric
            let h = h_circ(kv, y, u);
            sig += h * h;
        }
        let rem: Vec<f64> = (0..size).map(|x| rem_weight(env, x, u)).collect();
        let mut nu_rem = 0.0;
        let mut sig_rem = 0.0;
        for x in 0..size {
            nu_rem += rem[x as usize];
            let h: f64 = (0..n).map(|b| rem[(x ^ (1u64 << b)) as usize]).sum::<f64>() / nf;
            sig_rem += h * h;
        }
        let nu_rem = a_n / size as f64 * nu_rem;
        t.nu_circ.push(a_n / v_circ * nu);
        t.sigma_circ.push(a_n / v_circ * sig);
        t.nu_rem.push(nu_rem);
        t.sigma_rem.push(a_n / size as f64 * sig_rem);
        t.lemma_rhs.push(
            2.0 * libm::pow(nf, -2.0 * p.c_star + 1.0) * nu_rem
                + 2.0 * a_n * libm::exp(-u * nf * nf)
                + 2.0 * libm::pow(nf, -p.c_star + 1.0 + 2.0 * alpha_n),
        );
    }
    Ok(t)
}

/// η_n^REM(ε) = (a_n/2ⁿ) Σ γ(1 − e^{−ε/γ}).
pub fn eta_rem(env: &Environment, eps: f64) -> Result<f64> {
    if !env.is_dense() {
        return Err(Error::Capacity { n: env.n(), cap: 0 });
    }
    let size = env.num_vertices();
    let mut acc = 0.0;
    for x in 0..size {
        let gamma = libm::exp(env.log_weight(x) - env.scaling.log_c_n);
        acc += gamma * -libm::expm1(-eps / gamma);
    }
    Ok(env.scaling.a_n as f64 / size as f64 * acc)
}

/// η_n°(ε) = (a_n/|V°|) Σ_{V°} c_n⁻¹λ⁻¹(1 − e^{−ε c_n λ}).
pub fn eta_circ(kv: &KernelView, eps: f64) -> Result<f64> {
    if !kv.env.is_dense() {
        return Err(Error::Capacity { n: kv.n(), cap: 0 });
    }
    let c = kv.env.scaling.c_n;
    let mut acc = 0.0;
    for x in v_circ_vertices(kv) {
        let cl = c * kv.holding_param(x);
        acc += -libm::expm1(-eps * cl) / cl;
    }
    Ok(kv.env.scaling.a_n as f64 / kv.decomp.v_circ_size() as f64 * acc)
}

/// Q^u(x) = P_x(T* > ⌊b_n u⌋) for every component, in component order.
pub fn q_tails(kv: &KernelView, b_n: f64, u: f64) -> Vec<Vec<f64>> {
    let i = libm::floor(b_n * u) as u64;
    kv.traps
        .iter()
        .map(|t| {
            let t = t.as_ref().expect("component exceeds the solver cap");
            absorption_tails_discrete(&t.chain, i)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarTable {
    pub u: Vec<f64>,
    pub nu_bar: Vec<f64>,
    pub sigma_bar_eq: Vec<f64>,
    pub sigma_bar_ne: Vec<f64>,
}

/// ν̄_n°, σ̄_n^= and σ̄_n^≠ on a u-grid.
pub fn estimator_nu_bar(kv: &KernelView, us: &[f64], b_n: f64) -> Result<BarTable> {
    let n = kv.n();
    let nf = n as f64;
    let scale = kv.env.scaling.a_n as f64 / libm::ldexp(1.0, n as i32);
    let comps = &kv.decomp.components;
    let mut out = BarTable { u: us.to_vec(), nu_bar: vec![], sigma_bar_eq: vec![], sigma_bar_ne: vec![] };
    for &u in us {
        let q = q_tails(kv, b_n, u);
        let mut nu = 0.0;
        let mut eq = 0.0;
        let mut ne = 0.0;
        for (l, c) in comps.iter().enumerate() {
            let s: f64 = q[l].iter().sum();
            nu += s;
            eq += s * s;
            for (i, &x) in c.vertices.iter().enumerate() {
                for b1 in 0..n {
                    for b2 in b1 + 1..n {
                        let y = x ^ (1u64 << b1) ^ (1u64 << b2);
                        if let Some((l2, j)) = kv.locate(y) {
                            if l2 != l {
                                // two common neighbours at distance 2
                                ne += 2.0 * q[l][i] * q[l2][j];
                            }
                        }
                    }
                }
            }
        }
        out.nu_bar.push(scale * nu);
        out.sigma_bar_eq.push(scale / nf * eq);
        out.sigma_bar_ne.push(scale / (nf * nf) * ne);
    }
    Ok(out)
}

/// h̄^u(y) = Σ_l Σ_{x∈C_l} p_n(y, x) Q^u(x) for y ∈ V°, given the tails.
pub fn h_bar(kv: &KernelView, y: u64, q: &[Vec<f64>]) -> f64 {
    let nf = kv.n() as f64;
    let mut acc = 0.0;
    for b in 0..kv.n() {
        if let Some((l, i)) = kv.locate(y ^ (1u64 << b)) {
            acc += q[l][i] / nf;
        }
    }
    acc
}

/// (C0): Σ_{V°} π°(x) e^{−v c_n λ_n(x)}.
pub fn condition_c0(kv: &KernelView, v: f64) -> Result<f64> {
    if !kv.env.is_dense() {
        return Err(Error::Capacity { n: kv.n(), cap: 0 });
    }
    let s: f64 = v_circ_vertices(kv).map(|x| circ_weight(kv, x, v)).sum();
    Ok(s / kv.decomp.v_circ_size() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathFunctionals {
    pub nu: f64,
    pub sigma: f64,
    pub nu_bar: f64,
    pub sigma_bar: f64,
}

/// ν^{J°,t}, σ^{J°,t}, ν̄^{J°,t}, σ̄^{J°,t} at level u along one J° path from π°.
pub fn path_functionals(kv: &KernelView, t: f64, u: f64, q: &[Vec<f64>], rng: &mut RngStream) -> PathFunctionals {
    let k = libm::floor(kv.env.scaling.a_n as f64 * t) as u64;
    let mut x = kv.sample_initial(rng);
    let mut out = PathFunctionals { nu: 0.0, sigma: 0.0, nu_bar: 0.0, sigma_bar: 0.0 };
    for j in 0..k {
        let h = h_circ(kv, x, u);
        let hb = h_bar(kv, x, q);
        out.nu += h;
        out.sigma += h * h;
        out.nu_bar += hb;
        out.sigma_bar += hb * hb;
        if j + 1 < k {
            x = kv.step_effective(x, EffectiveMode::Direct, rng);
        }
    }
    out
}

/// (A3): (k°(t)/|V°|) Σ_l Σ_x E_x(1{T* ≤ ε b_n} T*/b_n), exact.
pub fn condition_a3(kv: &KernelView, t: f64, eps: f64, b_n: f64) -> Result<f64> {
    let m = libm::floor(eps * b_n) as u64;
    let k = libm::floor(kv.env.scaling.a_n as f64 * t);
    let mut acc = 0.0;
    for tr in &kv.traps {
        let tr = tr.as_ref().ok_or(Error::Structure("component exceeds the solver cap"))?;
        let ch = &tr.chain;
        let size = ch.size();
        let tail_m = absorption_tails_discrete(ch, m);
        // Σ_{i<m} Qⁱ𝟙 = (I − Q)⁻¹(𝟙 − Q^m𝟙)
        let rhs = Mat { rows: size, cols: 1, data: tail_m.iter().map(|p| 1.0 - p).collect() };
        let partial = mmatrix_solve(&ch.q, &ch.q_exit, &rhs)?;
        for x in 0..size {
            acc += (partial.data[x] - m as f64 * tail_m[x]).max(0.0) / b_n;
        }
    }
    Ok(k / kv.decomp.v_circ_size() as f64 * acc)
}

/// Sequences of the two-vertex oracle integral at an analytic dimension n.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VnOracle {
    pub n: f64,
    pub beta: f64,
    pub abar: f64,
    pub log_bbar: f64,
    pub log_r_star: f64,
    pub alpha: f64,
}

impl VnOracle {
    /// ā = ⌊2^{ε̄n}⌋, b̄ from ā P(w ≥ b̄) = 1, r* from the truncation at c*.
    pub fn new(n: f64, beta: f64, c_star: f64, eps_bar: f64) -> Result<Self> {
        let abar = libm::floor(libm::exp2(eps_bar * n));
        if abar < 2.0 {
            return Err(Error::Domain("abar must be at least 2"));
        }
        let sbn = beta * libm::sqrt(n);
        let log_bbar = sbn * inv_norm_sf(1.0 / abar)?;
        let log_r_star = sbn * inv_norm_sf(libm::pow(n, -c_star))?;
        Ok(VnOracle { n, beta, abar, log_bbar, log_r_star, alpha: beta_c(eps_bar) / beta })
    }

    /// ln F_n(y) = ln ā + ln P(w ≥ y b̄).
    pub fn log_f(&self, log_y: f64) -> f64 {
        let z = (log_y + self.log_bbar) / (self.beta * libm::sqrt(self.n));
        libm::log(self.abar) + log_norm_sf(z)
    }

    /// E v_n(u) by integration by parts, in the variable s = ln y.
    pub fn expectation(&self, u: f64) -> Result<f64> {
        if !(u > 0.0) {
            return Err(Error::Domain("u must be positive"));
        }
        let s0 = self.log_r_star - self.log_bbar;
        let y0 = libm::exp(s0);
        let boundary = libm::exp(2.0 * self.log_f(s0) - u / y0);
        let lo = s0.max(libm::log(u / 1500.0));
        let hi = libm::log(u) + 60.0 / self.alpha.max(0.05);
        if hi <= lo {
            return Ok(boundary);
        }
        let integrand = |s: f64| {
            let y = libm::exp(s);
            libm::exp(libm::log(u / y) - u / y + 2.0 * self.log_f(s))
        };
        let mut total = 0.0;
        let pieces = 64;
        let width = (hi - lo) / pieces as f64;
        for k in 0..pieces {
            let a = lo + k as f64 * width;
            total += integrate(integrand, a, a + width, 1e-14, 1e-11)?;
        }
        Ok(boundary + total)
    }

    /// u^{−2α} 2α Γ(2α).
    pub fn limit(&self, u: f64) -> Result<f64> {
        let a2 = 2.0 * self.alpha;
        Ok(libm::pow(u, -a2) * a2 * gamma_fn(a2)?)
    }
}

/// E v_n(u; ā, b̄) for the given analytic n, β, c*, ε̄.
pub fn oracle_v_n(u: f64, n: f64, beta: f64, c_star: f64, eps_bar: f64) -> Result<f64> {
    VnOracle::new(n, beta, c_star, eps_bar)?.expectation(u)
}

/// F_n(v) = ā P(w ≥ v b̄) at a finite dimension, direct form.
pub fn oracle_f(o: &VnOracle, v: f64) -> f64 {
    o.abar * norm_sf((libm::log(v) + o.log_bbar) / (o.beta * libm::sqrt(o.n)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HillEstimate {
    pub alpha: f64,
    pub lo: f64,
    pub hi: f64,
    pub exceedances: usize,
    pub threshold: f64,
}

/// Hill estimator of the tail index over the top fraction of the sample.
pub fn hill_tail_index(samples: &[f64], top_fraction: f64) -> Result<HillEstimate> {
    if !(top_fraction > 0.0 && top_fraction < 1.0) {
        return Err(Error::Domain("top fraction must lie in (0, 1)"));
    }
    let mut xs: Vec<f64> = samples.iter().copied().filter(|v| *v > 0.0 && v.is_finite()).collect();
    let k = libm::floor(top_fraction * xs.len() as f64) as usize;
    if k < 100 {
        return Err(Error::Insufficient { have: k, need: 100 });
    }
    xs.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    let threshold = xs[k];
    let h: f64 = xs[..k].iter().map(|&x| libm::log(x / threshold)).sum::<f64>() / k as f64;
    if !(h > 0.0) {
        return Err(Error::Domain("degenerate sample above the threshold"));
    }
    let alpha = 1.0 / h;
    let half = 2.5758293035489 * alpha / libm::sqrt(k as f64);
    Ok(HillEstimate { alpha, lo: alpha - half, hi: alpha + half, exceedances: k, threshold })
}
