//! Absorbing chains on trap components: spectra, Perron pairs, tails, bounds.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::cloud::Component;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigen, Mat};

pub const SOLVER_CAP: usize = 64;

#[derive(Clone, Debug)]
pub struct AbsorbingChain {
    pub n: u32,
    pub beta: f64,
    pub vertices: Vec<u64>,
    pub h: Vec<f64>,
    pub boundary: Vec<u64>,
    /// p_n restricted to C (zero diagonal)
    pub q: Mat,
    /// Σ_{y∉C} p_n(x, y)
    pub q_exit: Vec<f64>,
    /// λ_n(x, y) inside C
    pub rates: Mat,
    /// λ_n(x)
    pub lambda: Vec<f64>,
    /// Σ_{y∉C} λ_n(x, y)
    pub kappa: Vec<f64>,
    /// L* + I
    pub r: Mat,
    pub mu_star: Vec<f64>,
    pub pi_star: Vec<f64>,
    /// p_n(x, b) for b in `boundary`
    pub to_boundary: Mat,
    pub rho0: f64,
    pub rho1: f64,
    pub rho_bar0: f64,
    pub rho_bar1: f64,
    pub theta_star: f64,
    pub theta_bar_star: f64,
    /// popcount parity of each vertex, the bipartite halves
    pub parity: Vec<bool>,
    /// internal edges as index pairs (i < j)
    pub edges: Vec<(usize, usize)>,
}

impl AbsorbingChain {
    /// Chain of the Metropolis dynamics killed on leaving `vertices`; every
    /// outside neighbour is taken to have H = 0.
    pub fn new(n: u32, beta: f64, vertices: Vec<u64>, h: Vec<f64>) -> Result<Self> {
        let size = vertices.len();
        if size > SOLVER_CAP {
            return Err(Error::SolverCap { size, cap: SOLVER_CAP });
        }
        if size < 2 || h.len() != size {
            return Err(Error::Structure("component needs at least two vertices"));
        }
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by_key(|&i| vertices[i]);
        let vertices: Vec<u64> = order.iter().map(|&i| vertices[i]).collect();
        let h: Vec<f64> = order.iter().map(|&i| h[i]).collect();
        let nf = n as f64;
        let idx = |x: u64| vertices.binary_search(&x).ok();

        let mut rates = Mat::zeros(size, size);
        let mut kappa = vec![0.0; size];
        let mut edges = Vec::new();
        let mut boundary_set = BTreeSet::new();
        for (i, &x) in vertices.iter().enumerate() {
            for b in 0..n {
                let y = x ^ (1u64 << b);
                match idx(y) {
                    Some(j) => {
                        rates[(i, j)] = libm::exp(-beta * (h[j] - h[i]).max(0.0)) / nf;
                        if i < j {
                            edges.push((i, j));
                        }
                    }
                    None => {
                        kappa[i] += libm::exp(-beta * (-h[i]).max(0.0)) / nf;
                        boundary_set.insert(y);
                    }
                }
            }
        }
        if !connected(size, &edges) {
            return Err(Error::Disconnected);
        }
        let boundary: Vec<u64> = boundary_set.into_iter().collect();
        let lambda: Vec<f64> = (0..size).map(|i| rates.row(i).iter().sum::<f64>() + kappa[i]).collect();

        let mut q = Mat::zeros(size, size);
        let mut r = rates.clone();
        let mut to_boundary = Mat::zeros(size, boundary.len());
        let mut q_exit = vec![0.0; size];
        for i in 0..size {
            for j in 0..size {
                q[(i, j)] = rates[(i, j)] / lambda[i];
            }
            r[(i, i)] = 1.0 - lambda[i];
            q_exit[i] = kappa[i] / lambda[i];
            let x = vertices[i];
            for b in 0..n {
                let y = x ^ (1u64 << b);
                if idx(y).is_none() {
                    let k = boundary.binary_search(&y).unwrap_or(0);
                    to_boundary[(i, k)] = libm::exp(-beta * (-h[i]).max(0.0)) / nf / lambda[i];
                }
            }
        }

        let h_min = h.iter().copied().fold(f64::INFINITY, f64::min);
        let h_max = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mu: Vec<f64> = h.iter().map(|&v| libm::exp(-beta * (v - h_min))).collect();
        let zmu: f64 = mu.iter().sum();
        let mu_star: Vec<f64> = mu.iter().map(|m| m / zmu).collect();
        let pi: Vec<f64> = (0..size).map(|i| mu_star[i] * lambda[i]).collect();
        let zpi: f64 = pi.iter().sum();
        let pi_star: Vec<f64> = pi.iter().map(|p| p / zpi).collect();

        let min_edge_max = edges
            .iter()
            .map(|&(i, j)| h[i].max(h[j]))
            .fold(f64::INFINITY, f64::min);
        let rho0 = libm::exp(-beta * min_edge_max);
        let rho1 = libm::exp(-beta * h_max);
        let rho_bar0 = libm::exp(-beta * h_min);
        let rho_bar1 = libm::exp(-beta * h_min + beta * h_max);
        let c = size as f64;
        let theta_star = 2.0 * beta * nf * libm::pow(c, 5.0) * rho0 / rho1;
        let theta_bar_star = 3.0 * beta * nf * nf * c * c * c * rho_bar1;
        let parity = vertices.iter().map(|x| x.count_ones() % 2 == 1).collect();

        Ok(AbsorbingChain {
            n,
            beta,
            vertices,
            h,
            boundary,
            q,
            q_exit,
            rates,
            lambda,
            kappa,
            r,
            mu_star,
            pi_star,
            to_boundary,
            rho0,
            rho1,
            rho_bar0,
            rho_bar1,
            theta_star,
            theta_bar_star,
            parity,
            edges,
        })
    }

    pub fn size(&self) -> usize {
        self.vertices.len()
    }

    pub fn index_of(&self, x: u64) -> Option<usize> {
        self.vertices.binary_search(&x).ok()
    }

    /// Largest violation of detailed balance for Q (w.r.t. π*) and R (w.r.t. μ*).
    pub fn reversibility_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.size() {
            for j in 0..self.size() {
                let dq = self.pi_star[i] * self.q[(i, j)] - self.pi_star[j] * self.q[(j, i)];
                let dr = self.mu_star[i] * self.r[(i, j)] - self.mu_star[j] * self.r[(j, i)];
                worst = worst.max(libm::fabs(dq)).max(libm::fabs(dr));
            }
        }
        worst
    }
}

fn connected(size: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); size];
    for &(i, j) in edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut seen = vec![false; size];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.iter().all(|&s| s)
}

pub fn build_absorbing(env: &Environment, comp: &Component) -> Result<AbsorbingChain> {
    let h = comp.vertices.iter().map(|&x| env.hamiltonian(x)).collect();
    AbsorbingChain::new(env.n(), env.params.beta, comp.vertices.clone(), h)
}

#[derive(Clone, Debug)]
pub struct SpectralReport {
    /// eigenvalues of −L*, ascending
    pub varsigma: Vec<f64>,
    /// columns: right eigenvectors of −L*, orthonormal in ℓ²(μ*)
    pub cont_vectors: Mat,
    pub cont_u: Vec<f64>,
    pub cont_v: Vec<f64>,
    /// eigenvalues of Q, descending
    pub vartheta: Vec<f64>,
    /// 1 − ϑ_k computed without cancellation
    pub gaps: Vec<f64>,
    /// columns: right eigenvectors of Q, orthonormal in ℓ²(π*)
    pub disc_vectors: Mat,
    pub disc_u: Vec<f64>,
    pub disc_v: Vec<f64>,
    /// Σu over odd-parity and even-parity vertices
    pub half_sums: (f64, f64),
    pub residual_cont: f64,
    pub residual_disc: f64,
}

struct Eig {
    vals: Vec<f64>,
    /// right eigenvectors f_k = φ_k/√m in columns
    vecs: Mat,
}

/// Symmetrize A (reversible w.r.t. m) and diagonalize; order by `ascending`.
fn reversible_eigen(a: &Mat, m: &[f64], ascending: bool) -> Result<Eig> {
    let size = a.rows;
    let mut s = Mat::zeros(size, size);
    for i in 0..size {
        for j in 0..size {
            let v = if i == j {
                a[(i, i)]
            } else {
                let p = a[(i, j)] * a[(j, i)];
                let sign = if a[(i, j)] < 0.0 { -1.0 } else { 1.0 };
                sign * libm::sqrt(p.max(0.0))
            };
            s[(i, j)] = v;
        }
    }
    let (vals, phi) = jacobi_eigen(&s)?;
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&x, &y| {
        let c = vals[x].partial_cmp(&vals[y]).unwrap_or(core::cmp::Ordering::Equal);
        if ascending {
            c
        } else {
            c.reverse()
        }
    });
    let mut vecs = Mat::zeros(size, size);
    let mut sorted = Vec::with_capacity(size);
    for (k, &o) in order.iter().enumerate() {
        sorted.push(vals[o]);
        for i in 0..size {
            vecs[(i, k)] = phi[(i, o)] / libm::sqrt(m[i]);
        }
    }
    Ok(Eig { vals: sorted, vecs })
}

/// Dirichlet form Σ_edges m(i)K(i,j)(f_i − f_j)² + Σ m(i)k(i) f_i², over Σ m f².
fn dirichlet_quotient(edges: &[(usize, usize)], k: &Mat, kill: &[f64], m: &[f64], f: &[f64]) -> f64 {
    let mut num = 0.0;
    for &(i, j) in edges {
        let d = f[i] - f[j];
        num += m[i] * k[(i, j)] * d * d;
    }
    let mut den = 0.0;
    for i in 0..f.len() {
        num += m[i] * kill[i] * f[i] * f[i];
        den += m[i] * f[i] * f[i];
    }
    num / den
}

fn perron_pair(f0: &[f64], m: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let sign = if f0.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let f: Vec<f64> = f0.iter().map(|v| v * sign).collect();
    let su: f64 = f.iter().zip(m).map(|(a, b)| a * b).sum();
    let suv: f64 = f.iter().zip(m).map(|(a, b)| a * a * b).sum();
    let u = f.iter().zip(m).map(|(a, b)| a * b / su).collect();
    let v = f.iter().map(|a| a * su / suv).collect();
    (u, v)
}

pub fn eigensolve(chain: &AbsorbingChain) -> Result<SpectralReport> {
    let size = chain.size();
    // continuous: −L* = diag(λ) − rates
    let mut gen = Mat::zeros(size, size);
    for i in 0..size {
        for j in 0..size {
            gen[(i, j)] = if i == j { chain.lambda[i] } else { -chain.rates[(i, j)] };
        }
    }
    let ce = reversible_eigen(&gen, &chain.mu_star, true)?;
    let mut varsigma = ce.vals.clone();
    let col = |m: &Mat, k: usize| -> Vec<f64> { (0..size).map(|i| m[(i, k)]).collect() };
    for (k, s) in varsigma.iter_mut().enumerate() {
        let f = col(&ce.vecs, k);
        *s = dirichlet_quotient(&chain.edges, &chain.rates, &chain.kappa, &chain.mu_star, &f);
    }
    let (cont_u, cont_v) = perron_pair(&col(&ce.vecs, 0), &chain.mu_star);
    let gv = gen.mul_vec(&cont_v);
    let residual_cont = gv
        .iter()
        .zip(&cont_v)
        .map(|(a, b)| libm::fabs(a - varsigma[0] * b))
        .fold(0.0, f64::max);

    let de = reversible_eigen(&chain.q, &chain.pi_star, false)?;
    let mut gaps = Vec::with_capacity(size);
    for k in 0..size {
        let f = col(&de.vecs, k);
        gaps.push(dirichlet_quotient(&chain.edges, &chain.q, &chain.q_exit, &chain.pi_star, &f));
    }
    let mut vartheta: Vec<f64> = de.vals.clone();
    vartheta[0] = 1.0 - gaps[0];
    let (disc_u, disc_v) = perron_pair(&col(&de.vecs, 0), &chain.pi_star);
    let qv = chain.q.mul_vec(&disc_v);
    let residual_disc = qv
        .iter()
        .zip(&disc_v)
        .map(|(a, b)| libm::fabs(a - vartheta[0] * b))
        .fold(0.0, f64::max);
    let mut half_sums = (0.0, 0.0);
    for i in 0..size {
        if chain.parity[i] {
            half_sums.0 += disc_u[i];
        } else {
            half_sums.1 += disc_u[i];
        }
    }
    Ok(SpectralReport {
        varsigma,
        cont_vectors: ce.vecs,
        cont_u,
        cont_v,
        vartheta,
        gaps,
        disc_vectors: de.vecs,
        disc_u,
        disc_v,
        half_sums,
        residual_cont,
        residual_disc,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundFlags {
    /// ς(0) ≤ |C|/ϱ̄(0)
    pub varsigma0_upper: bool,
    /// ς(1) ≥ 1/(n|C|²ϱ̄(1))
    pub varsigma1_lower: bool,
    /// ϑ(0) ≤ 1 − ½/(1 + ϱ(0)|C|/n)
    pub vartheta0_upper: bool,
    /// ϑ(1) ≤ 1 − ϱ(1)/[n|C|³(1 + ϱ(0)|C|/n)]
    pub vartheta1_upper: bool,
    /// ς(0)·ϱ̄(0), the lower side of the first estimate as a ratio
    pub varsigma0_ratio: f64,
    /// (1 − ϑ(0))(1 + 2ϱ(0)/(n|C|)), the lower side of the discrete estimate
    pub vartheta0_ratio: f64,
}

impl BoundFlags {
    pub fn all_ok(&self) -> bool {
        self.varsigma0_upper && self.varsigma1_lower && self.vartheta0_upper && self.vartheta1_upper
    }

    /// Compact code for CSV output, one letter per asserted direction.
    pub fn code(&self) -> alloc::string::String {
        let mut s = alloc::string::String::new();
        for (ok, c) in [
            (self.varsigma0_upper, 'a'),
            (self.varsigma1_lower, 'b'),
            (self.vartheta0_upper, 'c'),
            (self.vartheta1_upper, 'd'),
        ] {
            s.push(if ok { c } else { c.to_ascii_uppercase() });
        }
        s
    }
}

pub fn eigenvalue_bound_check(chain: &AbsorbingChain, rep: &SpectralReport) -> BoundFlags {
    const TOL: f64 = 1e-9;
    let c = chain.size() as f64;
    let n = chain.n as f64;
    let depth = 1.0 + chain.rho0 * c / n;
    let s1 = rep.varsigma.get(1).copied().unwrap_or(f64::INFINITY);
    let g1 = rep.gaps.get(1).copied().unwrap_or(f64::INFINITY);
    BoundFlags {
        varsigma0_upper: rep.varsigma[0] <= c / chain.rho_bar0 * (1.0 + TOL),
        varsigma1_lower: s1 >= 1.0 / (n * c * c * chain.rho_bar1) * (1.0 - TOL),
        vartheta0_upper: rep.gaps[0] >= 0.5 / depth * (1.0 - TOL),
        vartheta1_upper: g1 >= chain.rho1 / (n * c * c * c * depth) * (1.0 - TOL),
        varsigma0_ratio: rep.varsigma[0] * chain.rho_bar0,
        vartheta0_ratio: rep.gaps[0] * (1.0 + 2.0 * chain.rho0 / (n * c)),
    }
}

/// P_x(T* > i) for every x: row sums of Qⁱ.
pub fn absorption_tails_discrete(chain: &AbsorbingChain, i: u64) -> Vec<f64> {
    let size = chain.size();
    if i <= 4096 {
        let mut v = vec![1.0; size];
        for _ in 0..i {
            v = chain.q.mul_vec(&v);
        }
        v
    } else {
        chain.q.pow(i).row_sums()
    }
}

pub fn absorption_tail_discrete(chain: &AbsorbingChain, x: usize, i: u64) -> f64 {
    absorption_tails_discrete(chain, i)[x]
}

/// P_x(T̂ > t) for every x: row sums of e^{tL*} (real t ≥ 0).
pub fn absorption_tails_continuous(chain: &AbsorbingChain, rep: &SpectralReport, t: f64) -> Vec<f64> {
    let size = chain.size();
    let f = &rep.cont_vectors;
    let mut out = vec![0.0; size];
    for k in 0..size {
        let ck: f64 = (0..size).map(|y| chain.mu_star[y] * f[(y, k)]).sum();
        let e = libm::exp(-rep.varsigma[k] * t);
        for (x, o) in out.iter_mut().enumerate() {
            *o += e * f[(x, k)] * ck;
        }
    }
    out.iter().map(|p| p.clamp(0.0, 1.0)).collect()
}

pub fn absorption_tail_continuous(chain: &AbsorbingChain, rep: &SpectralReport, x: usize, t: f64) -> f64 {
    absorption_tails_continuous(chain, rep, t)[x]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailReport {
    pub exact: f64,
    pub perron_approx: f64,
    pub threshold: f64,
}

/// Perron limit of the discrete tail with the period-2 projector weight.
pub fn discrete_perron_approx(chain: &AbsorbingChain, rep: &SpectralReport, x: usize, i: u64) -> f64 {
    let same = chain.parity[x];
    let want = if i % 2 == 0 { same } else { !same };
    let half: f64 = (0..chain.size())
        .filter(|&j| chain.parity[j] == want)
        .map(|j| rep.disc_u[j])
        .sum();
    2.0 * half * rep.disc_v[x] * libm::pow(rep.vartheta[0], i as f64)
}

pub fn discrete_tail_report(chain: &AbsorbingChain, rep: &SpectralReport, x: usize, i: u64) -> TailReport {
    TailReport {
        exact: absorption_tail_discrete(chain, x, i),
        perron_approx: discrete_perron_approx(chain, rep, x, i),
        threshold: chain.theta_star,
    }
}

pub fn continuous_tail_report(chain: &AbsorbingChain, rep: &SpectralReport, x: usize, t: f64) -> TailReport {
    TailReport {
        exact: absorption_tail_continuous(chain, rep, x, t),
        perron_approx: rep.cont_v[x] * libm::exp(-t * rep.varsigma[0]),
        threshold: chain.theta_bar_star,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectorRow {
    pub lhs: f64,
    pub rhs: f64,
}

/// Both sides of the Perron projector estimate at power m for every state.
pub fn perron_projector_bound(a: &Mat, pi_a: &[f64], m: u32) -> Result<Vec<ProjectorRow>> {
    let size = a.rows;
    if size == 0 || pi_a.len() != size || a.data.iter().any(|&v| v < 0.0) {
        return Err(Error::Structure("need a nonnegative square matrix and a matching measure"));
    }
    let z: f64 = pi_a.iter().sum();
    let pi: Vec<f64> = pi_a.iter().map(|p| p / z).collect();
    let mut edges = Vec::new();
    for i in 0..size {
        for j in i + 1..size {
            if a[(i, j)] > 0.0 || a[(j, i)] > 0.0 {
                edges.push((i, j));
            }
        }
    }
    if !connected(size, &edges) {
        return Err(Error::Structure("matrix is not irreducible"));
    }
    // two-colour the support; a clean colouring with empty diagonal is period 2
    let mut colour = vec![u8::MAX; size];
    colour[0] = 0;
    let mut stack = vec![0];
    let mut bipartite = (0..size).all(|i| a[(i, i)] == 0.0);
    while let Some(i) = stack.pop() {
        for j in 0..size {
            if i != j && (a[(i, j)] > 0.0 || a[(j, i)] > 0.0) {
                if colour[j] == u8::MAX {
                    colour[j] = 1 - colour[i];
                    stack.push(j);
                } else if colour[j] == colour[i] {
                    bipartite = false;
                }
            }
        }
    }
    let eig = reversible_eigen(a, &pi, false)?;
    let lam0 = eig.vals[0];
    let f0: Vec<f64> = (0..size).map(|i| eig.vecs[(i, 0)]).collect();
    let (u, v) = perron_pair(&f0, &pi);
    let lam1 = if bipartite {
        (1..size.saturating_sub(1)).map(|k| libm::fabs(eig.vals[k])).fold(0.0, f64::max)
    } else {
        (1..size).map(|k| libm::fabs(eig.vals[k])).fold(0.0, f64::max)
    };
    let am = a.pow(m as u64);
    let half_u = |c: u8| -> f64 { (0..size).filter(|&j| colour[j] == c).map(|j| u[j]).sum() };
    let rows = (0..size)
        .map(|i| {
            let (sum, target) = if bipartite {
                let c = if m % 2 == 0 { colour[i] } else { 1 - colour[i] };
                let s: f64 = (0..size).filter(|&j| colour[j] == c).map(|j| am[(i, j)]).sum();
                (s, 2.0 * half_u(c) * libm::pow(lam0, m as f64) * v[i])
            } else {
                (am.row(i).iter().sum(), libm::pow(lam0, m as f64) * v[i])
            };
            ProjectorRow {
                lhs: libm::fabs(sum - target),
                rhs: libm::pow(lam1, m as f64) / libm::sqrt(pi[i]),
            }
        })
        .collect();
    Ok(rows)
}

/// Poincaré bound with BFS shortest paths: max_e ρ(e)⁻¹ Σ_{γ∋e} |γ| π(x)π(y),
/// ρ(e) = π(x)K(x, y). With `crude` every path length is replaced by N − 1.
pub fn canonical_path_bound(k: &Mat, pi: &[f64], crude: bool) -> Result<f64> {
    let size = k.rows;
    let mut adj = vec![Vec::new(); size];
    for i in 0..size {
        for j in 0..size {
            if i != j && k[(i, j)] > 0.0 {
                adj[i].push(j);
            }
        }
    }
    let z: f64 = pi.iter().sum();
    let pi: Vec<f64> = pi.iter().map(|p| p / z).collect();
    let mut load = Mat::zeros(size, size);
    for x in 0..size {
        let mut parent = vec![usize::MAX; size];
        parent[x] = x;
        let mut queue = vec![x];
        let mut head = 0;
        while head < queue.len() {
            let i = queue[head];
            head += 1;
            for &j in &adj[i] {
                if parent[j] == usize::MAX {
                    parent[j] = i;
                    queue.push(j);
                }
            }
        }
        if queue.len() != size {
            return Err(Error::Disconnected);
        }
        for y in x + 1..size {
            let mut path = Vec::new();
            let mut c = y;
            while c != x {
                path.push((parent[c], c));
                c = parent[c];
            }
            let len = if crude { (size - 1) as f64 } else { path.len() as f64 };
            let w = len * pi[x] * pi[y];
            for (a, b) in path {
                load[(a, b)] += w;
                load[(b, a)] += w;
            }
        }
    }
    let mut best: f64 = 0.0;
    for i in 0..size {
        for j in i + 1..size {
            if k[(i, j)] > 0.0 {
                best = best.max(load[(i, j)] / (pi[i] * k[(i, j)]));
            }
        }
    }
    Ok(best)
}

/// 1/(1 − λ₁) for a reversible stochastic kernel, λ₁ the second largest eigenvalue.
pub fn relaxation_time(k: &Mat, pi: &[f64]) -> Result<f64> {
    let size = k.rows;
    let z: f64 = pi.iter().sum();
    let pi: Vec<f64> = pi.iter().map(|p| p / z).collect();
    let eig = reversible_eigen(k, &pi, false)?;
    let mut edges = Vec::new();
    for i in 0..size {
        for j in i + 1..size {
            if k[(i, j)] > 0.0 {
                edges.push((i, j));
            }
        }
    }
    let f: Vec<f64> = (0..size).map(|i| eig.vecs[(i, 1)]).collect();
    let gap = dirichlet_quotient(&edges, k, &vec![0.0; size], &pi, &f);
    Ok(1.0 / gap)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxationReport {
    pub tau_cont: f64,
    pub bound_cont: f64,
    pub crude_cont: f64,
    pub tau_disc: f64,
    pub bound_disc: f64,
    pub crude_disc: f64,
}

/// Relaxation times of the stochastic completions of R and Q and their path bounds.
pub fn relaxation_bounds(chain: &AbsorbingChain) -> Result<RelaxationReport> {
    let size = chain.size();
    let mut rs = chain.r.clone();
    let mut qs = chain.q.clone();
    for i in 0..size {
        rs[(i, i)] += chain.kappa[i];
        qs[(i, i)] += chain.q_exit[i];
    }
    Ok(RelaxationReport {
        tau_cont: relaxation_time(&rs, &chain.mu_star)?,
        bound_cont: canonical_path_bound(&rs, &chain.mu_star, false)?,
        crude_cont: canonical_path_bound(&rs, &chain.mu_star, true)?,
        tau_disc: relaxation_time(&qs, &chain.pi_star)?,
        bound_disc: canonical_path_bound(&qs, &chain.pi_star, false)?,
        crude_disc: canonical_path_bound(&qs, &chain.pi_star, true)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FloorReport {
    pub min_v_cont: f64,
    pub log_floor_cont: f64,
    pub min_v_disc: f64,
    pub log_floor_disc: f64,
}

impl FloorReport {
    pub fn ok(&self) -> bool {
        libm::log(self.min_v_cont) >= self.log_floor_cont && libm::log(self.min_v_disc) >= self.log_floor_disc
    }
}

/// min v* against (1/ϱ̄(0))^{|C|} (continuous) and (1/ϱ(0))^{|C|} (discrete), on log scale.
pub fn perron_positivity_floor(chain: &AbsorbingChain, rep: &SpectralReport) -> FloorReport {
    let c = chain.size() as f64;
    FloorReport {
        min_v_cont: rep.cont_v.iter().copied().fold(f64::INFINITY, f64::min),
        log_floor_cont: -c * libm::log(chain.rho_bar0),
        min_v_disc: rep.disc_v.iter().copied().fold(f64::INFINITY, f64::min),
        log_floor_disc: -c * libm::log(chain.rho0),
    }
}
