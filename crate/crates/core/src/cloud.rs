//! Decomposition of the occupied level set into isolated vertices and components.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::rng::RngStream;
use crate::special::{inv_norm_sf, wilson_interval};

const ISOLATED: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub vertices: Vec<u64>,
    pub internal_edges: Vec<(u64, u64)>,
    pub boundary: Vec<u64>,
    /// number of component neighbours of each boundary vertex (n·m*)
    pub boundary_counts: Vec<u32>,
}

impl Component {
    pub fn size(&self) -> usize {
        self.vertices.len()
    }

    pub fn index_of(&self, x: u64) -> Option<usize> {
        self.vertices.binary_search(&x).ok()
    }

    pub fn boundary_index(&self, x: u64) -> Option<usize> {
        self.boundary.binary_search(&x).ok()
    }

    pub fn m_star(&self, i: usize, n: u32) -> f64 {
        self.boundary_counts[i] as f64 / n as f64
    }

    pub fn outgoing_edges(&self) -> u64 {
        self.boundary_counts.iter().map(|&c| c as u64).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Site {
    Unoccupied,
    Isolated,
    Trap(usize),
}

#[derive(Clone, Debug)]
pub struct CloudDecomposition {
    pub n: u32,
    /// level ρ; `None` means ρ_n^⋆
    pub rho: Option<f64>,
    /// occupied ⇔ g ≤ −level
    pub level: f64,
    pub isolated: Vec<u64>,
    pub components: Vec<Component>,
    pub n_unoccupied: u64,
    pub histogram: BTreeMap<usize, u64>,
    occupied: Vec<u64>,
    labels: Vec<u32>,
}

impl CloudDecomposition {
    pub fn occupied_vertices(&self) -> &[u64] {
        &self.occupied
    }

    pub fn occupied_count(&self) -> u64 {
        self.occupied.len() as u64
    }

    #[inline]
    pub fn classify(&self, x: u64) -> Site {
        match self.occupied.binary_search(&x) {
            Err(_) => Site::Unoccupied,
            Ok(i) if self.labels[i] == ISOLATED => Site::Isolated,
            Ok(i) => Site::Trap(self.labels[i] as usize),
        }
    }

    #[inline]
    pub fn trap_of(&self, x: u64) -> Option<usize> {
        match self.classify(x) {
            Site::Trap(l) => Some(l),
            _ => None,
        }
    }

    pub fn component_vertex_total(&self) -> u64 {
        self.components.iter().map(|c| c.size() as u64).sum()
    }

    /// |V°| = 2ⁿ − Σ|C|.
    pub fn v_circ_size(&self) -> u64 {
        (1u64 << self.n) - self.component_vertex_total()
    }

    pub fn max_component_size(&self) -> usize {
        self.components.iter().map(|c| c.size()).max().unwrap_or(0)
    }

    /// Partition check: N + I + Σ|C| = 2ⁿ with disjoint parts.
    pub fn check_partition(&self) -> bool {
        let total = self.n_unoccupied + self.isolated.len() as u64 + self.component_vertex_total();
        let mut seen: Vec<u64> = self.isolated.clone();
        for c in &self.components {
            seen.extend_from_slice(&c.vertices);
        }
        seen.sort_unstable();
        let disjoint = seen.windows(2).all(|w| w[0] != w[1]);
        total == 1u64 << self.n && disjoint && seen == self.occupied
    }
}

/// Decompose a dense environment at level ρ (default ρ_n^⋆).
pub fn decompose(env: &Environment, rho: Option<f64>) -> Result<CloudDecomposition> {
    let field = env.field().ok_or(Error::Capacity { n: env.n(), cap: 0 })?;
    let level = match rho {
        None => env.scaling.u_n,
        Some(r) => level_for_rho(&env.params, r)?,
    };
    let occupied: Vec<u64> = field
        .iter()
        .enumerate()
        .filter(|(_, &g)| g <= -level)
        .map(|(x, _)| x as u64)
        .collect();
    Ok(decompose_sorted(env.n(), occupied, rho, level))
}

/// Decompose an explicit occupied vertex list (lazy probing).
pub fn decompose_vertices(n: u32, vertices: &[u64]) -> CloudDecomposition {
    let mut occ = vertices.to_vec();
    occ.sort_unstable();
    occ.dedup();
    decompose_sorted(n, occ, None, f64::NAN)
}

fn level_for_rho(p: &ModelParams, rho: f64) -> Result<f64> {
    let q = libm::exp2(-rho * p.n as f64);
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain("2^{-rho n} must lie in (0, 1)"));
    }
    inv_norm_sf(q)
}

fn decompose_sorted(n: u32, occupied: Vec<u64>, rho: Option<f64>, level: f64) -> CloudDecomposition {
    let m = occupied.len();
    let mut labels = vec![ISOLATED; m];
    let mut visited = vec![false; m];
    let mut isolated = Vec::new();
    let mut components = Vec::new();
    let mut queue = Vec::new();
    for start in 0..m {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        queue.clear();
        queue.push(start);
        let mut head = 0;
        while head < queue.len() {
            let i = queue[head];
            head += 1;
            let x = occupied[i];
            for b in 0..n {
                if let Ok(j) = occupied.binary_search(&(x ^ (1u64 << b))) {
                    if !visited[j] {
                        visited[j] = true;
                        queue.push(j);
                    }
                }
            }
        }
        if queue.len() == 1 {
            isolated.push(occupied[start]);
            continue;
        }
        let id = components.len() as u32;
        let mut verts: Vec<u64> = queue.iter().map(|&i| occupied[i]).collect();
        for &i in &queue {
            labels[i] = id;
        }
        verts.sort_unstable();
        components.push(build_component(n, verts));
    }
    let mut histogram = BTreeMap::new();
    for c in &components {
        *histogram.entry(c.size()).or_insert(0) += c.size() as u64;
    }
    CloudDecomposition {
        n,
        rho,
        level,
        isolated,
        components,
        n_unoccupied: (1u64 << n) - m as u64,
        histogram,
        occupied,
        labels,
    }
}

fn build_component(n: u32, vertices: Vec<u64>) -> Component {
    let mut internal_edges = Vec::new();
    let mut outside: BTreeMap<u64, u32> = BTreeMap::new();
    for &x in &vertices {
        for b in 0..n {
            let y = x ^ (1u64 << b);
            if vertices.binary_search(&y).is_ok() {
                if x < y {
                    internal_edges.push((x, y));
                }
            } else {
                *outside.entry(y).or_insert(0) += 1;
            }
        }
    }
    let (boundary, boundary_counts) = outside.into_iter().unzip();
    Component { vertices, internal_edges, boundary, boundary_counts }
}

/// Quadratic-time union–find oracle; components sorted by smallest vertex.
pub fn connected_components_brute(vertices: &[u64], _n: u32) -> Vec<Vec<u64>> {
    let m = vertices.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..m {
        for j in i + 1..m {
            if (vertices[i] ^ vertices[j]).count_ones() == 1 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for i in 0..m {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(vertices[i]);
    }
    let mut out: Vec<Vec<u64>> = groups
        .into_values()
        .map(|mut g| {
            g.sort_unstable();
            g.dedup();
            g
        })
        .collect();
    out.sort();
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CensusRow {
    pub stat: &'static str,
    pub observed: f64,
    pub expected: f64,
    pub zscore: f64,
}

/// Exact independence expectations for the cloud at ρ_n^⋆.
pub fn census_expectations(p: &ModelParams) -> [(&'static str, f64); 4] {
    let n = p.n as f64;
    let q = p.occupation_prob();
    let v = libm::exp2(n);
    let keep = libm::pow(1.0 - q, n);
    [
        ("isolated", v * q * keep),
        ("occupied", v * q),
        ("component_vertices", v * q * (1.0 - keep)),
        ("size2_vertices", n * q * q * libm::pow(1.0 - q, 2.0 * (n - 1.0)) * v),
    ]
}

pub fn census_check(decomp: &CloudDecomposition, p: &ModelParams) -> Vec<CensusRow> {
    let q = p.occupation_prob();
    let observed = [
        decomp.isolated.len() as f64,
        decomp.occupied_count() as f64,
        decomp.component_vertex_total() as f64,
        *decomp.histogram.get(&2).unwrap_or(&0) as f64,
    ];
    census_expectations(p)
        .iter()
        .zip(observed)
        .map(|(&(stat, expected), obs)| {
            // binomial variance for the occupied count, cluster-inflated Poisson otherwise
            let var = match stat {
                "occupied" => expected * (1.0 - q),
                "isolated" => expected,
                _ => 2.0 * expected,
            };
            let zscore = if var > 0.0 { (obs - expected) / libm::sqrt(var) } else { 0.0 };
            CensusRow { stat, observed: obs, expected, zscore }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryStats {
    pub boundary_size: usize,
    pub min_m_star: f64,
    pub max_m_star: f64,
    pub outgoing_edges: u64,
    /// |∂C|/(n|C|), the lower side of the boundary estimate reported as a ratio
    pub boundary_ratio: f64,
}

pub fn boundary_stats(c: &Component, n: u32) -> BoundaryStats {
    let min = c.boundary_counts.iter().copied().min().unwrap_or(0);
    let max = c.boundary_counts.iter().copied().max().unwrap_or(0);
    BoundaryStats {
        boundary_size: c.boundary.len(),
        min_m_star: min as f64 / n as f64,
        max_m_star: max as f64 / n as f64,
        outgoing_edges: c.outgoing_edges(),
        boundary_ratio: c.boundary.len() as f64 / (n as f64 * c.size() as f64),
    }
}

pub fn size_histogram(decomp: &CloudDecomposition) -> BTreeMap<usize, u64> {
    decomp.histogram.clone()
}

/// First time i ≥ 1 at which a simple random walk from x enters the occupied
/// set minus x; `None` if not within `lmax` steps.
pub fn srw_hitting_time(env: &Environment, x: u64, lmax: u64, rng: &mut RngStream) -> Option<u64> {
    let n = env.n() as u64;
    let mut y = x;
    for i in 1..=lmax {
        y ^= 1u64 << rng.below(n);
        if y != x && env.occupied(y) {
            return Some(i);
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeEstimate {
    pub p_hat: f64,
    pub lo: f64,
    pub hi: f64,
    pub replicas: u64,
}

/// Estimates of P_x(T ≥ l) for every l in `ls` from the same coupled replicas.
pub fn srw_hitting_curve(env: &Environment, x: u64, ls: &[u64], replicas: u64, seed: u64) -> Vec<ProbeEstimate> {
    let lmax = ls.iter().copied().max().unwrap_or(0);
    let times: Vec<Option<u64>> = (0..replicas)
        .map(|r| {
            let mut rng = RngStream::new(seed, r);
            srw_hitting_time(env, x, lmax, &mut rng)
        })
        .collect();
    ls.iter()
        .map(|&l| {
            let k = times.iter().filter(|t| t.map_or(true, |t| t >= l)).count() as u64;
            let (lo, hi) = wilson_interval(k, replicas, 3.0);
            ProbeEstimate { p_hat: k as f64 / replicas as f64, lo, hi, replicas }
        })
        .collect()
}

pub fn srw_hitting_probe(env: &Environment, x: u64, l: u64, replicas: u64, seed: u64) -> ProbeEstimate {
    srw_hitting_curve(env, x, &[l], replicas, seed)[0]
}
