use proptest::prelude::*;
use trem_core::cloud::{
    boundary_stats, census_check, census_expectations, connected_components_brute, decompose, decompose_vertices,
    size_histogram, srw_hitting_curve, srw_hitting_probe, Site,
};
use trem_core::env::Environment;
use trem_core::params::ModelParams;

fn env(n: u32, c_star: f64, seed: u64) -> Environment {
    Environment::dense(ModelParams::new(n, c_star, 1.0, 0.5, seed).unwrap()).unwrap()
}

/// Components from decompose (isolated vertices as singletons), sorted.
fn all_groups(n: u32, occ: &[u64]) -> Vec<Vec<u64>> {
    let d = decompose_vertices(n, occ);
    let mut out: Vec<Vec<u64>> = d.isolated.iter().map(|&x| vec![x]).collect();
    out.extend(d.components.iter().map(|c| c.vertices.clone()));
    out.sort();
    out
}

#[test]
fn empty_occupancy() {
    let d = decompose_vertices(6, &[]);
    assert!(d.components.is_empty() && d.isolated.is_empty());
    assert_eq!(d.n_unoccupied, 64);
    assert!(size_histogram(&d).is_empty());
    assert!(d.check_partition());
}

#[test]
fn three_cube_examples() {
    let d = decompose_vertices(3, &[0b000, 0b001]);
    assert_eq!(d.components.len(), 1);
    assert_eq!(d.components[0].size(), 2);
    assert_eq!(d.components[0].boundary.len(), 4);
    assert!(d.isolated.is_empty());

    let d = decompose_vertices(3, &[0b000, 0b011]);
    assert!(d.components.is_empty());
    assert_eq!(d.isolated, vec![0b000, 0b011]);
    assert_eq!(d.classify(0b011), Site::Isolated);
    assert_eq!(d.classify(0b111), Site::Unoccupied);

    let d = decompose_vertices(3, &[0b000, 0b001, 0b011]);
    assert_eq!(d.components.len(), 1);
    assert_eq!(d.components[0].size(), 3);
    assert_eq!(d.trap_of(0b001), Some(0));
}

#[test]
fn brute_force_examples() {
    assert_eq!(connected_components_brute(&[0b000, 0b001, 0b011], 3), vec![vec![0, 1, 3]]);
    assert_eq!(connected_components_brute(&[5], 3), vec![vec![5]]);
}

#[test]
fn decompose_matches_brute_force() {
    for seed in 0..100 {
        let e = env(10, 2.05, seed);
        let d = decompose(&e, None).unwrap();
        assert!(d.check_partition());
        let occ: Vec<u64> = (0..1024).filter(|&x| e.occupied(x)).collect();
        assert_eq!(d.occupied_vertices(), &occ[..]);
        assert_eq!(all_groups(10, &occ), connected_components_brute(&occ, 10), "seed {seed}");
    }
}

#[test]
fn lazy_environment_needs_vertex_list() {
    let lazy = Environment::lazy(ModelParams::new(30, 3.0, 1.0, 0.5, 1).unwrap()).unwrap();
    assert!(decompose(&lazy, None).is_err());
}

#[test]
fn explicit_level() {
    let e = env(12, 3.0, 4);
    let star = decompose(&e, None).unwrap();
    let low = decompose(&e, Some(0.2)).unwrap();
    // a larger ρ is a higher threshold and so a smaller occupied set
    let high = decompose(&e, Some(0.9)).unwrap();
    assert!(low.check_partition() && high.check_partition());
    assert!(high.occupied_count() <= low.occupied_count());
    assert!(star.level.is_finite());
    assert!(decompose(&e, Some(0.0)).is_err());
}

#[test]
fn size_two_boundary() {
    for n in [4u32, 7, 12] {
        let d = decompose_vertices(n, &[0, 1]);
        let b = boundary_stats(&d.components[0], n);
        assert_eq!(b.boundary_size, 2 * (n as usize - 1));
        assert_eq!(b.outgoing_edges, 2 * (n as u64 - 1));
        assert_eq!(b.min_m_star, 1.0 / n as f64);
        assert_eq!(b.max_m_star, 1.0 / n as f64);
    }
    // brute force at n=4: outside neighbours of {0000, 0001}
    let mut outside: Vec<u64> = Vec::new();
    for y in 2..16u64 {
        if (y ^ 0).count_ones() == 1 || (y ^ 1).count_ones() == 1 {
            outside.push(y);
        }
    }
    assert_eq!(outside, decompose_vertices(4, &[0, 1]).components[0].boundary);
}

#[test]
fn histogram_definition() {
    let d = decompose_vertices(6, &[0, 1, 0b110000, 0b110001, 0b001100]);
    assert_eq!(d.histogram.get(&2), Some(&4));
    assert_eq!(d.histogram.len(), 1);
}

#[test]
fn census_of_empty_cloud() {
    let p = ModelParams::new(10, 3.0, 1.0, 0.5, 0).unwrap();
    let d = decompose_vertices(10, &[]);
    let rows = census_check(&d, &p);
    let exp = census_expectations(&p);
    for (r, (name, e)) in rows.iter().zip(exp) {
        assert_eq!(r.stat, name);
        assert_eq!(r.observed, 0.0);
        assert_eq!(r.expected, e);
    }
}

#[test]
fn census_means_match_independence() {
    let p = ModelParams::new(14, 3.0, 1.0, 0.5, 0).unwrap();
    let q = 14f64.powi(-3);
    let v = 2f64.powi(14);
    let isolated_expect = v * q * (1.0 - q).powi(14);
    let size2_expect = 14.0 * q * q * (1.0 - q).powi(26) * v;
    let (mut iso, mut s2) = (Vec::new(), Vec::new());
    for seed in 0..200 {
        let d = decompose(&env(14, 3.0, 1000 + seed), None).unwrap();
        assert!(d.check_partition());
        assert_eq!(d.isolated.len() as u64 + d.component_vertex_total(), d.occupied_count());
        iso.push(d.isolated.len() as f64);
        s2.push(*d.histogram.get(&2).unwrap_or(&0) as f64);
    }
    let m = iso.len() as f64;
    let mean = iso.iter().sum::<f64>() / m;
    let sd = (iso.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    assert!((mean - isolated_expect).abs() < 4.0 * sd / m.sqrt(), "{mean} vs {isolated_expect}");
    assert!((census_expectations(&p)[0].1 - isolated_expect).abs() < 1e-9);
    // S(2) is rare here; a Poisson bound on the pair count gives the scale
    let mean2 = s2.iter().sum::<f64>() / m;
    assert!((mean2 - size2_expect).abs() < 4.0 * (2.0 * size2_expect / m).sqrt(), "{mean2} vs {size2_expect}");
}

#[test]
fn hitting_probe() {
    let e = env(12, 3.0, 9);
    assert_eq!(srw_hitting_probe(&e, 0, 0, 50, 1).p_hat, 1.0);
    let curve = srw_hitting_curve(&e, 0, &[0, 10, 100, 1000, 5000], 400, 2);
    for w in curve.windows(2) {
        assert!(w[1].p_hat <= w[0].p_hat);
    }
}

#[test]
fn hitting_probe_exponential_law() {
    let e = env(16, 3.0, 21);
    let l = 16u64.pow(3) / 2;
    let x = (0..).find(|&x| !e.occupied(x)).unwrap();
    let est = srw_hitting_probe(&e, x, l, 2000, 3);
    let target = (-0.5f64).exp();
    let width = est.hi - est.lo;
    assert!((est.p_hat - target).abs() <= 0.15 + width, "{} vs {target}", est.p_hat);
}

proptest! {
    #[test]
    fn decomposition_invariants(n in 3u32..=9, bits in proptest::collection::vec(any::<u16>(), 0..60)) {
        let occ: Vec<u64> = bits.iter().map(|&b| b as u64 & ((1 << n) - 1)).collect();
        let d = decompose_vertices(n, &occ);
        prop_assert!(d.check_partition());
        let mut sorted = occ.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(all_groups(n, &occ), connected_components_brute(&sorted, n));
        let hist_total: u64 = d.histogram.values().sum();
        prop_assert_eq!(hist_total, d.component_vertex_total());
        for c in &d.components {
            let b = boundary_stats(c, n);
            prop_assert!(b.boundary_size <= n as usize * c.size());
            prop_assert!(b.outgoing_edges <= n as u64 * c.size() as u64);
            // a component filling the whole cube has no boundary
            prop_assert!(c.boundary.is_empty() || b.min_m_star >= 1.0 / n as f64);
            prop_assert!(b.max_m_star <= c.size() as f64 / n as f64);
            for (i, &y) in c.boundary.iter().enumerate() {
                prop_assert!(c.index_of(y).is_none());
                let adj = c.vertices.iter().filter(|&&x| (x ^ y).count_ones() == 1).count() as u32;
                prop_assert_eq!(adj, c.boundary_counts[i]);
            }
            let total: f64 = (0..c.boundary.len()).map(|i| c.m_star(i, n)).sum::<f64>() * n as f64;
            prop_assert!((total - c.outgoing_edges() as f64).abs() < 1e-9);
        }
    }
}
