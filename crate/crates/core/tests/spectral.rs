use proptest::prelude::*;
use trem_core::cloud::decompose;
use trem_core::env::Environment;
use trem_core::linalg::Mat;
use trem_core::params::ModelParams;
use trem_core::rng::RngStream;
use trem_core::spectral::{
    absorption_tail_discrete, absorption_tails_continuous, build_absorbing, canonical_path_bound, continuous_tail_report,
    discrete_tail_report, eigensolve, eigenvalue_bound_check, perron_positivity_floor, perron_projector_bound,
    relaxation_bounds, relaxation_time, AbsorbingChain, SOLVER_CAP,
};

fn chains_from(n: u32, c_star: f64, beta: f64, seeds: std::ops::Range<u64>) -> Vec<AbsorbingChain> {
    let mut out = Vec::new();
    for seed in seeds {
        let e = Environment::dense(ModelParams::new(n, c_star, beta, 0.5, seed).unwrap()).unwrap();
        let d = decompose(&e, None).unwrap();
        for c in &d.components {
            if c.size() <= SOLVER_CAP {
                out.push(build_absorbing(&e, c).unwrap());
            }
        }
    }
    out
}

/// Largest eigenvalue of a nonnegative matrix by power iteration on its lazy version.
fn power_iteration(a: &Mat) -> f64 {
    let size = a.rows;
    let mut v = vec![1.0; size];
    let mut est = 0.0;
    for _ in 0..200_000 {
        let av = a.mul_vec(&v);
        let w: Vec<f64> = av.iter().zip(&v).map(|(x, y)| 0.5 * (x + y)).collect();
        let norm = w.iter().cloned().fold(0.0, f64::max);
        let next = 2.0 * norm - 1.0;
        v = w.iter().map(|x| x / norm).collect();
        if (next - est).abs() < 1e-15 {
            return next;
        }
        est = next;
    }
    est
}

/// Row sums of e^{tL*} by uniformization: e^{−t} Σ tᵏ/k! Rᵏ 𝟙.
fn uniformized_tail(chain: &AbsorbingChain, t: f64) -> Vec<f64> {
    let size = chain.size();
    let mut v = vec![1.0; size];
    let mut out = vec![0.0; size];
    let mut w = (-t).exp();
    for k in 0..2000 {
        for i in 0..size {
            out[i] += w * v[i];
        }
        v = chain.r.mul_vec(&v);
        w *= t / (k + 1) as f64;
    }
    out
}

#[test]
fn size_two_assembly() {
    let c = AbsorbingChain::new(10, 1.0, vec![0, 1], vec![-3.0, -2.0]).unwrap();
    let e2 = 1f64.exp().powi(2);
    assert_eq!(c.q[(0, 0)], 0.0);
    assert_eq!(c.q[(1, 1)], 0.0);
    assert!((c.q[(0, 1)] - e2 / (e2 + 9.0)).abs() < 1e-14);
    assert!((c.q[(1, 0)] - e2 / (e2 + 9.0)).abs() < 1e-14);
    for i in 0..2 {
        let row: f64 = c.q.row(i).iter().sum();
        assert!((1.0 - row - c.q_exit[i]).abs() < 1e-14);
        assert!((c.r[(i, i)] - (1.0 - c.lambda[i])).abs() < 1e-15);
    }
    assert_eq!(c.boundary.len(), 18);
    assert!(c.reversibility_residual() < 1e-15);
}

#[test]
fn chain_rejects_bad_input() {
    assert!(AbsorbingChain::new(10, 1.0, vec![0], vec![-3.0]).is_err());
    assert!(AbsorbingChain::new(10, 1.0, vec![0, 3], vec![-3.0, -2.0]).is_err());
    let big: Vec<u64> = (0..65).collect();
    assert!(AbsorbingChain::new(10, 1.0, big, vec![-3.0; 65]).is_err());
}

#[test]
fn two_by_two_symmetric() {
    let (a, b) = (0.3, 0.2);
    let m = Mat::from_rows(&[vec![a, b], vec![b, a]]);
    let rows = perron_projector_bound(&m, &[1.0, 1.0], 7).unwrap();
    for r in rows {
        assert!(r.lhs < 1e-13);
    }
    let flip = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
    for m in [2, 4, 10, 11] {
        for r in perron_projector_bound(&flip, &[0.5, 0.5], m).unwrap() {
            assert!(r.lhs < 1e-13, "m={m} {r:?}");
        }
    }
}

#[test]
fn size_two_perron_value() {
    for (n, h) in [(10u32, [-3.0, -2.0]), (16, [-9.0, -9.0]), (12, [-14.0, -6.5])] {
        let c = AbsorbingChain::new(n, 1.0, vec![0, 1], h.to_vec()).unwrap();
        let rep = eigensolve(&c).unwrap();
        let rho0 = (-h[0].max(h[1])).exp();
        let closed = 1.0 - 1.0 / (1.0 + rho0 / (n as f64 - 1.0));
        let geo = (c.q[(0, 1)] * c.q[(1, 0)]).sqrt();
        assert!((rep.vartheta[0] - closed).abs() < 1e-10);
        assert!((geo - closed).abs() < 1e-10);
        // both directions of the size-two estimate hold with room |C|
        let f = eigenvalue_bound_check(&c, &rep);
        assert!(f.all_ok(), "{f:?}");
        assert!((0.5..=2.0).contains(&f.vartheta0_ratio));
    }
}

#[test]
fn symmetric_pair_perron_vectors() {
    let c = AbsorbingChain::new(12, 1.3, vec![4, 5], vec![-7.0, -7.0]).unwrap();
    let rep = eigensolve(&c).unwrap();
    for i in 0..2 {
        assert!((rep.disc_v[i] - 1.0).abs() < 1e-12);
        assert!((rep.cont_v[i] - 1.0).abs() < 1e-12);
        assert!((rep.disc_u[i] - 0.5).abs() < 1e-12);
    }
    assert!(perron_positivity_floor(&c, &rep).ok());
}

#[test]
fn eigenvalues_match_power_iteration() {
    let chains = chains_from(12, 2.05, 1.0, 0..40);
    let mut checked = 0;
    for c in chains.iter().filter(|c| c.size() >= 3) {
        let rep = eigensolve(c).unwrap();
        assert!((power_iteration(&c.q) - rep.vartheta[0]).abs() < 1e-9);
        assert!((1.0 - power_iteration(&c.r) - rep.varsigma[0]).abs() < 1e-9);
        assert!(rep.residual_disc < 1e-9 && rep.residual_cont < 1e-9);
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn bipartite_spectrum_is_symmetric() {
    for c in chains_from(12, 2.05, 1.5, 0..20) {
        let rep = eigensolve(&c).unwrap();
        let k = rep.vartheta.len();
        for i in 0..k {
            assert!((rep.vartheta[i] + rep.vartheta[k - 1 - i]).abs() < 1e-9);
        }
    }
}

#[test]
fn discrete_tail_examples() {
    let c = AbsorbingChain::new(10, 1.0, vec![0, 1], vec![-3.0, -2.0]).unwrap();
    let q = c.q_exit[0];
    assert_eq!(absorption_tail_discrete(&c, 0, 0), 1.0);
    for i in 0..40 {
        for x in 0..2 {
            assert!((absorption_tail_discrete(&c, x, i) - (1.0 - q).powi(i as i32)).abs() < 1e-12);
        }
    }
}

#[test]
fn perron_tail_beyond_threshold() {
    let mut checked = 0;
    for c in chains_from(16, 2.5, 1.0, 0..30) {
        let rep = eigensolve(&c).unwrap();
        let i = c.theta_star.ceil() as u64;
        for x in 0..c.size() {
            let t = discrete_tail_report(&c, &rep, x, i);
            if t.exact < 1e-280 {
                continue;
            }
            let rel = (t.exact - t.perron_approx).abs() / t.exact;
            assert!(rel <= 2.0 * (-16.0f64 / 4.0).exp() + 1e-8, "rel {rel}");
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn continuous_tail_matches_uniformization() {
    for c in chains_from(12, 2.05, 0.7, 0..15).iter().take(10) {
        let rep = eigensolve(c).unwrap();
        for t in [0.0, 0.5, 3.0, 40.0] {
            let spec = absorption_tails_continuous(c, &rep, t);
            let oracle = uniformized_tail(c, t);
            for x in 0..c.size() {
                assert!((spec[x] - oracle[x]).abs() < 1e-9, "t={t}");
            }
        }
        let late = continuous_tail_report(c, &rep, 0, 2.0 * c.theta_bar_star.min(1e3));
        assert!(late.exact <= 1.0);
    }
}

#[test]
fn three_chain_with_deep_vertex() {
    let n = 10;
    let c = AbsorbingChain::new(n, 1.0, vec![0, 1, 3], vec![-12.0, -4.0, -4.5]).unwrap();
    let rep = eigensolve(&c).unwrap();
    let size = 3.0;
    let gap = rep.varsigma[1] - rep.varsigma[0];
    assert!(gap >= 0.5 / (n as f64 * size * size * c.rho_bar1));
    assert!(eigenvalue_bound_check(&c, &rep).all_ok());
    assert!(c.reversibility_residual() < 1e-12);
}

#[test]
fn bound_directions_on_sampled_components() {
    let mut count = 0;
    for n in [12u32, 14, 16] {
        for c in chains_from(n, 2.3, 1.0, 0..10) {
            let rep = eigensolve(&c).unwrap();
            assert!(eigenvalue_bound_check(&c, &rep).all_ok());
            assert!(perron_positivity_floor(&c, &rep).ok());
            count += 1;
        }
    }
    assert!(count > 0);
}

#[test]
fn path_bound_single_edge() {
    let k = Mat::from_rows(&[vec![0.7, 0.3], vec![0.3, 0.7]]);
    let tau = relaxation_time(&k, &[1.0, 1.0]).unwrap();
    let bound = canonical_path_bound(&k, &[1.0, 1.0], false).unwrap();
    assert!((tau - 1.0 / 0.6).abs() < 1e-12);
    assert!(bound >= tau * (1.0 - 1e-12));
}

#[test]
fn path_bound_dominates_relaxation() {
    let chains = chains_from(14, 2.1, 1.0, 0..30);
    assert!(chains.len() >= 20);
    for c in chains.iter().take(200) {
        let r = relaxation_bounds(c).unwrap();
        assert!(r.bound_cont >= r.tau_cont * (1.0 - 1e-9));
        assert!(r.bound_disc >= r.tau_disc * (1.0 - 1e-9));
        assert!(r.crude_cont >= r.bound_cont * (1.0 - 1e-12));
        assert!(r.crude_disc >= r.bound_disc * (1.0 - 1e-12));
    }
}

#[test]
fn floor_shrinks_with_size() {
    let two = AbsorbingChain::new(10, 1.0, vec![0, 1], vec![-8.0, -8.0]).unwrap();
    let three = AbsorbingChain::new(10, 1.0, vec![0, 1, 3], vec![-8.0, -8.0, -8.0]).unwrap();
    let f2 = perron_positivity_floor(&two, &eigensolve(&two).unwrap());
    let f3 = perron_positivity_floor(&three, &eigensolve(&three).unwrap());
    assert!(f3.log_floor_cont < f2.log_floor_cont);
    assert!(f3.log_floor_disc < f2.log_floor_disc);
}

/// Random reversible nonnegative matrix with rows summing to at most one.
fn reversible(seed: u64, size: usize, lazy: bool) -> (Mat, Vec<f64>) {
    let mut rng = RngStream::new(seed, size as u64);
    let pi: Vec<f64> = (0..size).map(|_| 0.1 + rng.uniform()).collect();
    let mut s = Mat::zeros(size, size);
    for i in 0..size {
        for j in i..size {
            let v = if i == j && !lazy { 0.0 } else { rng.uniform() * pi[i].min(pi[j]) };
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    let mut a = Mat::zeros(size, size);
    let mut worst: f64 = 0.0;
    for i in 0..size {
        for j in 0..size {
            a[(i, j)] = s[(i, j)] / pi[i];
        }
        worst = worst.max(a.row(i).iter().sum());
    }
    for v in a.data.iter_mut() {
        *v /= worst;
    }
    (a, pi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projector_bound_holds(seed in any::<u64>(), size in 2usize..=12, m in 1u32..=50) {
        let (a, pi) = reversible(seed, size, true);
        for r in perron_projector_bound(&a, &pi, m).unwrap() {
            prop_assert!(r.lhs <= r.rhs + 1e-10);
        }
    }

    #[test]
    fn chain_is_reversible(seed in 0u64..500, beta in 0.3f64..2.5) {
        for c in chains_from(10, 2.05, beta, seed..seed + 1) {
            prop_assert!(c.reversibility_residual() < 1e-12);
            let rep = eigensolve(&c).unwrap();
            prop_assert!(rep.vartheta[0] > 0.0 && rep.vartheta[0] < 1.0);
            prop_assert!(rep.varsigma[0] > 0.0);
            let su: f64 = rep.disc_u.iter().sum();
            prop_assert!((su - 1.0).abs() < 1e-10);
            let tails = absorption_tails_continuous(&c, &rep, 1.0);
            prop_assert!(tails.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }
}
