use proptest::prelude::*;
use trem_core::cloud::{decompose, CloudDecomposition};
use trem_core::env::Environment;
use trem_core::kinetics::{EffectiveMode, KernelView, TrapData};
use trem_core::params::ModelParams;
use trem_core::rng::RngStream;
use trem_core::spectral::AbsorbingChain;

const E2: f64 = std::f64::consts::E * std::f64::consts::E;

fn params(n: u32, beta: f64) -> ModelParams {
    ModelParams::new(n, 3.0, beta, 0.5, 0).unwrap()
}

/// Environment with g = 0 except at the listed vertices, which sit `depth`
/// below the occupation level.
fn planted(n: u32, beta: f64, sites: &[(u64, f64)]) -> (Environment, CloudDecomposition) {
    let p = params(n, beta);
    let probe = Environment::from_field(p, vec![0.0; 1 << n]).unwrap();
    let mut g = vec![0.0; 1 << n];
    for &(x, depth) in sites {
        g[x as usize] = -probe.scaling.u_n - depth;
    }
    let env = Environment::from_field(p, g).unwrap();
    let d = decompose(&env, None).unwrap();
    (env, d)
}

/// Size-2 trap data straight from energies.
fn pair(n: u32, beta: f64, hx: f64, hy: f64) -> TrapData {
    TrapData::from_chain(AbsorbingChain::new(n, beta, vec![0, 1], vec![hx, hy]).unwrap()).unwrap()
}

#[test]
fn unoccupied_rates_are_uniform() {
    let (env, d) = planted(10, 1.0, &[]);
    let kv = KernelView::new(&env, &d).unwrap();
    assert_eq!(kv.jump_rate(0, 1).unwrap(), 0.1);
    assert_eq!(kv.jump_prob(0, 1).unwrap(), 0.1);
    assert_eq!(kv.holding_param(5), 1.0);
    assert!(kv.jump_rate(0, 3).is_err());
    assert!(kv.jump_rate(0, 1 << 10).is_err());
}

#[test]
fn isolated_trap_rates() {
    let (env, d) = planted(10, 1.0, &[(0, 0.5)]);
    let kv = KernelView::new(&env, &d).unwrap();
    let h = env.hamiltonian(0);
    assert!(h < 0.0);
    let lam = kv.holding_param(0);
    assert!((lam / h.exp() - 1.0).abs() < 1e-12);
    assert!((lam * env.boltzmann_weight(0) - 1.0).abs() < 1e-9);
    for b in 0..10 {
        assert!((kv.jump_prob(0, 1 << b).unwrap() - 0.1).abs() < 1e-15);
    }
    assert!(kv.in_v_circ(0));
}

#[test]
fn size_two_exit_probability() {
    let t = pair(10, 1.0, -3.0, -2.0);
    let q = 9.0 / (9.0 + E2);
    assert!((q - 0.549147).abs() < 1e-6);
    for i in 0..2 {
        assert!((t.chain.q_exit[i] - q).abs() < 1e-14);
    }
    // brute force from the rates: exit mass over total from each end
    let x_exit = 9.0 * (-3.0f64).exp();
    let x_in = (-1.0f64).exp();
    assert!((x_exit / (x_exit + x_in) - q).abs() < 1e-14);
    let y_exit = 9.0 * (-2.0f64).exp();
    assert!((y_exit / (y_exit + 1.0) - q).abs() < 1e-14);
    assert!(((1.0 - q).powi(5) - 0.018628).abs() < 1e-6);
}

#[test]
fn size_two_sojourn_tail() {
    let t = pair(10, 1.0, -3.0, -2.0);
    let q = 9.0 / (9.0 + E2);
    let m = 200_000;
    let mut rng = RngStream::new(3, 0);
    let mut counts = [0u64; 8];
    for _ in 0..m {
        let s = t.sojourn_steps(0, &mut rng);
        assert!(s >= 1);
        for (i, c) in counts.iter_mut().enumerate() {
            if s > i as u64 {
                *c += 1;
            }
        }
    }
    for (i, &c) in counts.iter().enumerate() {
        let p = (1.0 - q).powi(i as i32);
        let sd = (p * (1.0 - p) / m as f64).sqrt();
        assert!((c as f64 / m as f64 - p).abs() <= 4.0 * sd + 1e-12, "i={i}");
    }
}

#[test]
fn deep_pair_mean_sojourn_time() {
    let (n, beta, hx, hy) = (10u32, 1.0, -12.0, -11.0);
    let t = pair(n, beta, hx, hy);
    let nf = n as f64;
    // rates of the pair: x→y uphill, y→x downhill, 9 exits each
    let lx = ((-beta * (hy - hx)).exp() + 9.0 * (beta * hx).exp()) / nf;
    let ly = (1.0 + 9.0 * (beta * hy).exp()) / nf;
    let pxy = (-beta * (hy - hx)).exp() / nf / lx;
    let pyx = 1.0 / nf / ly;
    // (I − Q) m = 1/λ
    let det = 1.0 - pxy * pyx;
    let mx = (1.0 / lx + pxy / ly) / det;
    let my = (1.0 / ly + pyx / lx) / det;
    assert!((t.mean_time[0] / mx - 1.0).abs() < 1e-10);
    assert!((t.mean_time[1] / my - 1.0).abs() < 1e-10);
    let steps_x = (1.0 + pxy) / det;
    assert!((t.mean_steps[0] / steps_x - 1.0).abs() < 1e-10);

    let reps = 100_000;
    let mut rng = RngStream::new(4, 0);
    let xs: Vec<f64> = (0..reps).map(|_| t.sojourn_time(0, &mut rng).0).collect();
    let mean = xs.iter().sum::<f64>() / reps as f64;
    let sd = (xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0)).sqrt();
    assert!((mean - mx).abs() < 4.0 * sd / (reps as f64).sqrt(), "{mean} vs {mx}");
}

#[test]
fn uniform_step_from_open_vertex() {
    let (env, d) = planted(10, 1.0, &[(0b1111100000, 0.5)]);
    let kv = KernelView::new(&env, &d).unwrap();
    let mut rng = RngStream::new(1, 0);
    let mut counts = [0f64; 10];
    let m = 100_000;
    for _ in 0..m {
        let y = kv.step(0, &mut rng);
        counts[y.trailing_zeros() as usize] += 1.0;
    }
    let e = m as f64 / 10.0;
    let chi2: f64 = counts.iter().map(|c| (c - e) * (c - e) / e).sum();
    // 99.9% point of χ² with 9 degrees of freedom
    assert!(chi2 < 27.88, "{chi2}");
}

#[test]
fn deep_trap_next_to_shallow_trap() {
    let (env, d) = planted(10, 1.0, &[(0, 1.0), (1, 0.2)]);
    let kv = KernelView::new(&env, &d).unwrap();
    let (h0, h1) = (env.hamiltonian(0), env.hamiltonian(1));
    let up = (-(h1 - h0)).exp();
    let exact = up / (up + 9.0 * h0.exp());
    assert!((kv.jump_prob(0, 1).unwrap() - exact).abs() < 1e-12);
    let m = 100_000;
    let mut rng = RngStream::new(2, 0);
    let hits = (0..m).filter(|_| kv.step(0, &mut rng) == 1).count() as f64;
    let sd = (exact * (1.0 - exact) / m as f64).sqrt();
    assert!((hits / m as f64 - exact).abs() < 4.0 * sd);
}

#[test]
fn replay_is_deterministic() {
    let e = Environment::dense(ModelParams::new(12, 2.05, 1.5, 0.5, 3).unwrap()).unwrap();
    let d = decompose(&e, None).unwrap();
    let kv = KernelView::new(&e, &d).unwrap();
    let a = kv.simulate_path(0, 500, &mut RngStream::new(9, 2));
    let b = kv.simulate_path(0, 500, &mut RngStream::new(9, 2));
    assert_eq!(a, b);
    let x0 = kv.sample_initial(&mut RngStream::new(9, 3));
    let a = kv.run_until_kn(x0, 1.0, &mut RngStream::new(9, 4));
    let b = kv.run_until_kn(x0, 1.0, &mut RngStream::new(9, 4));
    assert_eq!(a, b);
}

#[test]
fn clock_books() {
    let (env, d) = planted(10, 1.0, &[]);
    let kv = KernelView::new(&env, &d).unwrap();
    let zero = kv.simulate_clock(0, 0, &mut RngStream::new(0, 0));
    assert_eq!(zero.steps, 0);
    assert_eq!(zero.front_time, 0.0);
    assert_eq!(zero.trap_time, 0.0);

    let (k, reps) = (200u64, 1000u64);
    let mut total = 0.0;
    for r in 0..reps {
        let rec = kv.simulate_clock(3, k, &mut RngStream::new(5, r));
        assert_eq!(rec.trap_time, 0.0);
        assert_eq!(rec.back_steps, 0);
        assert_eq!(rec.steps, rec.k_circ + rec.back_steps);
        total += rec.front_time;
    }
    let mean = total / reps as f64;
    assert!((mean - k as f64).abs() < 4.0 * (k as f64 / reps as f64).sqrt(), "{mean}");
}

#[test]
fn clock_without_components() {
    let (env, d) = planted(12, 1.0, &[(0, 0.5), (0b11, 0.3), (0b111100, 1.0)]);
    assert!(d.components.is_empty());
    let kv = KernelView::new(&env, &d).unwrap();
    let a = env.scaling.a_n;
    for (r, t) in [0.5, 1.0, 2.3].into_iter().enumerate() {
        let rec = kv.run_until_kn(0, t, &mut RngStream::new(6, r as u64));
        assert_eq!(rec.steps, (a as f64 * t).floor() as u64);
        assert_eq!(rec.trap_entries, 0);
    }
}

#[test]
fn step_ratio_bound_at_moderate_size() {
    let e = Environment::dense(ModelParams::new(16, 3.0, 1.0, 0.5, 8).unwrap()).unwrap();
    let d = decompose(&e, None).unwrap();
    let kv = KernelView::new(&e, &d).unwrap();
    let reps = 400;
    let mut good = 0;
    for r in 0..reps {
        let mut rng = RngStream::new(10, r);
        let x0 = kv.sample_initial(&mut rng);
        let rec = kv.run_until_kn(x0, 1.0, &mut rng);
        assert_eq!(rec.steps, rec.k_circ + rec.back_steps);
        assert_eq!(rec.k_circ, e.scaling.a_n);
        if rec.k_dagger as f64 <= rec.k_circ as f64 * (1.0 + 1.0 / 16.0) {
            good += 1;
        }
    }
    assert!(good as f64 / reps as f64 > 0.95);
}

#[test]
fn symmetric_pair_exits_uniformly() {
    let (env, d) = planted(10, 1.0, &[(0, 0.5), (1, 0.5)]);
    assert_eq!(d.components.len(), 1);
    let kv = KernelView::new(&env, &d).unwrap();
    let rep = kv.effective_kernel(0).unwrap();
    assert_eq!(rep.boundary.len(), 18);
    // each entry vertex favours its own side; the two rows mirror each other
    // and their average is uniform
    let own = |z: u64, y: u64| (y ^ z).count_ones() == 1;
    for z in 0..2u64 {
        assert!((rep.row_sums[z as usize] - 1.0).abs() < 1e-10);
        let near: Vec<f64> = (0..18).filter(|&k| own(z, rep.boundary[k])).map(|k| rep.phi[(z as usize, k)]).collect();
        let far: Vec<f64> = (0..18).filter(|&k| !own(z, rep.boundary[k])).map(|k| rep.phi[(z as usize, k)]).collect();
        assert_eq!(near.len(), 9);
        assert!(near.iter().chain(&far).all(|&p| (p - near[0]).abs() < 1e-14 || (p - far[0]).abs() < 1e-14));
        assert!(near[0] > far[0]);
    }
    for k in 0..18 {
        assert!((0.5 * (rep.phi[(0, k)] + rep.phi[(1, k)]) - 1.0 / 18.0).abs() < 1e-12);
    }
}

#[test]
fn exit_law_is_close_to_boundary_formula() {
    let mut checked = 0;
    for seed in 0..40 {
        let e = Environment::dense(ModelParams::new(16, 2.5, 1.0, 0.5, seed).unwrap()).unwrap();
        let d = decompose(&e, None).unwrap();
        let kv = KernelView::new(&e, &d).unwrap();
        for l in 0..d.components.len() {
            let rep = kv.effective_kernel(l).unwrap();
            let tol = 5.0 / e.scaling.r_star;
            for z in 0..rep.phi.rows {
                assert!((rep.row_sums[z] - 1.0).abs() < 1e-10);
                for k in 0..rep.boundary.len() {
                    let rel = (rep.phi[(z, k)] / rep.formula[k] - 1.0).abs();
                    assert!(rel <= tol * rep.boundary.len() as f64, "seed {seed} rel {rel}");
                }
            }
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn effective_chain_is_symmetric() {
    let mut done = false;
    for seed in 0..50 {
        let e = Environment::dense(ModelParams::new(10, 2.05, 1.0, 0.5, seed).unwrap()).unwrap();
        let d = decompose(&e, None).unwrap();
        if d.components.is_empty() {
            continue;
        }
        let kv = KernelView::new(&e, &d).unwrap();
        let rows: Vec<Vec<(u64, f64)>> = (0..1024u64).map(|x| if kv.in_v_circ(x) { kv.effective_transition_row(x) } else { vec![] }).collect();
        let lookup = |x: u64, y: u64| rows[x as usize].iter().find(|e| e.0 == y).map_or(0.0, |e| e.1);
        for x in 0..1024u64 {
            if !kv.in_v_circ(x) {
                continue;
            }
            let s: f64 = rows[x as usize].iter().map(|e| e.1).sum();
            assert!((s - 1.0).abs() < 1e-10);
            for &(y, p) in &rows[x as usize] {
                assert!(kv.in_v_circ(y));
                assert!((p - lookup(y, x)).abs() < 1e-10);
            }
        }
        done = true;
        break;
    }
    assert!(done);
}

#[test]
fn effective_modes_agree() {
    // a 3-vertex path with unequal depths
    let (env, d) = planted(10, 1.0, &[(0, 0.9), (1, 0.3), (3, 0.6)]);
    assert_eq!(d.components.len(), 1);
    let kv = KernelView::new(&env, &d).unwrap();
    let b = &d.components[0].boundary;
    let x = 0b100; // enters the component at vertex 0
    assert!(kv.in_v_circ(x));
    let m = 100_000;
    let (mut a, mut c) = (vec![0f64; b.len()], vec![0f64; b.len()]);
    let mut rng = RngStream::new(12, 0);
    let mut from_trap = 0;
    for _ in 0..m {
        let y = kv.step_effective(x, EffectiveMode::Direct, &mut rng);
        if let Ok(k) = b.binary_search(&y) {
            a[k] += 1.0;
        }
        let y = kv.step_effective(x, EffectiveMode::Fallback, &mut rng);
        if let Ok(k) = b.binary_search(&y) {
            c[k] += 1.0;
            from_trap += 1;
        }
    }
    assert!(from_trap > 1000);
    let chi2: f64 = a.iter().zip(&c).filter(|(p, q)| *p + *q > 0.0).map(|(p, q)| (p - q) * (p - q) / (p + q)).sum();
    let dof = b.len() as f64;
    // generous normal approximation to the χ² upper tail
    assert!(chi2 < dof + 4.0 * (2.0 * dof).sqrt(), "{chi2} over {dof}");
}

#[test]
fn correlation_edge_cases() {
    let e = Environment::dense(ModelParams::new(12, 2.5, 1.5, 0.5, 2).unwrap()).unwrap();
    let d = decompose(&e, None).unwrap();
    let kv = KernelView::new(&e, &d).unwrap();
    assert_eq!(kv.correlation_probability(1.0, 0.0, 0.25, 100, 1).p_hat, 1.0);
    let mut prev = 0;
    for rho in [0.05, 0.25, 0.5, 0.99] {
        let est = kv.correlation_probability(1.0, 1.0, rho, 200, 4);
        assert!(est.hits >= prev);
        prev = est.hits;
    }
    assert_eq!(kv.direct_fecp(0.0, &mut RngStream::new(0, 0)), 0.0);
    assert_eq!(kv.direct_becp(1e-9, 1.0, &mut RngStream::new(0, 0)), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn jump_chain_is_reversible(seed in 0u64..1000, beta in 0.2f64..3.0) {
        let e = Environment::dense(ModelParams::new(8, 2.05, beta, 0.5, seed).unwrap()).unwrap();
        let d = decompose(&e, None).unwrap();
        let kv = KernelView::new(&e, &d).unwrap();
        for x in 0..256u64 {
            let s: f64 = (0..8).map(|b| kv.jump_prob(x, x ^ (1 << b)).unwrap()).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            for b in 0..8 {
                let y = x ^ (1 << b);
                let l = kv.pi_unnormalized(x) * kv.jump_prob(x, y).unwrap();
                let r = kv.pi_unnormalized(y) * kv.jump_prob(y, x).unwrap();
                prop_assert!((l - r).abs() <= 1e-12 * l.abs().max(r.abs()));
            }
        }
    }

    #[test]
    fn books_balance(seed in 0u64..1000, t in 0.1f64..3.0) {
        let e = Environment::dense(ModelParams::new(10, 2.05, 1.2, 0.5, seed).unwrap()).unwrap();
        let d = decompose(&e, None).unwrap();
        let kv = KernelView::new(&e, &d).unwrap();
        let mut rng = RngStream::new(seed, 0);
        let x0 = kv.sample_initial(&mut rng);
        let rec = kv.run_until_kn(x0, t, &mut rng);
        prop_assert_eq!(rec.steps, rec.k_circ + rec.back_steps);
        prop_assert_eq!(rec.k_circ, (e.scaling.a_n as f64 * t).floor() as u64);
        prop_assert!(rec.back_steps >= rec.trap_entries);
        prop_assert!(rec.front_time >= 0.0 && rec.trap_time >= 0.0);
        let sim = kv.simulate_clock(x0, 300, &mut rng);
        prop_assert_eq!(sim.steps, sim.k_circ + sim.back_steps);
    }
}
