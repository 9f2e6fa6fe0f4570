use proptest::prelude::*;
use trem_core::env::{gaussian_field, Environment};
use trem_core::params::{beta_c, level_threshold, log_level_threshold, rho_star, ModelParams, ScalingTable};
use trem_core::rng::RngStream;
use trem_core::special::{inv_norm_sf, inv_normal_cdf, norm_cdf};

/// Composite Simpson on [a, b].
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Φ by quadrature, integrating the shorter tail directly.
fn cdf_oracle(z: f64) -> f64 {
    let tail = simpson(phi, z.abs(), z.abs() + 14.0, 20_000);
    if z < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

fn quantile_oracle(p: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf_oracle(mid) < p {
            lo = mid
        } else {
            hi = mid
        }
    }
    0.5 * (lo + hi)
}

fn params(n: u32, c_star: f64, beta: f64, eps: f64) -> ModelParams {
    ModelParams::new(n, c_star, beta, eps, 7).unwrap()
}

#[test]
fn quantile_examples() {
    assert_eq!(inv_normal_cdf(0.5).unwrap(), 0.0);
    let q = inv_normal_cdf(0.975).unwrap();
    assert!((q - 1.959964).abs() < 1e-6);
    assert!((q - quantile_oracle(0.975)).abs() < 1e-9);
    let q = inv_normal_cdf(1e-6).unwrap();
    assert!((q + 4.753424).abs() < 1e-6);
    assert!((q - quantile_oracle(1e-6)).abs() < 1e-8);
}

#[test]
fn quantile_rejects_endpoints() {
    assert!(inv_normal_cdf(0.0).is_err());
    assert!(inv_normal_cdf(1.0).is_err());
    assert!(inv_normal_cdf(f64::NAN).is_err());
}

#[test]
fn params_validation() {
    assert!(ModelParams::new(1, 3.0, 1.0, 0.5, 0).is_err());
    assert!(ModelParams::new(63, 3.0, 1.0, 0.5, 0).is_err());
    assert!(ModelParams::new(10, 2.0, 1.0, 0.5, 0).is_err());
    assert!(ModelParams::new(10, 3.0, 0.0, 0.5, 0).is_err());
    assert!(ModelParams::new(10, 3.0, 1.0, 1.0, 0).is_err());
    assert!(params(10, 2.5, 1.0, 0.5).low_c_star());
    assert!(!params(10, 3.1, 1.0, 0.5).low_c_star());
}

#[test]
fn scaling_table_examples() {
    let s = ScalingTable::new(&params(16, 3.0, 1.0, 0.5)).unwrap();
    assert!((s.u_n - 3.490).abs() < 5e-3);
    assert!((1.0 - cdf_oracle(s.u_n) - 2.44141e-4).abs() < 1e-9);
    assert!((s.u_n - quantile_oracle(1.0 - 16f64.powi(-3))).abs() < 1e-7);

    let s = ScalingTable::new(&params(20, 3.0, 1.0, 0.5)).unwrap();
    assert_eq!(s.a_n, 1024);

    let s = ScalingTable::new(&params(20, 3.0, 2.0 * beta_c(0.25), 0.5)).unwrap();
    assert!((s.alpha_half - 0.5).abs() < 1e-15);
    assert!((s.log_r_star - s.r_star.ln()).abs() < 1e-9 * s.log_r_star);
}

#[test]
fn level_threshold_examples() {
    let p = params(16, 3.0, 1.0, 0.5);
    let s = ScalingTable::new(&p).unwrap();
    let r = level_threshold(&p, rho_star(&p)).unwrap();
    assert!((r / s.r_star - 1.0).abs() < 1e-10);

    // the threshold formula itself has no dimension cap
    let p = ModelParams { n: 100, c_star: 3.0, beta: 1.0, epsilon: 0.5, seed: 0 };
    let ratio = log_level_threshold(&p, 1.0).unwrap() / (100.0 * beta_c(1.0));
    assert!((0.93..=1.0).contains(&ratio), "{ratio}");

    let p = params(20, 3.0, 1.0, 0.5);
    assert!((level_threshold(&p, 1.0 / 20.0).unwrap() - 1.0).abs() < 1e-12);
    assert!(level_threshold(&p, 0.0).is_err());
}

#[test]
fn field_is_deterministic() {
    for x in [0u64, 1, 12345, u64::MAX >> 2] {
        assert_eq!(gaussian_field(3, x).to_bits(), gaussian_field(3, x).to_bits());
    }
    assert_ne!(gaussian_field(3, 5), gaussian_field(4, 5));
}

#[test]
fn field_is_standard_normal() {
    let m = 1_000_000u64;
    let mut xs: Vec<f64> = (0..m).map(|x| gaussian_field(11, x)).collect();
    let mean = xs.iter().sum::<f64>() / m as f64;
    assert!(mean.abs() < 4.0 / (m as f64).sqrt(), "{mean}");
    xs.sort_by(f64::total_cmp);
    let mut d = 0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = norm_cdf(x);
        d = d.max((f - i as f64 / m as f64).abs()).max(((i + 1) as f64 / m as f64 - f).abs());
    }
    assert!(d <= 1.63e-3, "{d}");
}

#[test]
fn hamiltonian_examples() {
    let p = params(10, 3.0, 1.0, 0.5);
    let s = ScalingTable::new(&p).unwrap();
    let mut g = vec![0.0; 1 << 10];
    g[1] = -s.u_n - 0.1;
    let env = Environment::from_field(p, g).unwrap();
    assert_eq!(env.hamiltonian(0), 0.0);
    assert_eq!(env.boltzmann_weight(0), 1.0);
    assert!(!env.occupied(0));
    assert!((env.hamiltonian(1) - 10f64.sqrt() * (-s.u_n - 0.1)).abs() < 1e-12);
    assert!(env.occupied(1));
}

#[test]
fn occupation_matches_weight_threshold() {
    let env = Environment::lazy(params(40, 3.0, 1.3, 0.5)).unwrap();
    let mut rng = RngStream::new(5, 0);
    let mut disagreements = 0;
    let mut occupied = 0;
    for _ in 0..100_000 {
        let x = rng.next_u64() >> 24;
        let by_weight = env.log_weight(x) >= env.scaling.log_r_star;
        disagreements += (by_weight != env.occupied(x)) as u32;
        occupied += env.occupied(x) as u32;
    }
    assert_eq!(disagreements, 0);
    assert!(occupied < 100);
}

#[test]
fn dense_cap_and_backends_agree() {
    let p = params(25, 3.0, 1.0, 0.5);
    assert!(Environment::dense(p).is_err());
    let p = params(12, 3.0, 1.0, 0.5);
    let dense = Environment::dense(p).unwrap();
    let lazy = Environment::lazy(p).unwrap();
    assert!(dense.is_dense() && !lazy.is_dense());
    for x in 0..dense.num_vertices() {
        assert_eq!(dense.g(x).to_bits(), lazy.g(x).to_bits());
    }
}

#[test]
fn occupied_density() {
    let p = params(18, 2.5, 1.0, 0.5);
    let env = Environment::dense(p).unwrap();
    let count = (0..env.num_vertices()).filter(|&x| env.occupied(x)).count() as f64;
    let expect = env.num_vertices() as f64 * p.occupation_prob();
    assert!((count - expect).abs() < 4.0 * expect.sqrt(), "{count} vs {expect}");
}

#[test]
fn threshold_asymptotics() {
    // u_n/√(2 c log n) → 1 from below
    let mut prev = 0.0;
    for n in [10u32, 20, 40, 62] {
        let s = ScalingTable::new(&params(n, 3.0, 1.0, 0.5)).unwrap();
        let r = s.u_n / (6.0 * (n as f64).ln()).sqrt();
        assert!(r < 1.0 && r > prev, "n={n} ratio {r}");
        prev = r;
    }
}

proptest! {
    #[test]
    fn u_n_solves_tail_equation(n in 2u32..=62, c in 2.01f64..6.0) {
        let p = params(n, c, 1.0, 0.5);
        let s = ScalingTable::new(&p).unwrap();
        let target = (n as f64).powf(-c);
        prop_assert!((1.0 - norm_cdf(s.u_n) - target).abs() <= 1e-9 * target.max(1e-300) + 1e-15);
        prop_assert!((inv_norm_sf(target).unwrap() - s.u_n).abs() < 1e-12);
    }

    #[test]
    fn threshold_monotone_in_level(n in 4u32..=62, r1 in 0.05f64..1.0, dr in 0.001f64..0.5) {
        let p = params(n, 3.0, 1.0, 0.5);
        let a = log_level_threshold(&p, r1).unwrap();
        let b = log_level_threshold(&p, r1 + dr).unwrap();
        prop_assert!(b >= a);
    }

    #[test]
    fn clock_scale_monotone_in_beta(n in 4u32..=40, b1 in 0.1f64..3.0, db in 0.01f64..1.0) {
        let lo = ScalingTable::new(&params(n, 3.0, b1, 0.5)).unwrap();
        let hi = ScalingTable::new(&params(n, 3.0, b1 + db, 0.5)).unwrap();
        prop_assert!(hi.c_n >= lo.c_n);
        prop_assert!(hi.r_star > lo.r_star);
    }

    #[test]
    fn a_n_is_floor_of_power(n in 2u32..=40, eps in 0.05f64..0.95) {
        let s = ScalingTable::new(&params(n, 3.0, 1.0, eps)).unwrap();
        prop_assert_eq!(s.a_n, (eps * n as f64).exp2().floor().max(1.0) as u64);
    }
}
