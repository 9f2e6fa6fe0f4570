//! Empirical distribution tools used by the experiments.

use trem_core::rng::RngStream;
use trem_core::special::wilson_interval;
use trem_core::{limits, Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two points. Shifted by the
/// first sample so a constant sample gives exactly zero.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let k = xs[0];
    let m = xs.len() as f64;
    let s: f64 = xs.iter().map(|x| x - k).sum();
    let s2: f64 = xs.iter().map(|x| (x - k) * (x - k)).sum();
    ((s2 - s * s / m) / (m - 1.0)).max(0.0)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Linear-interpolation quantile (type 7).
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    if v.is_empty() {
        return f64::NAN;
    }
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Right-continuous empirical CDF.
#[derive(Clone, Debug)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty);
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        Ok(Ecdf { sorted })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }
}

pub fn empirical_cdf(samples: &[f64]) -> Result<Ecdf> {
    Ecdf::new(samples)
}

/// sup |F_m − F| against a CDF callable.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    let e = Ecdf::new(samples)?;
    let m = e.sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in e.sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / m - f).max(f - i as f64 / m);
    }
    Ok(d)
}

/// Two-sample KS distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let ea = Ecdf::new(a)?;
    let eb = Ecdf::new(b)?;
    let mut d: f64 = 0.0;
    for &x in ea.sorted.iter().chain(eb.sorted.iter()) {
        d = d.max((ea.eval(x) - eb.eval(x)).abs());
    }
    Ok(d)
}

/// Asymptotic two-sample KS critical value at level `alpha`.
pub fn ks_critical_two_sample(m: usize, n: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((m + n) as f64 / (m as f64 * n as f64)).sqrt()
}

/// Wilson interval for k successes in m trials at two-sided level `conf`.
pub fn binomial_ci(k: u64, m: u64, conf: f64) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::Empty);
    }
    let z = trem_core::special::inv_normal_cdf(0.5 + conf / 2.0)?;
    Ok(wilson_interval(k, m, z))
}

/// Percentile bootstrap interval of a statistic.
pub fn bootstrap_ci<F: Fn(&[f64]) -> f64>(
    samples: &[f64],
    stat: F,
    resamples: usize,
    conf: f64,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Empty);
    }
    let m = samples.len() as u64;
    let mut buf = vec![0.0; samples.len()];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for b in buf.iter_mut() {
            *b = samples[rng.below(m) as usize];
        }
        stats.push(stat(&buf));
    }
    let a = (1.0 - conf) / 2.0;
    Ok((quantile(&stats, a), quantile(&stats, 1.0 - a)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaplaceRow {
    pub lambda: f64,
    pub empirical: f64,
    pub lo: f64,
    pub hi: f64,
    pub target: f64,
}

/// Empirical E e^{−λS} with bootstrap intervals against e^{−ψ(λ)}.
pub fn laplace_compare(samples: &[f64], alpha: f64, lambdas: &[f64], rng: &mut RngStream) -> Result<Vec<LaplaceRow>> {
    if samples.len() < 100 {
        return Err(Error::Insufficient { have: samples.len(), need: 100 });
    }
    lambdas
        .iter()
        .map(|&lambda| {
            let f = |xs: &[f64]| xs.iter().map(|s| (-lambda * s).exp()).sum::<f64>() / xs.len() as f64;
            let (lo, hi) = bootstrap_ci(samples, f, 1000, 0.99, rng)?;
            Ok(LaplaceRow {
                lambda,
                empirical: f(samples),
                lo,
                hi,
                target: (-limits::levy_laplace_exponent(alpha, lambda)?).exp(),
            })
        })
        .collect()
}
