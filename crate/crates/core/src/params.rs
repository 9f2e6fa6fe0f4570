//! Model parameters and the finite-n scaling sequences.

use core::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::special::inv_norm_sf;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub n: u32,
    pub c_star: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl ModelParams {
    pub fn new(n: u32, c_star: f64, beta: f64, epsilon: f64, seed: u64) -> Result<Self> {
        let p = ModelParams { n, c_star, beta, epsilon, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n > 62 {
            return Err(Error::Domain("n must lie in 2..=62"));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Domain("beta must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Domain("epsilon must lie in (0, 1)"));
        }
        if !(self.c_star > 2.0) || !self.c_star.is_finite() {
            return Err(Error::Domain("c_star must exceed 2"));
        }
        Ok(())
    }

    /// The limit laws need c_star > 3; values in (2, 3] are allowed but flagged.
    pub fn low_c_star(&self) -> bool {
        self.c_star <= 3.0
    }

    pub fn sqrt_n(&self) -> f64 {
        libm::sqrt(self.n as f64)
    }

    /// p = n^{−c_star}, the occupation probability of a vertex.
    pub fn occupation_prob(&self) -> f64 {
        libm::pow(self.n as f64, -self.c_star)
    }
}

/// β_c(ε) = √(2ε log 2).
pub fn beta_c(eps: f64) -> f64 {
    libm::sqrt(2.0 * eps * LN_2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingTable {
    pub u_n: f64,
    pub r_star: f64,
    pub log_r_star: f64,
    pub a_n: u64,
    pub c_n: f64,
    pub log_c_n: f64,
    pub b_n_above: f64,
    pub b_n_below: f64,
    pub beta_c_eps: f64,
    pub alpha_eps: f64,
    pub beta_c_half: f64,
    pub alpha_half: f64,
    pub ell_n: u64,
}

pub fn build_scaling_table(p: &ModelParams) -> Result<ScalingTable> {
    p.validate()?;
    let n = p.n as f64;
    let s = p.beta * p.sqrt_n();
    let u_n = inv_norm_sf(p.occupation_prob())?;
    let a_n = libm::floor(libm::exp2(p.epsilon * n)) as u64;
    let a_n = a_n.max(1);
    let log_c_n = if a_n >= 2 { s * inv_norm_sf(1.0 / a_n as f64)? } else { 0.0 };
    let z_above = inv_norm_sf(1.0 / libm::sqrt(n * a_n as f64))?;
    let b_n_above = libm::exp(s * z_above) / (n - 1.0);
    let b_n_below =
        a_n as f64 * libm::exp(n * (p.beta / 2.0) * (p.beta / 2.0)) / (p.beta * libm::sqrt(PI * n));
    let beta_c_eps = beta_c(p.epsilon);
    let beta_c_half = beta_c(p.epsilon / 2.0);
    Ok(ScalingTable {
        u_n,
        r_star: libm::exp(s * u_n),
        log_r_star: s * u_n,
        a_n,
        c_n: libm::exp(log_c_n),
        log_c_n,
        b_n_above,
        b_n_below,
        beta_c_eps,
        alpha_eps: beta_c_eps / p.beta,
        beta_c_half,
        alpha_half: beta_c_half / p.beta,
        ell_n: libm::ceil(n * n * n) as u64,
    })
}

impl ScalingTable {
    pub fn new(p: &ModelParams) -> Result<Self> {
        build_scaling_table(p)
    }
}

/// log r_n(ρ) = β√n Φ̄⁻¹(2^{−ρn}).
pub fn log_level_threshold(p: &ModelParams, rho: f64) -> Result<f64> {
    let q = libm::exp2(-rho * p.n as f64);
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain("2^{-rho n} must lie in (0, 1)"));
    }
    Ok(p.beta * p.sqrt_n() * inv_norm_sf(q)?)
}

pub fn level_threshold(p: &ModelParams, rho: f64) -> Result<f64> {
    Ok(libm::exp(log_level_threshold(p, rho)?))
}

/// ρ_n^⋆ = c_star log n / (n log 2), the level whose threshold is r_star.
pub fn rho_star(p: &ModelParams) -> f64 {
    p.c_star * libm::log(p.n as f64) / (p.n as f64 * LN_2)
}
