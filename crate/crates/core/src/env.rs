//! The random landscape: per-vertex Gaussians, truncated Hamiltonian, weights.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::params::{ModelParams, ScalingTable};
use crate::rng::{hash2, open01};
use crate::special::inv_normal_cdf;

pub const DEFAULT_DENSE_CAP: u32 = 24;

/// g(x) as a pure function of (seed, x).
#[inline]
pub fn gaussian_field(seed: u64, x: u64) -> f64 {
    // open01 never returns 0 or 1, so this cannot fail
    inv_normal_cdf(open01(hash2(seed, x))).unwrap_or(0.0)
}

#[derive(Clone, Debug)]
pub enum Backend {
    Dense(Vec<f64>),
    Lazy,
}

#[derive(Clone, Debug)]
pub struct Environment {
    pub params: ModelParams,
    pub scaling: ScalingTable,
    backend: Backend,
    sqrt_n: f64,
}

impl Environment {
    pub fn dense(params: ModelParams) -> Result<Self> {
        Self::dense_with_cap(params, DEFAULT_DENSE_CAP)
    }

    pub fn dense_with_cap(params: ModelParams, cap: u32) -> Result<Self> {
        if params.n > cap {
            return Err(Error::Capacity { n: params.n, cap });
        }
        let scaling = ScalingTable::new(&params)?;
        let g = (0..1u64 << params.n).map(|x| gaussian_field(params.seed, x)).collect();
        Ok(Environment { params, scaling, backend: Backend::Dense(g), sqrt_n: params.sqrt_n() })
    }

    pub fn lazy(params: ModelParams) -> Result<Self> {
        let scaling = ScalingTable::new(&params)?;
        Ok(Environment { params, scaling, backend: Backend::Lazy, sqrt_n: params.sqrt_n() })
    }

    /// Dense environment with a prescribed field (tests and hand-built landscapes).
    pub fn from_field(params: ModelParams, g: Vec<f64>) -> Result<Self> {
        if g.len() as u64 != 1u64 << params.n {
            return Err(Error::Domain("field length must be 2^n"));
        }
        let scaling = ScalingTable::new(&params)?;
        Ok(Environment { params, scaling, backend: Backend::Dense(g), sqrt_n: params.sqrt_n() })
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.backend, Backend::Dense(_))
    }

    pub fn n(&self) -> u32 {
        self.params.n
    }

    pub fn num_vertices(&self) -> u64 {
        1u64 << self.params.n
    }

    pub fn field(&self) -> Option<&[f64]> {
        match &self.backend {
            Backend::Dense(g) => Some(g),
            Backend::Lazy => None,
        }
    }

    #[inline]
    pub fn g(&self, x: u64) -> f64 {
        match &self.backend {
            Backend::Dense(g) => g[x as usize],
            Backend::Lazy => gaussian_field(self.params.seed, x),
        }
    }

    #[inline]
    pub fn occupied(&self, x: u64) -> bool {
        self.g(x) <= -self.scaling.u_n
    }

    #[inline]
    pub fn hamiltonian(&self, x: u64) -> f64 {
        let g = self.g(x);
        if g <= -self.scaling.u_n {
            self.sqrt_n * g
        } else {
            0.0
        }
    }

    /// ln w(x) = −β√n g(x), the untruncated weight on log scale.
    #[inline]
    pub fn log_weight(&self, x: u64) -> f64 {
        -self.params.beta * self.sqrt_n * self.g(x)
    }

    #[inline]
    pub fn boltzmann_weight(&self, x: u64) -> f64 {
        libm::exp(self.log_weight(x))
    }
}
