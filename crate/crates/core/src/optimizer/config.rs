use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // float math without std
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::de::DeConfig;
use crate::{Error, Result, BITS_PER_NAT};

/// How `Lambda^(0)` is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitStrategy {
    /// Equal power over the `min(b, M)` beams of each user with the largest
    /// positive margin `[R~_k]_m - [R~_eve]_m`; ties go to the lower beam index.
    StrongestBeams { b: usize },
    /// `P / (K M)` everywhere.
    Uniform,
    /// Explicit per-user vectors, rescaled onto the budget if they exceed it.
    Custom { lambdas: Vec<Vec<f64>> },
}

impl Default for InitStrategy {
    fn default() -> Self {
        InitStrategy::StrongestBeams { b: 16 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Bits,
    Nats,
}

impl LogBase {
    /// Converts a value in bits to this base.
    pub fn from_bits(self, bits: f64) -> f64 {
        match self {
            LogBase::Bits => bits,
            LogBase::Nats => bits / BITS_PER_NAT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Total power budget.
    pub p: f64,
    /// Fixed-point tolerance on `Phi~`.
    pub xi1: f64,
    /// CCCP stop: change of the objective, bits.
    pub xi2: f64,
    /// Newton stop: step length.
    pub xi3: f64,
    /// Power-budget tolerance of the multiplier search; `None` means `1e-6 P`.
    pub xi4: Option<f64>,
    /// Water-filling stop: change of the surrogate, bits.
    pub xi5: f64,
    pub max_de_iter: usize,
    pub max_cccp_iter: usize,
    pub max_iwfa_sweeps: usize,
    pub max_mu_iter: usize,
    /// Newton precision in digits; the iteration cap grows with `log2 g`.
    pub newton_digits: u32,
    pub init: InitStrategy,
    /// Largest stationarity violation accepted before water-filling stops.
    pub kkt_tol: f64,
    pub log_base: LogBase,
    /// Negates the linearization term. Fault injection for the verification
    /// suites only.
    #[doc(hidden)]
    #[serde(skip_serializing_if = "core::ops::Not::not")]
    pub flip_delta_sign: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            p: 1.0,
            xi1: 1e-10,
            xi2: 1e-4,
            xi3: 1e-9,
            xi4: None,
            xi5: 1e-6,
            max_de_iter: 10_000,
            max_cccp_iter: 50,
            max_iwfa_sweeps: 200,
            max_mu_iter: 200,
            newton_digits: 16,
            init: InitStrategy::default(),
            kkt_tol: 1e-7,
            log_base: LogBase::Bits,
            flip_delta_sign: false,
        }
    }
}

impl SolverConfig {
    pub fn with_power(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn xi4_abs(&self) -> f64 {
        self.xi4.unwrap_or(1e-6 * self.p)
    }

    pub fn de_config(&self) -> DeConfig {
        DeConfig {
            xi1: self.xi1,
            max_iter: self.max_de_iter,
        }
    }

    pub fn newton_max_iter(&self) -> usize {
        let g = self.newton_digits.max(2) as f64;
        4 * (Float::ceil(Float::log2(g)) as usize) + 8
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("xi1", self.xi1),
            ("xi2", self.xi2),
            ("xi3", self.xi3),
            ("xi5", self.xi5),
            ("kkt_tol", self.kkt_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite")));
            }
        }
        if let Some(x) = self.xi4 {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::config("xi4 must be positive and finite"));
            }
        }
        if !(self.p >= 0.0 && self.p.is_finite()) {
            return Err(Error::config("power budget must be finite and >= 0"));
        }
        if self.max_de_iter == 0 || self.max_cccp_iter == 0 || self.max_iwfa_sweeps == 0 || self.max_mu_iter == 0 {
            return Err(Error::config("iteration caps must be positive"));
        }
        if self.newton_digits == 0 {
            return Err(Error::config("newton_digits must be positive"));
        }
        if self.init == (InitStrategy::StrongestBeams { b: 0 }) {
            return Err(Error::config("strongest-beams count must be positive"));
        }
        Ok(())
    }
}
