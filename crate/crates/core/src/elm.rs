//! Extreme learning machine: `tanh(rho W_in x)` with a fixed random input
//! layer, zero bias, and optional additive uniform noise on the hidden units.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::Learner;
use crate::scalar::Real;
use crate::seed;

/// How the raw uniform input weights are scaled to unit size.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightNorm {
    /// Largest absolute entry equals 1.
    #[default]
    MaxAbs,
    /// Largest singular value equals 1.
    Spectral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElmConfig {
    pub inputs: usize,
    pub n_w: usize,
    pub rho: f64,
    pub noise: f64,
    pub seed: u64,
    #[serde(default)]
    pub norm: WeightNorm,
}

impl Default for ElmConfig {
    fn default() -> Self {
        Self { inputs: 5, n_w: 31, rho: 1.0, noise: 0.0, seed: 0, norm: WeightNorm::MaxAbs }
    }
}

impl ElmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inputs == 0 || self.n_w == 0 {
            return Err(Error::InvalidArgument("ELM needs at least one input and one hidden unit".into()));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho must be finite and > 0, got {}", self.rho)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise must be finite and >= 0, got {}", self.noise)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Elm<T: Real> {
    config: ElmConfig,
    w_in: DMatrix<T>,
}

impl<T: Real> Elm<T> {
    pub fn new(config: ElmConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(seed::derive(config.seed, &[seed::stream::ELM_WEIGHTS]));
        let raw = DMatrix::<f64>::from_fn(config.n_w, config.inputs, |_, _| rng.random_range(-1.0..=1.0));
        let scale = match config.norm {
            WeightNorm::MaxAbs => raw.amax(),
            WeightNorm::Spectral => raw.clone().svd(false, false).singular_values.max(),
        };
        if scale == 0.0 {
            return Err(Error::Linalg("ELM input weights are all zero"));
        }
        let w_in = raw.map(|v| T::lit(v / scale));
        Ok(Self { config, w_in })
    }

    pub fn config(&self) -> &ElmConfig {
        &self.config
    }

    pub fn input_weights(&self) -> &DMatrix<T> {
        &self.w_in
    }
}

impl<T: Real> Learner<T> for Elm<T> {
    fn n_features(&self) -> usize {
        self.config.n_w
    }

    fn input_dim(&self) -> usize {
        self.config.inputs
    }

    fn input_domain(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }

    fn features(&self, x: &[T], eval_seed: u64) -> Result<Vec<T>> {
        if x.len() != self.config.inputs {
            return Err(Error::DimensionMismatch { expected: self.config.inputs, got: x.len() });
        }
        let rho = T::lit(self.config.rho);
        let h = &self.w_in * DVector::from_column_slice(x);
        let mut out: Vec<T> = h.iter().map(|v| (rho * *v).tanh()).collect();
        if self.config.noise > 0.0 {
            let a = self.config.noise;
            let mut rng = seed::rng(eval_seed);
            for v in &mut out {
                *v += T::lit(rng.random_range(-a..=a));
            }
        }
        Ok(out)
    }

    fn is_deterministic(&self) -> bool {
        self.config.noise == 0.0
    }

    fn label(&self) -> String {
        format!("elm-rho{}-noise{:e}", self.config.rho, self.config.noise)
    }
}
