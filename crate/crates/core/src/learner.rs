//! Feature maps that a linear readout is trained on.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::readout::design_matrix;
use crate::reservoir::{add_uniform_noise, Reservoir, ReservoirConfig, ReservoirInput};
use crate::scalar::Real;
use crate::seed;

/// A fixed (untrained) feature map over classical inputs.
///
/// `eval_seed` drives any per-evaluation randomness (shot noise, additive
/// noise); deterministic learners ignore it.
pub trait Learner<T: Real>: Send + Sync {
    fn n_features(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// Per-coordinate bounds of the input domain.
    fn input_domain(&self) -> (f64, f64);
    fn features(&self, x: &[T], eval_seed: u64) -> Result<Vec<T>>;
    /// Independent evaluations of one input, one per seed.
    fn features_repeated(&self, x: &[T], eval_seeds: &[u64]) -> Result<Vec<Vec<T>>> {
        eval_seeds.iter().map(|s| self.features(x, *s)).collect()
    }
    fn is_deterministic(&self) -> bool;
    fn label(&self) -> String;
}

/// Evaluate a learner on every input in parallel; row `i` uses a seed derived
/// from `(seed, i)` so results do not depend on scheduling.
pub fn evaluate<T: Real, L: Learner<T> + ?Sized>(learner: &L, inputs: &[Vec<T>], seed: u64) -> Result<DMatrix<T>> {
    let rows = inputs
        .par_iter()
        .enumerate()
        .map(|(i, x)| learner.features(x, seed::derive(seed, &[i as u64])))
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Ok(DMatrix::zeros(0, learner.n_features()));
    }
    design_matrix(&rows)
}

/// How reservoir features are read out.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum Readout {
    Exact,
    Sampled { shots: usize },
    Noisy { amplitude: f64 },
    SampledNoisy { shots: usize, amplitude: f64 },
}

impl Readout {
    pub fn shots(&self) -> Option<usize> {
        match *self {
            Readout::Sampled { shots } | Readout::SampledNoisy { shots, .. } => Some(shots),
            _ => None,
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            Readout::Noisy { amplitude } | Readout::SampledNoisy { amplitude, .. } => amplitude,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots() == Some(0) {
            return Err(Error::InvalidArgument("shots must be >= 1".into()));
        }
        let a = self.amplitude();
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise amplitude must be finite and >= 0, got {a}")));
        }
        Ok(())
    }
}

/// The quantum reservoir as a learner on `[0, 1]^M`.
#[derive(Clone, Debug)]
pub struct FqrcLearner<T: Real> {
    reservoir: Reservoir<T>,
    readout: Readout,
}

impl<T: Real> FqrcLearner<T> {
    pub fn new(config: ReservoirConfig, readout: Readout) -> Result<Self> {
        readout.validate()?;
        Ok(Self { reservoir: Reservoir::new(config)?, readout })
    }

    pub fn from_reservoir(reservoir: Reservoir<T>, readout: Readout) -> Result<Self> {
        readout.validate()?;
        Ok(Self { reservoir, readout })
    }

    pub fn reservoir(&self) -> &Reservoir<T> {
        &self.reservoir
    }

    pub fn readout(&self) -> Readout {
        self.readout
    }

    /// Features of any reservoir input under this readout.
    pub fn features_of(&self, input: ReservoirInput<'_, T>, eval_seed: u64) -> Result<Vec<T>> {
        Ok(self.features_repeated_of(input, &[eval_seed])?.pop().expect("one seed"))
    }

    /// Several evaluations of one input; the circuit is simulated once and
    /// only the readout randomness is redrawn.
    pub fn features_repeated_of(&self, input: ReservoirInput<'_, T>, eval_seeds: &[u64]) -> Result<Vec<Vec<T>>> {
        let dist = self.reservoir.output_distribution(input)?;
        let exact = self.reservoir.exact_from(&dist);
        let a = self.readout.amplitude();
        eval_seeds
            .iter()
            .map(|&s| {
                let r = match self.readout.shots() {
                    None => exact.clone(),
                    Some(shots) => self.reservoir.sampled_from(&dist, shots, seed::derive(s, &[0]))?,
                };
                if a > 0.0 {
                    return Ok(add_uniform_noise(&r, T::lit(a), seed::derive(s, &[1]))?.values);
                }
                Ok(r.values)
            })
            .collect()
    }
}

impl<T: Real> Learner<T> for FqrcLearner<T> {
    fn n_features(&self) -> usize {
        self.reservoir.n_w()
    }

    fn input_dim(&self) -> usize {
        self.reservoir.space().modes()
    }

    fn input_domain(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn features(&self, x: &[T], eval_seed: u64) -> Result<Vec<T>> {
        self.features_of(ReservoirInput::Classical(x), eval_seed)
    }

    fn features_repeated(&self, x: &[T], eval_seeds: &[u64]) -> Result<Vec<Vec<T>>> {
        self.features_repeated_of(ReservoirInput::Classical(x), eval_seeds)
    }

    fn is_deterministic(&self) -> bool {
        self.readout == Readout::Exact
    }

    fn label(&self) -> String {
        match self.readout {
            Readout::Exact => "fqrc-exact".into(),
            Readout::Sampled { shots } => format!("fqrc-sampled-{shots}"),
            Readout::Noisy { amplitude } => format!("fqrc-noisy-{amplitude:e}"),
            Readout::SampledNoisy { shots, amplitude } => {
                format!("fqrc-sampled-{shots}-noisy-{amplitude:e}")
            }
        }
    }
}
