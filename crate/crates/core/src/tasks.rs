//! Task generators: the named five-input function, 1-D functions for
//! out-of-range tests, the quantum operator-expectation task on random input
//! states, and train/test dataset assembly.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    calibrate_mean_photon, expect_operator_ensemble, quadrature_power, single_mode_ensemble, tensor_ensembles,
    Ensemble, Family, FamilyKind, LocalOp, PureState,
};
use crate::scalar::Real;
use crate::seed;

pub const DEFAULT_TRAIN: usize = 500;
pub const DEFAULT_TEST: usize = 500;

/// Lower edge of each coordinate of the named task, keeping targets nonzero.
pub const NAMED_LOWER: f64 = 0.1;

/// `(sum x)^4 + sum x^3`.
pub fn classical_named_f(x: &[f64]) -> f64 {
    let s: f64 = x.iter().sum();
    s.powi(4) + x.iter().map(|v| v.powi(3)).sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Function1d {
    /// `x + 1`.
    Linear,
    /// `sin(2 pi x / 10) + 2`.
    Sinusoid,
}

pub const LINEAR_SLOPE: f64 = 1.0;
pub const LINEAR_OFFSET: f64 = 1.0;
pub const SINE_OMEGA: f64 = 2.0 * std::f64::consts::PI / 10.0;
pub const SINE_OFFSET: f64 = 2.0;
/// Training range of the 1-D tasks.
pub const RANGE_TRAIN: (f64, f64) = (0.0, 10.0);
/// Test range in out-of-range mode.
pub const RANGE_TEST: (f64, f64) = (-5.0, 15.0);

pub fn classical_1d(kind: Function1d, x: f64) -> f64 {
    match kind {
        Function1d::Linear => LINEAR_SLOPE * x + LINEAR_OFFSET,
        Function1d::Sinusoid => (SINE_OMEGA * x).sin() + SINE_OFFSET,
    }
}

/// Offset added to a 1-D target so it stays at least 1 over `domain`; zero
/// on the training range.
pub fn target_shift(kind: Function1d, (lo, hi): (f64, f64)) -> f64 {
    let min = classical_1d(kind, lo).min(classical_1d(kind, hi));
    let min = match kind {
        Function1d::Linear => min,
        Function1d::Sinusoid => SINE_OFFSET - 1.0,
    };
    (1.0 - min).max(0.0)
}

/// Affine map of `[lo, hi]` onto `[0, 1]`.
pub fn normalize(x: f64, (lo, hi): (f64, f64)) -> f64 {
    (x - lo) / (hi - lo)
}

/// One factor of a random quantum input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub family: FamilyKind,
    /// Target mean photon number (the photon number itself for Fock states).
    pub mean_photon: f64,
}

/// Three random factors followed by vacuum on the remaining modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumInputSpec {
    pub factors: Vec<FactorSpec>,
    pub modes: usize,
    pub cutoff: usize,
}

pub const QUANTUM_FACTORS: usize = 3;

/// Draw a family uniformly per factor, mean photon number uniform in `(0, 1]`
/// (Fock: `n` uniform in `{1, 2}`).
pub fn random_quantum_spec(modes: usize, cutoff: usize, seed: u64) -> Result<QuantumInputSpec> {
    if modes < QUANTUM_FACTORS {
        return Err(Error::InvalidArgument(format!("quantum task needs >= {QUANTUM_FACTORS} modes")));
    }
    if cutoff < 3 {
        return Err(Error::InvalidArgument("quantum task needs cutoff >= 3 to hold |2>".into()));
    }
    let mut rng = seed::rng(seed);
    let kinds = [FamilyKind::Fock, FamilyKind::EvenCat, FamilyKind::Coherent, FamilyKind::Thermal];
    let factors = (0..QUANTUM_FACTORS)
        .map(|_| {
            let family = kinds[rng.random_range(0..kinds.len())];
            let mean_photon = match family {
                FamilyKind::Fock => rng.random_range(1..=2) as f64,
                // (0, 1]
                _ => 1.0 - rng.random::<f64>(),
            };
            FactorSpec { family, mean_photon }
        })
        .collect();
    Ok(QuantumInputSpec { factors, modes, cutoff })
}

impl QuantumInputSpec {
    /// Calibrate every factor, renormalize it after truncation, and tensor
    /// with vacuum.
    pub fn build<T: Real>(&self) -> Result<Ensemble<T>> {
        let d = self.cutoff;
        let mut parts = self
            .factors
            .iter()
            .map(|f| {
                let family = match f.family {
                    FamilyKind::Fock => Family::Fock(f.mean_photon.round() as usize),
                    kind => calibrate_mean_photon(kind, T::lit(f.mean_photon), d)?,
                };
                normalized(single_mode_ensemble(family, d)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let vac = single_mode_ensemble::<T>(Family::Fock(0), d)?;
        parts.extend(std::iter::repeat_n(vac, self.modes - self.factors.len()));
        tensor_ensembles(&parts)
    }
}

fn normalized<T: Real>(ens: Ensemble<T>) -> Result<Ensemble<T>> {
    let trace = ens.trace();
    if trace <= T::zero() {
        return Err(Error::ZeroTrace);
    }
    let space = ens.space();
    let components =
        ens.components().iter().map(|(w, psi)| (*w / trace, psi.clone())).collect::<Vec<(T, PureState<T>)>>();
    Ensemble::new(space, components)
}

/// `x^4 (x) x^2 (x) x^4 (x) 1 (x) ... (x) 1`.
pub fn quantum_operator<T: Real>(modes: usize, d: usize) -> Vec<LocalOp<T>> {
    let powers = [4u32, 2, 4];
    (0..modes).map(|m| quadrature_power(powers.get(m).copied().unwrap_or(0), d)).collect()
}

/// `|<x1^4 x2^2 x3^4>|` on the state.
pub fn quantum_target<T: Real>(state: &Ensemble<T>) -> Result<T> {
    let space = state.space();
    if space.modes() < QUANTUM_FACTORS {
        return Err(Error::InvalidArgument(format!("quantum target needs >= {QUANTUM_FACTORS} modes")));
    }
    Ok(expect_operator_ensemble(&quantum_operator(space.modes(), space.cutoff()), state)?.abs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum TaskKind {
    ClassicalNamed,
    Classical1d { function: Function1d },
    QuantumOperator { modes: usize, cutoff: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub task: TaskKind,
    pub n_train: usize,
    pub n_test: usize,
    /// Draw test inputs from the extended 1-D range.
    #[serde(default)]
    pub range_mode: bool,
    pub seed: u64,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::InvalidArgument("n_train and n_test must be >= 1".into()));
        }
        if self.range_mode && !matches!(self.task, TaskKind::Classical1d { .. }) {
            return Err(Error::InvalidArgument("range_mode applies to 1-D tasks only".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// One dataset item. `normalized` holds classical inputs mapped onto
/// `[0, 1]^dim`, which is what learners consume; `raw` is the task-domain
/// value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TaskInput {
    Classical { raw: Vec<f64>, normalized: Vec<f64> },
    Quantum(QuantumInputSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<TaskInput>,
    pub targets: Vec<f64>,
    pub split: Split,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Range used to normalize 1-D inputs: the test range in range mode so that
/// every test input stays inside the squeezing cap, the training range
/// otherwise.
pub fn encoding_range(range_mode: bool) -> (f64, f64) {
    if range_mode {
        RANGE_TEST
    } else {
        RANGE_TRAIN
    }
}

fn draw_item(task: &TaskKind, range: (f64, f64), enc: (f64, f64), rng: &mut seed::Rng) -> Result<(TaskInput, f64)> {
    match task {
        TaskKind::ClassicalNamed => {
            let raw: Vec<f64> = (0..5).map(|_| rng.random_range(NAMED_LOWER..=1.0)).collect();
            let y = classical_named_f(&raw);
            Ok((TaskInput::Classical { normalized: raw.clone(), raw }, y))
        }
        TaskKind::Classical1d { function } => {
            let x = rng.random_range(range.0..=range.1);
            let u = normalize(x, enc).clamp(0.0, 1.0);
            let normalized = vec![u, 0.0, 0.0, 0.0, 0.0];
            let y = classical_1d(*function, x) + target_shift(*function, enc);
            Ok((TaskInput::Classical { raw: vec![x], normalized }, y))
        }
        TaskKind::QuantumOperator { modes, cutoff } => {
            let spec = random_quantum_spec(*modes, *cutoff, rng.random())?;
            let y = quantum_target(&spec.build::<f64>()?)?;
            Ok((TaskInput::Quantum(spec), y))
        }
    }
}

fn draw_split(spec: &TaskSpec, split: Split) -> Result<Dataset> {
    let (n, stream, range) = match split {
        Split::Train => (spec.n_train, seed::stream::DATASET_TRAIN, RANGE_TRAIN),
        Split::Test => {
            (spec.n_test, seed::stream::DATASET_TEST, if spec.range_mode { RANGE_TEST } else { RANGE_TRAIN })
        }
    };
    let split_seed = seed::derive(spec.seed, &[stream]);
    let mut rng = seed::rng(split_seed);
    let enc = encoding_range(spec.range_mode);
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    while inputs.len() < n {
        let (x, y) = draw_item(&spec.task, range, enc, &mut rng)?;
        if !y.is_finite() {
            return Err(Error::InvalidArgument("task produced a non-finite target".into()));
        }
        // The error measures divide by the target.
        if y == 0.0 {
            continue;
        }
        inputs.push(x);
        targets.push(y);
    }
    Ok(Dataset { inputs, targets, split, seed: split_seed })
}

/// Independent train and test draws with disjoint seeds.
pub fn make_dataset(spec: &TaskSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    Ok((draw_split(spec, Split::Train)?, draw_split(spec, Split::Test)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{expect, NumberProduct, SpaceSpec, State};

    #[test]
    fn named_function_arithmetic() {
        assert_eq!(classical_named_f(&[0.0; 5]), 0.0);
        assert_eq!(classical_named_f(&[1.0; 5]), 630.0);
        assert!((classical_named_f(&[0.2; 5]) - 1.04).abs() < 1e-12);
    }

    #[test]
    fn one_d_functions() {
        assert_eq!(classical_1d(Function1d::Linear, 0.0), 1.0);
        let s = |x| classical_1d(Function1d::Sinusoid, x);
        assert!((s(0.0) - s(10.0)).abs() < 1e-12);
        assert!((s(2.5) - 3.0).abs() < 1e-12);
        assert_eq!(normalize(10.0, RANGE_TRAIN), 1.0);
        assert_eq!(target_shift(Function1d::Linear, RANGE_TRAIN), 0.0);
        assert_eq!(target_shift(Function1d::Linear, RANGE_TEST), 5.0);
        assert_eq!(target_shift(Function1d::Sinusoid, RANGE_TEST), 0.0);
    }

    #[test]
    fn vacuum_target_is_gaussian_moment() {
        let space = SpaceSpec::new(5, 4).unwrap();
        let vac = Ensemble::pure(PureState::<f64>::vacuum(space));
        assert!((quantum_target(&vac).unwrap() - 9.0 / 32.0).abs() < 1e-4);
    }

    #[test]
    fn random_state_is_normalized_and_calibrated() {
        for s in 0..8 {
            let spec = random_quantum_spec(5, 4, s).unwrap();
            let ens = spec.build::<f64>().unwrap();
            assert!((ens.trace() - 1.0).abs() < 1e-12);
            let state = State::Mixed(ens.to_density().unwrap());
            for (m, f) in spec.factors.iter().enumerate() {
                let n = expect(&NumberProduct::new(vec![m]).unwrap(), &state).unwrap();
                assert!((n - f.mean_photon).abs() < 1e-6, "factor {m}: {f:?} gave {n}");
            }
            for m in [3, 4] {
                assert!(expect(&NumberProduct::new(vec![m]).unwrap(), &state).unwrap().abs() < 1e-15);
            }
        }
    }

    #[test]
    fn datasets_are_seeded_and_disjoint() {
        let spec = TaskSpec { task: TaskKind::ClassicalNamed, n_train: 50, n_test: 40, range_mode: false, seed: 3 };
        let (train, test) = make_dataset(&spec).unwrap();
        assert_eq!((train.len(), test.len()), (50, 40));
        assert_ne!(train.seed, test.seed);
        assert_eq!(make_dataset(&spec).unwrap().0, train);
        assert!(train.targets.iter().chain(&test.targets).all(|y| *y != 0.0));
    }

    #[test]
    fn range_mode_extends_test_inputs() {
        let spec = TaskSpec {
            task: TaskKind::Classical1d { function: Function1d::Sinusoid },
            n_train: 200,
            n_test: 200,
            range_mode: true,
            seed: 1,
        };
        let (train, test) = make_dataset(&spec).unwrap();
        let raw = |d: &Dataset| -> Vec<f64> {
            d.inputs.iter().map(|i| if let TaskInput::Classical { raw, .. } = i { raw[0] } else { panic!() }).collect()
        };
        assert!(raw(&train).iter().all(|x| (0.0..=10.0).contains(x)));
        assert!(raw(&test).iter().any(|x| !(0.0..=10.0).contains(x)));
        assert!(test.targets.iter().all(|y| *y >= 1.0));
        for i in test.inputs.iter().chain(&train.inputs) {
            let TaskInput::Classical { normalized, .. } = i else { panic!() };
            assert!((0.0..=1.0).contains(&normalized[0]));
        }
    }
}
