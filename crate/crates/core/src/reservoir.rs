//! The feed-forward quantum reservoir: per-mode squeezing encodes the input,
//! a fixed Haar-random interferometer mixes the modes, and photon-number
//! product expectations form the feature vector `R`.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    apply_local_1, squeezer_matrix_capped, DensityOperator, Ensemble, FockSampler, NumberProduct, PureState, SpaceSpec,
    State, R_MAX_DEFAULT,
};
use crate::interferometer::{clements_decompose, haar_unitary, ClementsPlan, FockInterferometer, ModeUnitary};
use crate::scalar::{Real, C};
use crate::seed;

/// Default ceiling on probability lost past the cutoff before a run aborts.
/// Five modes at the squeezing cap lose about 1.4%.
pub const LEAKAGE_THRESHOLD_DEFAULT: f64 = 0.05;

/// All nonempty subsets of `0..modes`, by cardinality then lexicographically.
pub fn feature_subsets(modes: usize) -> Result<Vec<NumberProduct>> {
    if modes == 0 {
        return Err(Error::InvalidArgument("need at least one mode".into()));
    }
    if modes > 20 {
        return Err(Error::DimensionLimit { dim: modes, limit: 20 });
    }
    let mut subsets: Vec<Vec<usize>> =
        (1u32..(1 << modes)).map(|mask| (0..modes).filter(|&i| mask & (1 << i) != 0).collect()).collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    subsets.into_iter().map(NumberProduct::new).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirConfig {
    pub space: SpaceSpec,
    pub r_max: f64,
    pub interferometer_seed: u64,
    pub n_w: usize,
    pub leakage_threshold: f64,
    /// Squeezing applied to injected quantum states; empty bypasses the
    /// squeezers.
    #[serde(default)]
    pub quantum_input_squeezing: Vec<f64>,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self {
            space: SpaceSpec::new(5, 4).expect("default space is valid"),
            r_max: R_MAX_DEFAULT,
            interferometer_seed: 0,
            n_w: 31,
            leakage_threshold: LEAKAGE_THRESHOLD_DEFAULT,
            quantum_input_squeezing: Vec::new(),
        }
    }
}

impl ReservoirConfig {
    pub fn max_features(&self) -> usize {
        (1usize << self.space.modes().min(usize::BITS as usize - 1)) - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.space.dim() > crate::fock::MAX_PURE_DIM {
            return Err(Error::DimensionLimit { dim: self.space.dim(), limit: crate::fock::MAX_PURE_DIM });
        }
        if self.n_w == 0 || self.n_w > self.max_features() {
            return Err(Error::InvalidArgument(format!(
                "n_w must be in [1, {}], got {}",
                self.max_features(),
                self.n_w
            )));
        }
        if !(self.r_max > 0.0 && self.r_max <= R_MAX_DEFAULT * (1.0 + 1e-12)) {
            return Err(Error::SqueezingCap { r: self.r_max, r_max: R_MAX_DEFAULT });
        }
        if !(self.leakage_threshold > 0.0 && self.leakage_threshold < 1.0) {
            return Err(Error::InvalidArgument("leakage_threshold must be in (0, 1)".into()));
        }
        if !self.quantum_input_squeezing.is_empty() {
            if self.quantum_input_squeezing.len() != self.space.modes() {
                return Err(Error::DimensionMismatch {
                    expected: self.space.modes(),
                    got: self.quantum_input_squeezing.len(),
                });
            }
            if let Some(r) = self.quantum_input_squeezing.iter().find(|r| r.abs() > self.r_max) {
                return Err(Error::SqueezingCap { r: *r, r_max: self.r_max });
            }
        }
        Ok(())
    }
}

/// How a feature vector was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    Exact,
    Sampled { shots: usize },
    Noisy { amplitude: f64, shots: Option<usize> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector<T> {
    pub values: Vec<T>,
    pub provenance: Provenance,
}

impl<T: Real> FeatureVector<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn truncate(mut self, n: usize) -> Self {
        self.values.truncate(n);
        self
    }
}

/// Input to the reservoir: classical data in `[0, 1]^M` or a prepared state.
#[derive(Clone, Copy, Debug)]
pub enum ReservoirInput<'a, T: Real> {
    Classical(&'a [T]),
    Pure(&'a PureState<T>),
    Ensemble(&'a Ensemble<T>),
    Density(&'a DensityOperator<T>),
}

/// Output distribution over the Fock basis, before normalization.
#[derive(Clone, Debug)]
pub struct OutputDistribution<T> {
    pub weights: Vec<T>,
    pub leakage: T,
}

/// A built reservoir: immutable and shareable across threads.
#[derive(Clone, Debug)]
pub struct Reservoir<T: Real> {
    config: ReservoirConfig,
    unitary: ModeUnitary<T>,
    plan: ClementsPlan<T>,
    lifted: FockInterferometer<T>,
    subsets: Vec<NumberProduct>,
    /// `eigen[(f, flat)]`: eigenvalue of feature `f` on basis state `flat`.
    eigen: DMatrix<T>,
}

impl<T: Real> Reservoir<T> {
    pub fn new(config: ReservoirConfig) -> Result<Self> {
        config.validate()?;
        let space = config.space;
        let unitary = haar_unitary::<T>(
            space.modes(),
            seed::derive(config.interferometer_seed, &[seed::stream::INTERFEROMETER]),
        )?;
        let plan = clements_decompose(&unitary)?;
        let lifted = FockInterferometer::new(&plan, space)?;
        let subsets: Vec<_> = feature_subsets(space.modes())?.into_iter().take(config.n_w).collect();
        let eigen =
            DMatrix::from_fn(subsets.len(), space.dim(), |f, flat| T::lit(subsets[f].eigenvalue(&space, flat) as f64));
        Ok(Self { config, unitary, plan, lifted, subsets, eigen })
    }

    pub fn config(&self) -> &ReservoirConfig {
        &self.config
    }

    pub fn space(&self) -> SpaceSpec {
        self.config.space
    }

    pub fn n_w(&self) -> usize {
        self.subsets.len()
    }

    pub fn unitary(&self) -> &ModeUnitary<T> {
        &self.unitary
    }

    pub fn plan(&self) -> &ClementsPlan<T> {
        &self.plan
    }

    pub fn subsets(&self) -> &[NumberProduct] {
        &self.subsets
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.subsets.iter().map(NumberProduct::name).collect()
    }

    /// Squeezing parameters `r_i = x_i r_max`.
    pub fn encode_classical(&self, x: &[T]) -> Result<Vec<T>> {
        let m = self.space().modes();
        if x.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: x.len() });
        }
        if let Some(bad) = x.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
            return Err(Error::InvalidArgument(format!("classical input {bad} outside [0, 1]")));
        }
        let r_max = T::lit(self.config.r_max);
        Ok(x.iter().map(|v| *v * r_max).collect())
    }

    /// Squeezed vacuum as a product of single-mode columns.
    fn squeezed_vacuum(&self, r: &[T]) -> Result<PureState<T>> {
        let space = self.space();
        let d = space.cutoff();
        let r_max = T::lit(self.config.r_max);
        let columns = r
            .iter()
            .map(|&ri| Ok(squeezer_matrix_capped(ri, d, r_max)?.column(0).iter().copied().collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        let mut amps = vec![C::new(T::one(), T::zero())];
        for col in &columns {
            let mut next = Vec::with_capacity(amps.len() * d);
            for a in &amps {
                next.extend(col.iter().map(|c| *a * *c));
            }
            amps = next;
        }
        PureState::new(space, amps)
    }

    fn squeeze_in_place(&self, amps: &mut [C<T>], r: &[T]) -> Result<()> {
        let d = self.space().cutoff();
        let r_max = T::lit(self.config.r_max);
        for (mode, &ri) in r.iter().enumerate() {
            if ri != T::zero() {
                apply_local_1(amps, &self.space(), &squeezer_matrix_capped(ri, d, r_max)?, mode);
            }
        }
        Ok(())
    }

    fn check_leakage(&self, leakage: T) -> Result<()> {
        if leakage.as_f64() > self.config.leakage_threshold {
            return Err(Error::Leakage { leakage: leakage.as_f64(), threshold: self.config.leakage_threshold });
        }
        Ok(())
    }

    fn evolve_pure(&self, mut psi: PureState<T>, squeeze: bool) -> Result<PureState<T>> {
        if psi.space() != self.space() {
            return Err(Error::DimensionMismatch { expected: self.space().dim(), got: psi.space().dim() });
        }
        if squeeze && !self.config.quantum_input_squeezing.is_empty() {
            let r: Vec<T> = self.config.quantum_input_squeezing.iter().map(|v| T::lit(*v)).collect();
            self.squeeze_in_place(psi.amplitudes_mut(), &r)?;
        }
        self.lifted.apply_pure(&mut psi)?;
        Ok(psi)
    }

    /// Fock-basis weights after the circuit, with the total leakage.
    pub fn output_distribution(&self, input: ReservoirInput<'_, T>) -> Result<OutputDistribution<T>> {
        let (weights, trace) = match input {
            ReservoirInput::Classical(x) => {
                let r = self.encode_classical(x)?;
                let psi = self.evolve_pure(self.squeezed_vacuum(&r)?, false)?;
                (psi.weights(), psi.norm_sqr())
            }
            ReservoirInput::Pure(psi) => {
                let out = self.evolve_pure(psi.clone(), true)?;
                (out.weights(), out.norm_sqr())
            }
            ReservoirInput::Ensemble(ens) => {
                let mut weights = vec![T::zero(); self.space().dim()];
                let mut trace = T::zero();
                for (w, psi) in ens.components() {
                    let out = self.evolve_pure(psi.clone(), true)?;
                    trace += *w * out.norm_sqr();
                    for (acc, p) in weights.iter_mut().zip(out.weights()) {
                        *acc += *w * p;
                    }
                }
                (weights, trace)
            }
            ReservoirInput::Density(rho) => {
                let mut rho = rho.clone();
                if !self.config.quantum_input_squeezing.is_empty() {
                    let d = self.space().cutoff();
                    let r_max = T::lit(self.config.r_max);
                    for (mode, r) in self.config.quantum_input_squeezing.iter().enumerate() {
                        rho.apply_single_mode_mut(&squeezer_matrix_capped(T::lit(*r), d, r_max)?, mode)?;
                    }
                }
                self.lifted.apply_density(&mut rho)?;
                let state = State::Mixed(rho);
                (state.weights(), state.trace())
            }
        };
        let leakage = T::one() - trace;
        self.check_leakage(leakage)?;
        if trace <= T::zero() {
            return Err(Error::ZeroTrace);
        }
        Ok(OutputDistribution { weights, leakage })
    }

    fn features_from_weights(&self, weights: &[T], norm: T) -> Vec<T> {
        let v = nalgebra::DVector::from_column_slice(weights);
        (&self.eigen * v).iter().map(|x| *x / norm).collect()
    }

    /// Exact `R`, normalized by the surviving trace.
    pub fn run_exact(&self, input: ReservoirInput<'_, T>) -> Result<FeatureVector<T>> {
        Ok(self.exact_from(&self.output_distribution(input)?))
    }

    /// `R` estimated from one record of `shots` Fock-basis samples shared by
    /// every feature.
    pub fn run_sampled(&self, input: ReservoirInput<'_, T>, shots: usize, seed: u64) -> Result<FeatureVector<T>> {
        self.sampled_from(&self.output_distribution(input)?, shots, seed)
    }

    pub fn exact_from(&self, dist: &OutputDistribution<T>) -> FeatureVector<T> {
        let norm = dist.weights.iter().fold(T::zero(), |a, w| a + *w);
        FeatureVector { values: self.features_from_weights(&dist.weights, norm), provenance: Provenance::Exact }
    }

    pub fn sampled_from(&self, dist: &OutputDistribution<T>, shots: usize, seed: u64) -> Result<FeatureVector<T>> {
        if shots == 0 {
            return Err(Error::InvalidArgument("shot count must be >= 1".into()));
        }
        let counts = FockSampler::new(&dist.weights)?.counts(shots, seed);
        let counts: Vec<T> = counts.iter().map(|c| T::lit(*c as f64)).collect();
        Ok(FeatureVector {
            values: self.features_from_weights(&counts, T::lit(shots as f64)),
            provenance: Provenance::Sampled { shots },
        })
    }
}

/// Independent uniform draws from `[-amplitude, amplitude]` on every component.
pub fn add_uniform_noise<T: Real>(r: &FeatureVector<T>, amplitude: T, seed: u64) -> Result<FeatureVector<T>> {
    if !(amplitude >= T::zero()) {
        return Err(Error::InvalidArgument("noise amplitude must be >= 0".into()));
    }
    let shots = match r.provenance {
        Provenance::Exact => None,
        Provenance::Sampled { shots } | Provenance::Noisy { shots: Some(shots), .. } => Some(shots),
        Provenance::Noisy { shots: None, .. } => None,
    };
    let mut values = r.values.clone();
    if amplitude > T::zero() {
        let mut rng = seed::rng(seed);
        let a = amplitude.as_f64();
        for v in &mut values {
            *v += T::lit(rng.random_range(-a..=a));
        }
    }
    Ok(FeatureVector { values, provenance: Provenance::Noisy { amplitude: amplitude.as_f64(), shots } })
}
