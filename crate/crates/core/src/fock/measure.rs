use rand::Rng as _;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::space::{OccupationIndex, SpaceSpec};
use super::state::{apply_local_1, Ensemble, LocalOp, PureState, State};
use crate::error::{Error, Result};
use crate::scalar::{czero, Real};
use crate::seed;

/// `prod_{i in modes} n_i`, diagonal in the Fock basis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NumberProduct {
    modes: Vec<usize>,
}

impl NumberProduct {
    /// Modes are deduplicated and sorted; the set must be nonempty.
    pub fn new(mut modes: Vec<usize>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidArgument("number-product observable needs at least one mode".into()));
        }
        modes.sort_unstable();
        modes.dedup();
        Ok(Self { modes })
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    /// Column name such as `n1n3` (one-based modes).
    pub fn name(&self) -> String {
        self.modes.iter().map(|m| format!("n{}", m + 1)).collect()
    }

    pub fn check(&self, space: &SpaceSpec) -> Result<()> {
        self.modes.iter().try_for_each(|&m| space.check_mode(m))
    }

    /// Eigenvalue on the basis state at `flat`.
    pub fn eigenvalue(&self, space: &SpaceSpec, flat: usize) -> usize {
        self.modes.iter().map(|&m| space.digit(flat, m)).product()
    }
}

/// Normalized Fock-basis distribution of any state's diagonal weights.
pub fn normalize_weights<T: Real>(mut weights: Vec<T>) -> Result<Vec<T>> {
    let total = weights.iter().fold(T::zero(), |acc, w| acc + *w);
    if total <= T::zero() {
        return Err(Error::ZeroTrace);
    }
    for w in &mut weights {
        *w = (*w / total).max(T::zero());
    }
    Ok(weights)
}

pub fn fock_probabilities<T: Real>(state: &State<T>) -> Result<Vec<T>> {
    normalize_weights(state.weights())
}

/// `<prod n_i>`, normalized by the state's trace so leakage does not bias it.
pub fn expect<T: Real>(obs: &NumberProduct, state: &State<T>) -> Result<T> {
    let space = state.space();
    obs.check(&space)?;
    let probs = fock_probabilities(state)?;
    Ok(probs
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (flat, p)| acc + *p * T::lit(obs.eigenvalue(&space, flat) as f64)))
}

fn check_ops<T: Real>(ops: &[LocalOp<T>], space: &SpaceSpec) -> Result<()> {
    if ops.len() != space.modes() {
        return Err(Error::DimensionMismatch { expected: space.modes(), got: ops.len() });
    }
    for op in ops {
        if op.nrows() != space.cutoff() || op.ncols() != space.cutoff() {
            return Err(Error::DimensionMismatch { expected: space.cutoff(), got: op.nrows() });
        }
    }
    Ok(())
}

fn pure_expectation<T: Real>(ops: &[LocalOp<T>], psi: &PureState<T>) -> Result<T> {
    let mut phi = psi.clone();
    let space = psi.space();
    for (mode, op) in ops.iter().enumerate() {
        apply_local_1(phi.amplitudes_mut(), &space, op, mode);
    }
    Ok(psi.inner(&phi)?.re)
}

/// `Tr[rho (O_1 (x) ... (x) O_M)] / Tr[rho]`, one `d x d` operator per mode.
/// Returns the real part; callers take the absolute value when needed.
pub fn expect_operator<T: Real>(ops: &[LocalOp<T>], state: &State<T>) -> Result<T> {
    let space = state.space();
    check_ops(ops, &space)?;
    let trace = state.trace();
    if trace <= T::zero() {
        return Err(Error::ZeroTrace);
    }
    match state {
        State::Pure(psi) => Ok(pure_expectation(ops, psi)? / trace),
        State::Mixed(rho) => {
            let n = space.dim();
            let mut m = rho.matrix().clone();
            for col in m.as_mut_slice().chunks_mut(n) {
                for (mode, op) in ops.iter().enumerate() {
                    apply_local_1(col, &space, op, mode);
                }
            }
            let tr = (0..n).fold(czero::<T>(), |acc, i| acc + m[(i, i)]);
            Ok(tr.re / trace)
        }
    }
}

pub fn expect_operator_ensemble<T: Real>(ops: &[LocalOp<T>], ens: &Ensemble<T>) -> Result<T> {
    let space = ens.space();
    check_ops(ops, &space)?;
    let trace = ens.trace();
    if trace <= T::zero() {
        return Err(Error::ZeroTrace);
    }
    let mut acc = T::zero();
    for (w, psi) in ens.components() {
        acc += *w * pure_expectation(ops, psi)?;
    }
    Ok(acc / trace)
}

/// Inverse-CDF sampler over flat Fock indices.
#[derive(Clone, Debug)]
pub struct FockSampler {
    cdf: Vec<f64>,
}

impl FockSampler {
    pub fn new<T: Real>(probs: &[T]) -> Result<Self> {
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in probs {
            acc += p.as_f64();
            cdf.push(acc);
        }
        if acc <= 0.0 {
            return Err(Error::ZeroTrace);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Ok(Self { cdf })
    }

    pub fn draw(&self, rng: &mut seed::Rng) -> usize {
        let u: f64 = rng.random();
        // First index whose cumulative mass exceeds u; zero-probability
        // outcomes share their predecessor's cdf value and are never chosen.
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }

    /// Histogram of `shots` draws, generated as a chain of conditional
    /// binomials so the cost does not grow with `shots`.
    pub fn counts(&self, shots: usize, seed: u64) -> Vec<u64> {
        let mut rng = seed::rng(seed);
        let mut counts = vec![0u64; self.cdf.len()];
        let mut remaining = shots as u64;
        let mut prev = 0.0;
        let mut last = 0;
        for (k, &c) in self.cdf.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            let p = c - prev;
            let rest = 1.0 - prev;
            prev = c;
            if p <= 0.0 {
                continue;
            }
            last = k;
            let q = (p / rest).clamp(0.0, 1.0);
            let n = if q >= 1.0 {
                remaining
            } else {
                Binomial::new(remaining, q).expect("q is a probability").sample(&mut rng)
            };
            counts[k] = n;
            remaining -= n;
        }
        // Rounding in the cdf can leave a few shots unassigned.
        counts[last] += remaining;
        counts
    }
}

/// `shots` independent Fock-basis measurement records, deterministic in `seed`.
pub fn sample_fock<T: Real>(state: &State<T>, shots: usize, seed: u64) -> Result<Vec<OccupationIndex>> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shot count must be >= 1".into()));
    }
    let space = state.space();
    let sampler = FockSampler::new(&fock_probabilities(state)?)?;
    let mut rng = seed::rng(seed);
    Ok((0..shots).map(|_| space.occupation(sampler.draw(&mut rng))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::operators::{quadrature_power, single_mode_state, tensor, Family};
    use nalgebra::DMatrix;

    fn vac(m: usize, d: usize) -> State<f64> {
        State::Pure(PureState::vacuum(SpaceSpec::new(m, d).unwrap()))
    }

    #[test]
    fn empty_subset_is_rejected() {
        assert!(NumberProduct::new(vec![]).is_err());
        assert_eq!(NumberProduct::new(vec![2, 0]).unwrap().name(), "n1n3");
    }

    #[test]
    fn vacuum_expectations_vanish() {
        let v = vac(3, 3);
        for modes in [vec![0], vec![1, 2], vec![0, 1, 2]] {
            assert_eq!(expect(&NumberProduct::new(modes).unwrap(), &v).unwrap(), 0.0);
        }
    }

    #[test]
    fn coherent_marginal_and_eigenstate_products() {
        let coh = tensor(&[
            single_mode_state::<f64>(Family::Coherent(0.6), 16).unwrap(),
            single_mode_state(Family::Fock(0), 16).unwrap(),
        ])
        .unwrap();
        assert!((expect(&NumberProduct::new(vec![0]).unwrap(), &coh).unwrap() - 0.36).abs() < 1e-6);
        let ones = tensor(&[
            single_mode_state::<f64>(Family::Fock(1), 3).unwrap(),
            single_mode_state(Family::Fock(1), 3).unwrap(),
        ])
        .unwrap();
        assert_eq!(expect(&NumberProduct::new(vec![0, 1]).unwrap(), &ones).unwrap(), 1.0);
    }

    #[test]
    fn probabilities_of_vacuum_and_coherent() {
        let p = fock_probabilities(&vac(2, 3)).unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1..].iter().all(|&x| x == 0.0));
        let coh = single_mode_state::<f64>(Family::Coherent(0.6), 16).unwrap();
        let p = fock_probabilities(&coh).unwrap();
        assert!((p[0] - f64::exp(-0.36)).abs() < 1e-4);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_state_has_no_probabilities() {
        let s = SpaceSpec::new(1, 2).unwrap();
        let zero = State::Pure(PureState::new(s, vec![czero::<f64>(), czero()]).unwrap());
        assert!(matches!(fock_probabilities(&zero), Err(Error::ZeroTrace)));
    }

    #[test]
    fn operator_expectations_match_gaussian_moments() {
        let d = 4;
        let v = vac(5, d);
        let id = DMatrix::identity(d, d);
        let ops =
            [quadrature_power::<f64>(4, d), quadrature_power(2, d), quadrature_power(4, d), id.clone(), id.clone()];
        assert!((expect_operator(&ops, &v).unwrap() - 9.0 / 32.0).abs() < 1e-4);
        let ids = vec![id.clone(); 5];
        assert!((expect_operator(&ids, &v).unwrap() - 1.0).abs() < 1e-15);
        // <1|x^4|1> = (3/4)(2n^2 + 2n + 1) at n = 1.
        let mut factors = vec![single_mode_state::<f64>(Family::Fock(1), d).unwrap()];
        factors.extend((0..4).map(|_| single_mode_state(Family::Fock(0), d).unwrap()));
        let s = tensor(&factors).unwrap();
        let mut ops = vec![id.clone(); 5];
        ops[0] = quadrature_power(4, d);
        assert!((expect_operator(&ops, &s).unwrap() - 15.0 / 4.0).abs() < 1e-12);
        assert!(expect_operator(&ops[..4], &s).is_err());
    }

    #[test]
    fn mixed_and_ensemble_operator_expectations_agree() {
        let d = 4;
        let th = single_mode_state::<f64>(Family::Thermal(0.7), d).unwrap();
        let cat = single_mode_state::<f64>(Family::EvenCat(0.9), d).unwrap();
        let s = tensor(&[th, cat]).unwrap();
        let ops = [quadrature_power::<f64>(4, d), quadrature_power(2, d)];
        let dense = expect_operator(&ops, &s).unwrap();
        let ens = expect_operator_ensemble(&ops, &s.to_ensemble().unwrap()).unwrap();
        assert!((dense - ens).abs() < 1e-12);
    }

    #[test]
    fn sampling_vacuum_and_determinism() {
        let v = vac(3, 3);
        assert!(sample_fock(&v, 100, 1).unwrap().iter().all(|o| o.total() == 0));
        let coh = single_mode_state(Family::Coherent(1.1), 6).unwrap();
        assert_eq!(sample_fock(&coh, 500, 9).unwrap(), sample_fock(&coh, 500, 9).unwrap());
        assert_ne!(sample_fock(&coh, 500, 9).unwrap(), sample_fock(&coh, 500, 10).unwrap());
        assert!(sample_fock(&coh, 0, 9).is_err());
    }

    #[test]
    fn sampled_frequencies_within_binomial_bounds() {
        let coh = single_mode_state(Family::Coherent(1.1), 6).unwrap();
        let probs = fock_probabilities(&coh).unwrap();
        let shots = 100_000;
        let counts = FockSampler::new(&probs).unwrap().counts(shots, 3);
        for (p, c) in probs.iter().zip(&counts) {
            let sigma = (shots as f64 * p * (1.0 - p)).sqrt().max(1.0);
            assert!((*c as f64 - shots as f64 * p).abs() < 5.0 * sigma);
        }
    }

    #[test]
    fn sampler_never_draws_zero_probability_outcomes() {
        let counts = FockSampler::new(&[0.0, 0.5, 0.0, 0.5, 0.0]).unwrap().counts(10_000, 4);
        assert_eq!(counts[0] + counts[2] + counts[4], 0);
        assert_eq!(counts.iter().sum::<u64>(), 10_000);
    }
}
