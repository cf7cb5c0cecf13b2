use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::measure::{expect, NumberProduct};
use super::space::SpaceSpec;
use super::state::{DensityOperator, Ensemble, LocalOp, PureState, State};
use crate::error::{Error, Result};
use crate::scalar::{cr, czero, Real, C};

/// Squeezing cap of 2.6 dB, `r = 2.6 ln(10) / 20` rounded to five digits.
pub const R_MAX_DEFAULT: f64 = 0.29934;

/// Extra Fock levels used when exponentiating a generator before truncation.
pub const SQUEEZER_PADDING: usize = 12;

/// Convert a squeezing level in dB to the parameter `r` of
/// `S(r) = exp[(r/2)(a^2 - a^dagger^2)]`.
pub fn db_to_r(db: f64) -> f64 {
    db * std::f64::consts::LN_10 / 20.0
}

pub fn r_to_db(r: f64) -> f64 {
    r * 20.0 / std::f64::consts::LN_10
}

/// Annihilation operator on `dim` levels.
pub fn annihilation<T: Real>(dim: usize) -> LocalOp<T> {
    let mut a = DMatrix::from_element(dim, dim, czero());
    for n in 1..dim {
        a[(n - 1, n)] = cr(T::lit((n as f64).sqrt()));
    }
    a
}

pub fn number_op<T: Real>(dim: usize) -> LocalOp<T> {
    let mut n = DMatrix::from_element(dim, dim, czero());
    for k in 0..dim {
        n[(k, k)] = cr(T::lit(k as f64));
    }
    n
}

fn truncate<T: Real>(m: &LocalOp<T>, d: usize) -> LocalOp<T> {
    m.view((0, 0), (d, d)).into_owned()
}

/// Single-mode squeezer truncated to `d` levels, refusing `|r| > r_max`.
pub fn squeezer_matrix<T: Real>(r: T, d: usize) -> Result<LocalOp<T>> {
    squeezer_matrix_capped(r, d, T::lit(R_MAX_DEFAULT))
}

pub fn squeezer_matrix_capped<T: Real>(r: T, d: usize, r_max: T) -> Result<LocalOp<T>> {
    if d < 2 {
        return Err(Error::InvalidSpace(format!("cutoff must be >= 2, got {d}")));
    }
    // Tolerate rounding in callers that scale inputs by r_max.
    if r.abs() > r_max * T::lit(1.0 + 1e-12) {
        return Err(Error::SqueezingCap { r: r.as_f64(), r_max: r_max.as_f64() });
    }
    Ok(squeezer_padded(r, d, SQUEEZER_PADDING))
}

/// Builds `(r/2)(a^2 - a^dagger^2)` in `d + padding` levels, exponentiates it,
/// then keeps the top-left `d x d` block. No cap is applied.
pub fn squeezer_padded<T: Real>(r: T, d: usize, padding: usize) -> LocalOp<T> {
    let work = d + padding;
    let a = annihilation::<T>(work);
    let a2 = &a * &a;
    let gen = (&a2 - a2.adjoint()) * cr(r * T::lit(0.5));
    truncate(&gen.exp(), d)
}

/// Position quadrature `(a + a^dagger)/sqrt(2)` truncated to `d` levels.
pub fn quadrature_matrix<T: Real>(d: usize) -> LocalOp<T> {
    let a = annihilation::<T>(d);
    (&a + a.adjoint()) * cr(T::lit(std::f64::consts::FRAC_1_SQRT_2))
}

/// `x^power` with exact matrix elements inside the cutoff: the power is taken
/// in `d + power` levels and then truncated.
pub fn quadrature_power<T: Real>(power: u32, d: usize) -> LocalOp<T> {
    let work = d + power as usize;
    let x = quadrature_matrix::<T>(work);
    let mut acc = DMatrix::<C<T>>::identity(work, work);
    for _ in 0..power {
        acc = &acc * &x;
    }
    truncate(&acc, d)
}

/// Single-mode input families used for quantum data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "param", rename_all = "snake_case")]
pub enum Family<T> {
    Fock(usize),
    Coherent(T),
    EvenCat(T),
    Thermal(T),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Fock,
    Coherent,
    EvenCat,
    Thermal,
}

impl<T: Real> Family<T> {
    pub fn kind(&self) -> FamilyKind {
        match self {
            Family::Fock(_) => FamilyKind::Fock,
            Family::Coherent(_) => FamilyKind::Coherent,
            Family::EvenCat(_) => FamilyKind::EvenCat,
            Family::Thermal(_) => FamilyKind::Thermal,
        }
    }

    fn with_param(kind: FamilyKind, p: T) -> Self {
        match kind {
            FamilyKind::Fock => Family::Fock(p.as_f64().round() as usize),
            FamilyKind::Coherent => Family::Coherent(p),
            FamilyKind::EvenCat => Family::EvenCat(p),
            FamilyKind::Thermal => Family::Thermal(p),
        }
    }
}

fn coherent_amplitudes(alpha: f64, d: usize) -> Vec<f64> {
    let mut amps = Vec::with_capacity(d);
    let mut term = (-alpha * alpha / 2.0).exp();
    for n in 0..d {
        if n > 0 {
            term *= alpha / (n as f64).sqrt();
        }
        amps.push(term);
    }
    amps
}

/// Prepare one mode of the family at cutoff `d`. Thermal states are mixed;
/// every other family is pure.
///
/// Coherent states are truncated without renormalization; even cats and
/// thermal states are renormalized after truncation.
pub fn single_mode_state<T: Real>(family: Family<T>, d: usize) -> Result<State<T>> {
    let space = SpaceSpec::new(1, d)?;
    let to_state = |amps: Vec<f64>| -> Result<State<T>> {
        Ok(State::Pure(PureState::new(space, amps.into_iter().map(|a| cr(T::lit(a))).collect())?))
    };
    match family {
        Family::Fock(n) => {
            if n >= d {
                return Err(Error::IndexOutOfRange { index: n, bound: d });
            }
            Ok(State::Pure(PureState::basis(space, &vec![n].into())?))
        }
        Family::Coherent(alpha) => to_state(coherent_amplitudes(finite(alpha)?, d)),
        Family::EvenCat(alpha) => {
            let alpha = finite(alpha)?;
            let amps: Vec<f64> = coherent_amplitudes(alpha, d)
                .into_iter()
                .enumerate()
                .map(|(n, a)| if n % 2 == 0 { 2.0 * a } else { 0.0 })
                .collect();
            let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
            to_state(amps.into_iter().map(|a| a / norm).collect())
        }
        Family::Thermal(nbar) => {
            let nbar = finite(nbar)?;
            if nbar < 0.0 {
                return Err(Error::InvalidArgument(format!("thermal mean photon number {nbar} < 0")));
            }
            let ratio = nbar / (1.0 + nbar);
            let raw: Vec<f64> = (0..d).map(|n| ratio.powi(n as i32)).collect();
            let total: f64 = raw.iter().sum();
            let probs: Vec<T> = raw.into_iter().map(|p| T::lit(p / total)).collect();
            Ok(State::Mixed(DensityOperator::diagonal(space, &probs)?))
        }
    }
}

/// Same as [`single_mode_state`] but as an ensemble of pure states, which is
/// how the reservoir consumes mixed inputs.
pub fn single_mode_ensemble<T: Real>(family: Family<T>, d: usize) -> Result<Ensemble<T>> {
    match single_mode_state(family, d)? {
        State::Pure(p) => Ok(Ensemble::pure(p)),
        State::Mixed(m) => {
            let space = m.space();
            let components = m
                .weights()
                .into_iter()
                .enumerate()
                .filter(|(_, w)| *w > T::zero())
                .map(|(n, w)| Ok((w, PureState::basis(space, &vec![n].into())?)))
                .collect::<Result<Vec<_>>>()?;
            Ensemble::new(space, components)
        }
    }
}

fn finite<T: Real>(x: T) -> Result<f64> {
    let v = x.as_f64();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidArgument(format!("non-finite parameter {v}")))
    }
}

/// Find the family parameter whose truncated state has mean photon number
/// `target`, by bisection on the simulator's own `<n>`.
pub fn calibrate_mean_photon<T: Real>(kind: FamilyKind, target: T, d: usize) -> Result<Family<T>> {
    if kind == FamilyKind::Fock {
        return Err(Error::InvalidArgument("Fock states are set by n, not calibrated".into()));
    }
    let mean = |p: T| -> Result<T> {
        let state = single_mode_state(Family::with_param(kind, p), d)?;
        expect(&NumberProduct::new(vec![0])?, &state)
    };
    let mut lo = T::zero();
    let mut hi = T::one();
    let ceiling = T::lit(64.0);
    while mean(hi)? < target {
        if hi >= ceiling {
            return Err(Error::Unattainable {
                target: target.as_f64(),
                lo: mean(T::zero())?.as_f64(),
                hi: mean(hi)?.as_f64(),
            });
        }
        lo = hi;
        hi *= T::lit(2.0);
    }
    if target < mean(lo)? {
        return Err(Error::Unattainable { target: target.as_f64(), lo: mean(lo)?.as_f64(), hi: mean(hi)?.as_f64() });
    }
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if mean(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (m_lo, m_hi) = (mean(lo)?, mean(hi)?);
    let best = if (m_lo - target).abs() <= (m_hi - target).abs() { lo } else { hi };
    Ok(Family::with_param(kind, best))
}

/// Kronecker product in mode order. Any mixed factor promotes the result to a
/// density operator.
pub fn tensor<T: Real>(factors: &[State<T>]) -> Result<State<T>> {
    let (first, rest) = factors.split_first().ok_or_else(|| Error::InvalidArgument("tensor of zero factors".into()))?;
    let any_mixed = factors.iter().any(State::is_mixed);
    if !any_mixed {
        let State::Pure(mut acc) = first.clone() else { unreachable!() };
        for f in rest {
            let State::Pure(p) = f else { unreachable!() };
            acc = acc.tensor(p)?;
        }
        return Ok(State::Pure(acc));
    }
    let mut acc = first.clone().into_density()?;
    for f in rest {
        acc = acc.tensor(&f.clone().into_density()?)?;
    }
    Ok(State::Mixed(acc))
}

pub fn tensor_ensembles<T: Real>(factors: &[Ensemble<T>]) -> Result<Ensemble<T>> {
    let (first, rest) = factors.split_first().ok_or_else(|| Error::InvalidArgument("tensor of zero factors".into()))?;
    rest.iter().try_fold(first.clone(), |acc, f| acc.tensor(f))
}
