use nalgebra::{DMatrix, SymmetricEigen};

use super::space::{OccupationIndex, SpaceSpec};
use crate::error::{Error, Result};
use crate::scalar::{cone, cr, czero, norm_sqr, Real, C};

/// Dense operator on one or two modes, indexed in Kronecker order.
pub type LocalOp<T> = DMatrix<C<T>>;

fn check_op<T: Real>(op: &LocalOp<T>, side: usize) -> Result<()> {
    if op.nrows() != side || op.ncols() != side {
        return Err(Error::DimensionMismatch { expected: side, got: op.nrows().max(op.ncols()) });
    }
    Ok(())
}

/// `amps <- (1 (x) .. (x) op (x) .. (x) 1) amps` for `op` acting on `mode`.
pub(crate) fn apply_local_1<T: Real>(amps: &mut [C<T>], space: &SpaceSpec, op: &LocalOp<T>, mode: usize) {
    let d = space.cutoff();
    let s = space.stride(mode);
    let block = s * d;
    let mut buf = vec![czero::<T>(); d];
    for outer in (0..amps.len()).step_by(block) {
        for inner in 0..s {
            let base = outer + inner;
            for (j, b) in buf.iter_mut().enumerate() {
                *b = amps[base + j * s];
            }
            for i in 0..d {
                let mut acc = czero::<T>();
                for (j, b) in buf.iter().enumerate() {
                    acc += op[(i, j)] * *b;
                }
                amps[base + i * s] = acc;
            }
        }
    }
}

/// Two-mode analogue of [`apply_local_1`]; `op` is indexed `n_a * d + n_b`.
pub(crate) fn apply_local_2<T: Real>(
    amps: &mut [C<T>],
    space: &SpaceSpec,
    op: &LocalOp<T>,
    mode_a: usize,
    mode_b: usize,
) {
    let d = space.cutoff();
    let (sa, sb) = (space.stride(mode_a), space.stride(mode_b));
    let mut buf = vec![czero::<T>(); d * d];
    for base in 0..amps.len() {
        if space.digit(base, mode_a) != 0 || space.digit(base, mode_b) != 0 {
            continue;
        }
        for i in 0..d {
            for j in 0..d {
                buf[i * d + j] = amps[base + i * sa + j * sb];
            }
        }
        for i in 0..d {
            for j in 0..d {
                let row = i * d + j;
                let mut acc = czero::<T>();
                for (k, b) in buf.iter().enumerate() {
                    acc += op[(row, k)] * *b;
                }
                amps[base + i * sa + j * sb] = acc;
            }
        }
    }
}

/// Truncated pure state. The squared norm may fall below one after
/// non-number-conserving operations; that deficit is the leakage and is never
/// renormalized away.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState<T: Real> {
    space: SpaceSpec,
    amps: Vec<C<T>>,
}

impl<T: Real> PureState<T> {
    pub fn new(space: SpaceSpec, amps: Vec<C<T>>) -> Result<Self> {
        if amps.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), got: amps.len() });
        }
        Ok(Self { space, amps })
    }

    pub fn vacuum(space: SpaceSpec) -> Self {
        let mut amps = vec![czero(); space.dim()];
        amps[0] = cone();
        Self { space, amps }
    }

    pub fn basis(space: SpaceSpec, occ: &OccupationIndex) -> Result<Self> {
        let mut amps = vec![czero(); space.dim()];
        amps[space.flat_index(occ)?] = cone();
        Ok(Self { space, amps })
    }

    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().fold(T::zero(), |acc, z| acc + norm_sqr(*z))
    }

    /// `1 - |psi|^2`, the probability lost past the cutoff.
    pub fn leakage(&self) -> T {
        T::one() - self.norm_sqr()
    }

    pub fn inner(&self, other: &Self) -> Result<C<T>> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch { expected: self.space.dim(), got: other.space.dim() });
        }
        Ok(self.amps.iter().zip(&other.amps).fold(czero(), |acc, (a, b)| acc + a.conj() * b))
    }

    pub fn apply_single_mode_mut(&mut self, op: &LocalOp<T>, mode: usize) -> Result<()> {
        self.space.check_mode(mode)?;
        check_op(op, self.space.cutoff())?;
        apply_local_1(&mut self.amps, &self.space, op, mode);
        Ok(())
    }

    pub fn apply_single_mode(&self, op: &LocalOp<T>, mode: usize) -> Result<Self> {
        let mut out = self.clone();
        out.apply_single_mode_mut(op, mode)?;
        Ok(out)
    }

    pub fn apply_two_mode_mut(&mut self, op: &LocalOp<T>, mode_a: usize, mode_b: usize) -> Result<()> {
        self.space.check_mode(mode_a)?;
        self.space.check_mode(mode_b)?;
        if mode_a == mode_b {
            return Err(Error::InvalidArgument("two-mode operator needs distinct modes".into()));
        }
        let d = self.space.cutoff();
        check_op(op, d * d)?;
        apply_local_2(&mut self.amps, &self.space, op, mode_a, mode_b);
        Ok(())
    }

    /// Unnormalized Fock-basis weights `|amplitude|^2`.
    pub fn weights(&self) -> Vec<T> {
        self.amps.iter().map(|z| norm_sqr(*z)).collect()
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let space = joined_space(&self.space, &other.space)?;
        let mut amps = Vec::with_capacity(space.dim());
        for a in &self.amps {
            amps.extend(other.amps.iter().map(|b| *a * *b));
        }
        Ok(Self { space, amps })
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C<T>] {
        &mut self.amps
    }
}

pub(crate) fn joined_space(a: &SpaceSpec, b: &SpaceSpec) -> Result<SpaceSpec> {
    if a.cutoff() != b.cutoff() {
        return Err(Error::DimensionMismatch { expected: a.cutoff(), got: b.cutoff() });
    }
    SpaceSpec::new(a.modes() + b.modes(), a.cutoff())
}

/// Dense mixed state.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator<T: Real> {
    space: SpaceSpec,
    rho: DMatrix<C<T>>,
}

impl<T: Real> DensityOperator<T> {
    pub fn new(space: SpaceSpec, rho: DMatrix<C<T>>) -> Result<Self> {
        space.check_density()?;
        if rho.nrows() != space.dim() || rho.ncols() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), got: rho.nrows() });
        }
        Ok(Self { space, rho })
    }

    pub fn from_pure(psi: &PureState<T>) -> Result<Self> {
        psi.space.check_density()?;
        let n = psi.amps.len();
        let rho = DMatrix::from_fn(n, n, |i, j| psi.amps[i] * psi.amps[j].conj());
        Ok(Self { space: psi.space, rho })
    }

    /// Diagonal state `sum_n p_n |n><n|`.
    pub fn diagonal(space: SpaceSpec, probs: &[T]) -> Result<Self> {
        if probs.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), got: probs.len() });
        }
        let mut rho = DMatrix::from_element(space.dim(), space.dim(), czero());
        for (i, p) in probs.iter().enumerate() {
            rho[(i, i)] = cr(*p);
        }
        Self::new(space, rho)
    }

    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.rho
    }

    pub fn trace(&self) -> T {
        (0..self.rho.nrows()).fold(T::zero(), |acc, i| acc + self.rho[(i, i)].re)
    }

    pub fn leakage(&self) -> T {
        T::one() - self.trace()
    }

    /// Largest `|rho_ij - conj(rho_ji)|`.
    pub fn hermiticity_error(&self) -> T {
        let n = self.rho.nrows();
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..=i {
                let dev = (self.rho[(i, j)] - self.rho[(j, i)].conj()).norm_sqr().sqrt();
                if dev > worst {
                    worst = dev;
                }
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        let hermitian = (&self.rho + self.rho.adjoint()).map(|z| z * cr(T::lit(0.5)));
        SymmetricEigen::new(hermitian).eigenvalues.iter().copied().collect()
    }

    fn conjugate_by(&mut self, mut apply: impl FnMut(&mut [C<T>])) {
        let n = self.rho.nrows();
        for col in self.rho.as_mut_slice().chunks_mut(n) {
            apply(col);
        }
        self.rho.adjoint_mut();
        for col in self.rho.as_mut_slice().chunks_mut(n) {
            apply(col);
        }
        self.rho.adjoint_mut();
    }

    /// `rho <- O rho O^dagger` with `O` acting on `mode`.
    pub fn apply_single_mode_mut(&mut self, op: &LocalOp<T>, mode: usize) -> Result<()> {
        self.space.check_mode(mode)?;
        check_op(op, self.space.cutoff())?;
        let space = self.space;
        self.conjugate_by(|col| apply_local_1(col, &space, op, mode));
        Ok(())
    }

    pub fn apply_single_mode(&self, op: &LocalOp<T>, mode: usize) -> Result<Self> {
        let mut out = self.clone();
        out.apply_single_mode_mut(op, mode)?;
        Ok(out)
    }

    pub fn apply_two_mode_mut(&mut self, op: &LocalOp<T>, mode_a: usize, mode_b: usize) -> Result<()> {
        self.space.check_mode(mode_a)?;
        self.space.check_mode(mode_b)?;
        if mode_a == mode_b {
            return Err(Error::InvalidArgument("two-mode operator needs distinct modes".into()));
        }
        check_op(op, self.space.cutoff() * self.space.cutoff())?;
        let space = self.space;
        self.conjugate_by(|col| apply_local_2(col, &space, op, mode_a, mode_b));
        Ok(())
    }

    pub fn weights(&self) -> Vec<T> {
        (0..self.rho.nrows()).map(|i| self.rho[(i, i)].re).collect()
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let space = joined_space(&self.space, &other.space)?;
        space.check_density()?;
        Ok(Self { space, rho: self.rho.kronecker(&other.rho) })
    }

    /// Spectral decomposition into a weighted ensemble of orthogonal pure
    /// states; eigenvalues at or below `tol` are dropped.
    pub fn to_ensemble(&self, tol: T) -> Result<Ensemble<T>> {
        let hermitian = (&self.rho + self.rho.adjoint()).map(|z| z * cr(T::lit(0.5)));
        let eig = SymmetricEigen::new(hermitian);
        let mut components = Vec::new();
        for (k, &w) in eig.eigenvalues.iter().enumerate() {
            if w > tol {
                let amps = eig.eigenvectors.column(k).iter().copied().collect();
                components.push((w, PureState::new(self.space, amps)?));
            }
        }
        Ensemble::new(self.space, components)
    }
}

/// A state on the simulator's two code paths.
#[derive(Clone, Debug, PartialEq)]
pub enum State<T: Real> {
    Pure(PureState<T>),
    Mixed(DensityOperator<T>),
}

impl<T: Real> State<T> {
    pub fn space(&self) -> SpaceSpec {
        match self {
            State::Pure(p) => p.space(),
            State::Mixed(m) => m.space(),
        }
    }

    /// Squared norm (pure) or trace (mixed).
    pub fn trace(&self) -> T {
        match self {
            State::Pure(p) => p.norm_sqr(),
            State::Mixed(m) => m.trace(),
        }
    }

    pub fn leakage(&self) -> T {
        T::one() - self.trace()
    }

    pub fn is_mixed(&self) -> bool {
        matches!(self, State::Mixed(_))
    }

    pub fn apply_single_mode(&self, op: &LocalOp<T>, mode: usize) -> Result<Self> {
        Ok(match self {
            State::Pure(p) => State::Pure(p.apply_single_mode(op, mode)?),
            State::Mixed(m) => State::Mixed(m.apply_single_mode(op, mode)?),
        })
    }

    pub fn apply_two_mode_mut(&mut self, op: &LocalOp<T>, mode_a: usize, mode_b: usize) -> Result<()> {
        match self {
            State::Pure(p) => p.apply_two_mode_mut(op, mode_a, mode_b),
            State::Mixed(m) => m.apply_two_mode_mut(op, mode_a, mode_b),
        }
    }

    pub fn apply_single_mode_mut(&mut self, op: &LocalOp<T>, mode: usize) -> Result<()> {
        match self {
            State::Pure(p) => p.apply_single_mode_mut(op, mode),
            State::Mixed(m) => m.apply_single_mode_mut(op, mode),
        }
    }

    /// Unnormalized diagonal weights.
    pub fn weights(&self) -> Vec<T> {
        match self {
            State::Pure(p) => p.weights(),
            State::Mixed(m) => m.weights(),
        }
    }

    pub fn into_density(self) -> Result<DensityOperator<T>> {
        match self {
            State::Pure(p) => DensityOperator::from_pure(&p),
            State::Mixed(m) => Ok(m),
        }
    }

    pub fn to_ensemble(&self) -> Result<Ensemble<T>> {
        match self {
            State::Pure(p) => Ensemble::new(p.space(), vec![(T::one(), p.clone())]),
            State::Mixed(m) => m.to_ensemble(T::zero()),
        }
    }
}

impl<T: Real> From<PureState<T>> for State<T> {
    fn from(p: PureState<T>) -> Self {
        State::Pure(p)
    }
}

impl<T: Real> From<DensityOperator<T>> for State<T> {
    fn from(m: DensityOperator<T>) -> Self {
        State::Mixed(m)
    }
}

/// Mixed state held as `sum_k w_k |psi_k><psi_k|`.
///
/// Every operation the reservoir needs is linear in the density operator, so
/// evolving the pure components separately is exact and avoids the dense
/// `d^M x d^M` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble<T: Real> {
    space: SpaceSpec,
    components: Vec<(T, PureState<T>)>,
}

impl<T: Real> Ensemble<T> {
    pub fn new(space: SpaceSpec, components: Vec<(T, PureState<T>)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("ensemble needs at least one component".into()));
        }
        for (w, psi) in &components {
            if psi.space() != space {
                return Err(Error::DimensionMismatch { expected: space.dim(), got: psi.space().dim() });
            }
            if *w < T::zero() {
                return Err(Error::InvalidArgument("ensemble weights must be nonnegative".into()));
            }
        }
        Ok(Self { space, components })
    }

    pub fn pure(psi: PureState<T>) -> Self {
        Self { space: psi.space(), components: vec![(T::one(), psi)] }
    }

    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    pub fn components(&self) -> &[(T, PureState<T>)] {
        &self.components
    }

    pub fn components_mut(&mut self) -> impl Iterator<Item = &mut PureState<T>> {
        self.components.iter_mut().map(|(_, psi)| psi)
    }

    pub fn trace(&self) -> T {
        self.components.iter().fold(T::zero(), |acc, (w, psi)| acc + *w * psi.norm_sqr())
    }

    pub fn leakage(&self) -> T {
        T::one() - self.trace()
    }

    pub fn weights(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.space.dim()];
        for (w, psi) in &self.components {
            for (o, a) in out.iter_mut().zip(psi.amplitudes()) {
                *o += *w * norm_sqr(*a);
            }
        }
        out
    }

    /// Product ensemble; component weights multiply and zero-weight products
    /// are dropped.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let space = joined_space(&self.space, &other.space)?;
        let mut components = Vec::with_capacity(self.components.len() * other.components.len());
        for (wa, a) in &self.components {
            for (wb, b) in &other.components {
                let w = *wa * *wb;
                if w > T::zero() {
                    components.push((w, a.tensor(b)?));
                }
            }
        }
        Self::new(space, components)
    }

    pub fn to_density(&self) -> Result<DensityOperator<T>> {
        self.space.check_density()?;
        let n = self.space.dim();
        let mut rho = DMatrix::from_element(n, n, czero());
        for (w, psi) in &self.components {
            let a = psi.amplitudes();
            for j in 0..n {
                let bj = a[j].conj() * cr(*w);
                for i in 0..n {
                    rho[(i, j)] += a[i] * bj;
                }
            }
        }
        DensityOperator::new(self.space, rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(m: usize, d: usize) -> SpaceSpec {
        SpaceSpec::new(m, d).unwrap()
    }

    #[test]
    fn vacuum_has_unit_amplitude_at_origin() {
        let v = PureState::<f64>::vacuum(space(1, 2));
        assert_eq!(v.amplitudes(), &[cone(), czero()]);
        let v2 = PureState::<f64>::vacuum(space(2, 2));
        assert_eq!(v2.amplitudes()[0], cone());
        assert_eq!(v2.leakage(), 0.0);
    }

    #[test]
    fn identity_op_leaves_state_bitwise_unchanged() {
        let s = space(3, 3);
        let amps: Vec<C<f64>> = (0..s.dim()).map(|i| C::new(i as f64 * 0.01, -(i as f64) * 0.003)).collect();
        let psi = PureState::new(s, amps).unwrap();
        let id = DMatrix::<C<f64>>::identity(3, 3);
        for mode in 0..3 {
            assert_eq!(psi.apply_single_mode(&id, mode).unwrap(), psi);
        }
        let id2 = DMatrix::<C<f64>>::identity(9, 9);
        let mut psi2 = psi.clone();
        psi2.apply_two_mode_mut(&id2, 0, 2).unwrap();
        assert_eq!(psi2, psi);
    }

    #[test]
    fn mode_index_is_checked() {
        let psi = PureState::<f64>::vacuum(space(2, 2));
        let id = DMatrix::<C<f64>>::identity(2, 2);
        assert!(matches!(psi.apply_single_mode(&id, 2), Err(Error::IndexOutOfRange { .. })));
        let wrong = DMatrix::<C<f64>>::identity(3, 3);
        assert!(matches!(psi.apply_single_mode(&wrong, 0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn single_mode_op_targets_the_right_digit() {
        // sigma_x-like swap of |0> and |1> on mode 1 of a two-mode space.
        let s = space(2, 2);
        let mut flip = DMatrix::from_element(2, 2, czero::<f64>());
        flip[(0, 1)] = cone();
        flip[(1, 0)] = cone();
        let out = PureState::vacuum(s).apply_single_mode(&flip, 1).unwrap();
        assert_eq!(out.amplitudes()[s.flat_index(&vec![0, 1].into()).unwrap()], cone());
    }

    #[test]
    fn density_path_matches_pure_path() {
        let s = space(2, 3);
        let amps: Vec<C<f64>> = (0..9).map(|i| C::new((i as f64).sin(), (i as f64 * 0.7).cos())).collect();
        let psi = PureState::new(s, amps).unwrap();
        let op = DMatrix::from_fn(3, 3, |i, j| C::new(i as f64 - j as f64 * 0.5, (i * j) as f64 * 0.1));
        let op2 = DMatrix::from_fn(9, 9, |i, j| C::new(((i + 2 * j) % 5) as f64 * 0.1, (i as f64 - j as f64) * 0.02));
        let mut p = psi.apply_single_mode(&op, 1).unwrap();
        p.apply_two_mode_mut(&op2, 1, 0).unwrap();
        let mut rho = DensityOperator::from_pure(&psi).unwrap().apply_single_mode(&op, 1).unwrap();
        rho.apply_two_mode_mut(&op2, 1, 0).unwrap();
        let expected = DensityOperator::from_pure(&p).unwrap();
        assert!((rho.matrix() - expected.matrix()).camax() < 1e-12);
    }

    #[test]
    fn ensemble_round_trips_through_density() {
        let s = space(1, 3);
        let rho = DensityOperator::<f64>::diagonal(s, &[0.5, 0.3, 0.2]).unwrap();
        let ens = rho.to_ensemble(0.0).unwrap();
        let back = ens.to_density().unwrap();
        assert!((back.matrix() - rho.matrix()).camax() < 1e-14);
        assert!((ens.trace() - 1.0).abs() < 1e-14);
    }
}
