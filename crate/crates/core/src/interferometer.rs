//! Haar-random linear-optical interferometers, their Clements factorization
//! into nearest-neighbour two-mode rotations, and the exact photon-number
//! conserving action of those rotations in Fock space.

use std::collections::HashMap;

use nalgebra::{DMatrix, Schur};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{apply_local_1, apply_local_2, DensityOperator, Ensemble, LocalOp, PureState, SpaceSpec, State};
use crate::scalar::{arg, cis, cr, czero, Real, C};
use crate::seed;

/// Default unitarity tolerance.
pub const UNITARITY_TOL: f64 = 1e-10;

/// `M x M` unitary acting on mode operators: `a_k^dagger -> sum_l U_lk a_l^dagger`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeUnitary<T: Real> {
    matrix: DMatrix<C<T>>,
}

impl<T: Real> ModeUnitary<T> {
    pub fn new(matrix: DMatrix<C<T>>) -> Result<Self> {
        Self::with_tolerance(matrix, T::lit(UNITARITY_TOL))
    }

    pub fn with_tolerance(matrix: DMatrix<C<T>>, tol: T) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidArgument("unitary must be a nonempty square matrix".into()));
        }
        let deviation = unitarity_deviation(&matrix);
        if deviation > tol {
            return Err(Error::NotUnitary { deviation: deviation.as_f64() });
        }
        Ok(Self { matrix })
    }

    pub fn identity(modes: usize) -> Self {
        Self { matrix: DMatrix::identity(modes, modes) }
    }

    pub fn modes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.matrix
    }

    pub fn deviation(&self) -> T {
        unitarity_deviation(&self.matrix)
    }
}

/// `max |U^dagger U - I|`.
pub fn unitarity_deviation<T: Real>(u: &DMatrix<C<T>>) -> T {
    let n = u.nrows();
    (u.adjoint() * u - DMatrix::<C<T>>::identity(n, n)).iter().fold(T::zero(), |acc, z| acc.max(z.norm_sqr().sqrt()))
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of `R`'s diagonal moved into `Q`.
pub fn haar_unitary<T: Real>(modes: usize, seed: u64) -> Result<ModeUnitary<T>> {
    if modes == 0 {
        return Err(Error::InvalidArgument("interferometer needs at least one mode".into()));
    }
    let mut rng = seed::rng(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let ginibre = DMatrix::from_fn(modes, modes, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C::new(T::lit(re * scale), T::lit(im * scale))
    });
    let qr = ginibre.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for k in 0..modes {
        let d = r[(k, k)];
        let mag = d.norm_sqr().sqrt();
        let phase = if mag > T::zero() { d / cr(mag) } else { C::new(T::one(), T::zero()) };
        for i in 0..modes {
            u[(i, k)] *= phase;
        }
    }
    ModeUnitary::with_tolerance(u, T::lit(1e3) * T::default_epsilon() * T::lit(modes as f64))
}

/// Nearest-neighbour rotation on modes `(mode, mode + 1)`:
/// `[[e^{i phi} cos theta, -sin theta], [e^{i phi} sin theta, cos theta]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation<T> {
    pub mode: usize,
    pub theta: T,
    pub phi: T,
}

impl<T: Real> Rotation<T> {
    pub fn matrix(&self) -> [[C<T>; 2]; 2] {
        let (s, c) = (self.theta.sin(), self.theta.cos());
        let e = cis(self.phi);
        [[e * cr(c), cr(-s)], [e * cr(s), cr(c)]]
    }

    /// Embed into an `M x M` identity.
    pub fn embed(&self, modes: usize) -> DMatrix<C<T>> {
        let mut t = DMatrix::identity(modes, modes);
        let m = self.matrix();
        let (a, b) = (self.mode, self.mode + 1);
        t[(a, a)] = m[0][0];
        t[(a, b)] = m[0][1];
        t[(b, a)] = m[1][0];
        t[(b, b)] = m[1][1];
        t
    }
}

/// Clements factorization `U = D T_K ... T_1`; `rotations` is listed in the
/// order the rotations act (`T_1` first) and `output_phases` holds `arg D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClementsPlan<T> {
    pub modes: usize,
    pub rotations: Vec<Rotation<T>>,
    pub output_phases: Vec<T>,
}

impl<T: Real> ClementsPlan<T> {
    pub fn reconstruct(&self) -> DMatrix<C<T>> {
        let mut u = DMatrix::<C<T>>::identity(self.modes, self.modes);
        for rot in &self.rotations {
            u = rot.embed(self.modes) * u;
        }
        for (i, &alpha) in self.output_phases.iter().enumerate() {
            let p = cis(alpha);
            for j in 0..self.modes {
                u[(i, j)] *= p;
            }
        }
        u
    }
}

/// `(theta, phi)` with `e^{i phi} tan theta = a / b`, well defined when either
/// entry vanishes.
fn nulling_angles<T: Real>(a: C<T>, b: C<T>) -> (T, T) {
    let (ma, mb) = (a.norm_sqr().sqrt(), b.norm_sqr().sqrt());
    if ma == T::zero() {
        return (T::zero(), T::zero());
    }
    let theta = ma.atan2(mb);
    let phi = if mb == T::zero() { arg(a) } else { arg(a) - arg(b) };
    (theta, phi)
}

fn right_multiply_adjoint<T: Real>(v: &mut DMatrix<C<T>>, rot: &Rotation<T>) {
    // v <- v T^dagger on columns (mode, mode + 1).
    let m = rot.matrix();
    let (a, b) = (rot.mode, rot.mode + 1);
    for i in 0..v.nrows() {
        let (x, y) = (v[(i, a)], v[(i, b)]);
        v[(i, a)] = x * m[0][0].conj() + y * m[0][1].conj();
        v[(i, b)] = x * m[1][0].conj() + y * m[1][1].conj();
    }
}

fn left_multiply<T: Real>(v: &mut DMatrix<C<T>>, rot: &Rotation<T>) {
    let m = rot.matrix();
    let (a, b) = (rot.mode, rot.mode + 1);
    for j in 0..v.ncols() {
        let (x, y) = (v[(a, j)], v[(b, j)]);
        v[(a, j)] = m[0][0] * x + m[0][1] * y;
        v[(b, j)] = m[1][0] * x + m[1][1] * y;
    }
}

/// Factor a unitary into `M(M-1)/2` nearest-neighbour rotations and output
/// phases.
pub fn clements_decompose<T: Real>(u: &ModeUnitary<T>) -> Result<ClementsPlan<T>> {
    let n = u.modes();
    let mut v = u.matrix().clone();
    let mut right = Vec::new();
    let mut left = Vec::new();
    for (k, i) in (0..n.saturating_sub(1)).rev().enumerate() {
        if k % 2 == 0 {
            for j in (0..n - 1 - i).rev() {
                let row = i + j + 1;
                let (theta, phi) = nulling_angles(v[(row, j)], v[(row, j + 1)]);
                let rot = Rotation { mode: j, theta, phi };
                right_multiply_adjoint(&mut v, &rot);
                right.push(rot);
            }
        } else {
            for j in 0..n - 1 - i {
                let row = i + j + 1;
                let (theta, phi) = nulling_angles(-v[(row, j)], v[(row - 1, j)]);
                let rot = Rotation { mode: row - 1, theta, phi };
                left_multiply(&mut v, &rot);
                left.push(rot);
            }
        }
    }
    // Now (L_k .. L_1) U (R_1^dagger .. R_r^dagger) = D. Push every L^dagger
    // through D using T(theta, phi)^dagger D = D' T(theta, phi').
    let mut phases: Vec<T> = (0..n).map(|i| arg(v[(i, i)])).collect();
    let pi = T::pi();
    let mut rotations = right;
    for rot in left.iter().rev() {
        let (a, b) = (rot.mode, rot.mode + 1);
        let (pa, pb) = (phases[a], phases[b]);
        rotations.push(Rotation { mode: rot.mode, theta: rot.theta, phi: wrap_phase(pa - pb + pi) });
        phases[a] = wrap_phase(pb - rot.phi + pi);
    }
    Ok(ClementsPlan { modes: n, rotations, output_phases: phases })
}

fn wrap_phase<T: Real>(x: T) -> T {
    let two_pi = T::two_pi();
    let mut y = x % two_pi;
    if y > T::pi() {
        y -= two_pi;
    } else if y <= -T::pi() {
        y += two_pi;
    }
    y
}

/// Fock-space lift of a rotation on two modes with cutoff `d`, as a
/// `d^2 x d^2` operator indexed `n_a * d + n_b`.
///
/// The mixing generator `theta (a_b^dagger a_a - a_a^dagger a_b)` is
/// exponentiated with `2d - 1` levels per mode, which holds every sector up to
/// total photon number `2(d - 1)` exactly, then truncated. Sectors with at most
/// `d - 1` photons stay exactly unitary.
pub fn beamsplitter_fock<T: Real>(theta: T, phi: T, d: usize) -> LocalOp<T> {
    let p = 2 * d - 1;
    let mut gen = DMatrix::from_element(p * p, p * p, czero::<T>());
    for na in 0..p {
        for nb in 0..p {
            let col = na * p + nb;
            // a_b^dagger a_a
            if na > 0 && nb + 1 < p {
                let amp = T::lit((na as f64).sqrt() * ((nb + 1) as f64).sqrt()) * theta;
                gen[((na - 1) * p + nb + 1, col)] += cr(amp);
            }
            // -a_a^dagger a_b
            if nb > 0 && na + 1 < p {
                let amp = T::lit((nb as f64).sqrt() * ((na + 1) as f64).sqrt()) * theta;
                gen[((na + 1) * p + nb - 1, col)] -= cr(amp);
            }
        }
    }
    let mix = gen.exp();
    DMatrix::from_fn(d * d, d * d, |r, c| {
        let (ra, rb) = (r / d, r % d);
        let (ca, cb) = (c / d, c % d);
        mix[(ra * p + rb, ca * p + cb)] * cis(phi * T::lit(ca as f64))
    })
}

/// Precompiled Fock-space action of a [`ClementsPlan`].
#[derive(Clone, Debug)]
pub struct FockInterferometer<T: Real> {
    space: SpaceSpec,
    steps: Vec<(usize, LocalOp<T>)>,
    phases: Vec<LocalOp<T>>,
}

impl<T: Real> FockInterferometer<T> {
    pub fn new(plan: &ClementsPlan<T>, space: SpaceSpec) -> Result<Self> {
        if plan.modes != space.modes() {
            return Err(Error::DimensionMismatch { expected: space.modes(), got: plan.modes });
        }
        let d = space.cutoff();
        let steps = plan.rotations.iter().map(|r| (r.mode, beamsplitter_fock(r.theta, r.phi, d))).collect();
        let phases = plan
            .output_phases
            .iter()
            .map(|&alpha| DMatrix::from_fn(d, d, |i, j| if i == j { cis(alpha * T::lit(i as f64)) } else { czero() }))
            .collect();
        Ok(Self { space, steps, phases })
    }

    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    fn run(&self, amps: &mut [C<T>]) {
        for (mode, op) in &self.steps {
            apply_local_2(amps, &self.space, op, *mode, *mode + 1);
        }
        for (mode, op) in self.phases.iter().enumerate() {
            apply_local_1(amps, &self.space, op, mode);
        }
    }

    fn check(&self, space: SpaceSpec) -> Result<()> {
        if space != self.space {
            return Err(Error::DimensionMismatch { expected: self.space.dim(), got: space.dim() });
        }
        Ok(())
    }

    pub fn apply_pure(&self, psi: &mut PureState<T>) -> Result<()> {
        self.check(psi.space())?;
        self.run(psi.amplitudes_mut());
        Ok(())
    }

    pub fn apply_density(&self, rho: &mut DensityOperator<T>) -> Result<()> {
        self.check(rho.space())?;
        for (mode, op) in &self.steps {
            rho.apply_two_mode_mut(op, *mode, *mode + 1)?;
        }
        for (mode, op) in self.phases.iter().enumerate() {
            rho.apply_single_mode_mut(op, mode)?;
        }
        Ok(())
    }

    pub fn apply_ensemble(&self, ens: &mut Ensemble<T>) -> Result<()> {
        self.check(ens.space())?;
        for psi in ens.components_mut() {
            self.run(psi.amplitudes_mut());
        }
        Ok(())
    }

    /// Apply to any state, warning when support at total photon number `>= d`
    /// made the truncated action lose probability.
    pub fn apply(&self, state: &State<T>) -> Result<State<T>> {
        let before = state.trace();
        let mut out = state.clone();
        match &mut out {
            State::Pure(p) => self.apply_pure(p)?,
            State::Mixed(m) => self.apply_density(m)?,
        }
        let lost = before - out.trace();
        if lost.as_f64() > 1e-10 {
            log::warn!(
                "interferometer lost {:.3e} probability from support at total photon number >= {} (high-sector weight {:.3e})",
                lost.as_f64(),
                self.space.cutoff(),
                high_sector_weight(state).as_f64()
            );
        }
        Ok(out)
    }
}

/// Weight of the state's support with total photon number `>= d`, where the
/// truncated interferometer is not exactly number conserving.
pub fn high_sector_weight<T: Real>(state: &State<T>) -> T {
    let space = state.space();
    state
        .weights()
        .iter()
        .enumerate()
        .filter(|(flat, _)| space.occupation(*flat).total() >= space.cutoff())
        .fold(T::zero(), |acc, (_, w)| acc + *w)
}

/// Apply a plan to a state (see [`FockInterferometer::apply`]).
pub fn apply_interferometer<T: Real>(plan: &ClementsPlan<T>, state: &State<T>) -> Result<State<T>> {
    FockInterferometer::new(plan, state.space())?.apply(state)
}

/// Largest Fock dimension the dense oracle will build.
pub const ORACLE_MAX_DIM: usize = 4096;

/// Independent dense lift of `U` to Fock space: `exp(sum_lk L_lk a_l^dagger a_k)`
/// with `L = log U` on the principal branch, exponentiated sector by sector in
/// total photon number (no per-mode cutoff inside a sector) and then truncated
/// to `d` levels per mode.
///
/// When `U` has an eigenvalue within `1e-8` of `-1` the branch is ambiguous;
/// the oracle then lifts `e^{i g} U` for a fixed offset `g` and removes the
/// resulting `e^{i g N}` factor.
pub fn lift_oracle<T: Real>(u: &ModeUnitary<T>, d: usize) -> Result<DMatrix<C<T>>> {
    let space = SpaceSpec::new(u.modes(), d)?;
    if space.dim() > ORACLE_MAX_DIM {
        return Err(Error::DimensionLimit { dim: space.dim(), limit: ORACLE_MAX_DIM });
    }
    for &offset in &[0.0, 0.3711, 1.1093, 2.2137] {
        let shifted = u.matrix().map(|z| z * cis(T::lit(offset)));
        match principal_log(&shifted) {
            Ok(log) => {
                if offset != 0.0 {
                    log::warn!("lift_oracle: eigenvalue near -1, retrying with global phase {offset}");
                }
                let mut lift = sector_lift(&log, &space);
                for (c, mut col) in lift.column_iter_mut().enumerate() {
                    let n = space.occupation(c).total();
                    let fix = cis(T::lit(-offset * n as f64));
                    for z in col.iter_mut() {
                        *z *= fix;
                    }
                }
                return Ok(lift);
            }
            Err(Error::LogBranch) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::LogBranch)
}

/// `log U` for a unitary via its Schur form, refusing eigenvalues near `-1`.
pub fn principal_log<T: Real>(u: &DMatrix<C<T>>) -> Result<DMatrix<C<T>>> {
    let (q, t) = Schur::new(u.clone()).unpack();
    let n = u.nrows();
    let mut diag = DMatrix::from_element(n, n, czero::<T>());
    for k in 0..n {
        let z = t[(k, k)];
        if (z + cr(T::one())).norm_sqr().sqrt() < T::lit(1e-8) {
            return Err(Error::LogBranch);
        }
        diag[(k, k)] = C::new(T::zero(), arg(z));
    }
    Ok(&q * diag * q.adjoint())
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(rest: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(rest);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in 0..=rest {
            cur.push(k);
            rec(rest - k, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    out
}

fn sector_lift<T: Real>(log: &DMatrix<C<T>>, space: &SpaceSpec) -> DMatrix<C<T>> {
    let m = space.modes();
    let d = space.cutoff();
    let mut lift = DMatrix::from_element(space.dim(), space.dim(), czero::<T>());
    for total in 0..=m * (d - 1) {
        let basis = compositions(total, m);
        let index: HashMap<&[usize], usize> = basis.iter().enumerate().map(|(i, v)| (v.as_slice(), i)).collect();
        let size = basis.len();
        let mut gen = DMatrix::from_element(size, size, czero::<T>());
        for (col, occ) in basis.iter().enumerate() {
            for k in 0..m {
                if occ[k] == 0 {
                    continue;
                }
                for l in 0..m {
                    let coeff = log[(l, k)];
                    if l == k {
                        gen[(col, col)] += coeff * cr(T::lit(occ[k] as f64));
                        continue;
                    }
                    let mut out = occ.clone();
                    out[k] -= 1;
                    out[l] += 1;
                    let amp = ((occ[k] as f64) * (out[l] as f64)).sqrt();
                    gen[(index[out.as_slice()], col)] += coeff * cr(T::lit(amp));
                }
            }
        }
        let block = gen.exp();
        let inside: Vec<Option<usize>> = basis
            .iter()
            .map(|occ| if occ.iter().all(|&n| n < d) { space.flat_index(&occ.clone().into()).ok() } else { None })
            .collect();
        for (i, fi) in inside.iter().enumerate() {
            let Some(fi) = fi else { continue };
            for (j, fj) in inside.iter().enumerate() {
                if let Some(fj) = fj {
                    lift[(*fi, *fj)] = block[(i, j)];
                }
            }
        }
    }
    lift
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{fock_probabilities, squeezer_matrix, vacuum, NumberProduct};

    fn max_abs(m: &DMatrix<C<f64>>) -> f64 {
        m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    #[test]
    fn single_mode_haar_is_a_phase() {
        let u = haar_unitary::<f64>(1, 3).unwrap();
        assert!((u.matrix()[(0, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn haar_is_unitary_and_seeded() {
        let u = haar_unitary::<f64>(5, 11).unwrap();
        assert!(u.deviation() < 1e-12);
        assert_eq!(u, haar_unitary::<f64>(5, 11).unwrap());
        assert_ne!(u, haar_unitary::<f64>(5, 12).unwrap());
    }

    #[test]
    fn non_unitary_is_rejected() {
        let m = DMatrix::from_element(2, 2, C::new(1.0, 0.0));
        assert!(matches!(ModeUnitary::<f64>::new(m), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn clements_round_trips_random_unitaries() {
        for modes in 1..=7 {
            for s in 0..5 {
                let u = haar_unitary::<f64>(modes, 100 + s).unwrap();
                let plan = clements_decompose(&u).unwrap();
                assert_eq!(plan.rotations.len(), modes * (modes - 1) / 2);
                assert!(max_abs(&(plan.reconstruct() - u.matrix())) < 1e-10, "M={modes}");
            }
        }
    }

    #[test]
    fn identity_and_phase_matrices_have_no_mixing() {
        let id = ModeUnitary::<f64>::identity(4);
        let plan = clements_decompose(&id).unwrap();
        assert!(plan.rotations.iter().all(|r: &Rotation<f64>| r.theta.abs() < 1e-15));
        assert!(max_abs(&(plan.reconstruct() - id.matrix())) < 1e-12);
        let phases = [0.3, -1.2, 2.9, 0.0];
        let d = DMatrix::from_fn(4, 4, |i, j| if i == j { cis(phases[i]) } else { czero() });
        let plan = clements_decompose(&ModeUnitary::new(d.clone()).unwrap()).unwrap();
        assert!(plan.rotations.iter().all(|r: &Rotation<f64>| r.theta.abs() < 1e-15));
        assert!(max_abs(&(plan.reconstruct() - d)) < 1e-12);
    }

    #[test]
    fn plan_serializes_to_json_compatible_form() {
        let plan = clements_decompose(&haar_unitary::<f64>(3, 5).unwrap()).unwrap();
        let text = toml::to_string(&plan).unwrap();
        let back: ClementsPlan<f64> = toml::from_str(&text).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn zero_angle_beamsplitter_is_phase_only() {
        let id = beamsplitter_fock::<f64>(0.0, 0.0, 4);
        assert!(max_abs(&(id - DMatrix::identity(16, 16))) < 1e-15);
        let ph = beamsplitter_fock::<f64>(0.0, 0.7, 3);
        for i in 0..9 {
            for j in 0..9 {
                if i != j {
                    assert!(ph[(i, j)].norm() < 1e-15);
                }
            }
        }
        assert!((ph[(3, 3)] - cis(0.7)).norm() < 1e-15);
    }

    fn two_mode_probs(op: &LocalOp<f64>, occ: Vec<usize>, d: usize) -> Vec<f64> {
        let space = SpaceSpec::new(2, d).unwrap();
        let mut psi = PureState::basis(space, &occ.into()).unwrap();
        psi.apply_two_mode_mut(op, 0, 1).unwrap();
        fock_probabilities(&State::Pure(psi)).unwrap()
    }

    #[test]
    fn balanced_beamsplitter_shows_hong_ou_mandel_dip() {
        let d = 4;
        let op = beamsplitter_fock::<f64>(std::f64::consts::FRAC_PI_4, 0.0, d);
        let p = two_mode_probs(&op, vec![1, 1], d);
        assert!(p[d + 1] < 1e-10);
        assert!((p[2 * d] - 0.5).abs() < 1e-12 && (p[2] - 0.5).abs() < 1e-12);
        let p = two_mode_probs(&op, vec![1, 0], d);
        assert!((p[d] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn beamsplitter_is_unitary_below_cutoff_sector() {
        let d = 4;
        let op = beamsplitter_fock::<f64>(0.63, -1.1, d);
        let low: Vec<usize> = (0..d * d).filter(|i| i / d + i % d < d).collect();
        for &i in &low {
            for &j in &low {
                let dot: C<f64> = (0..d * d).map(|k| op[(k, i)].conj() * op[(k, j)]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - C::new(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn interferometer_maps_vacuum_to_vacuum() {
        let space = SpaceSpec::new(3, 4).unwrap();
        let plan = clements_decompose(&haar_unitary::<f64>(3, 2).unwrap()).unwrap();
        let out = apply_interferometer(&plan, &State::Pure(vacuum(space))).unwrap();
        let p = fock_probabilities(&out).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn interferometer_conserves_photon_number_sectors() {
        let d = 4;
        let space = SpaceSpec::new(3, d).unwrap();
        let plan = clements_decompose(&haar_unitary::<f64>(3, 8).unwrap()).unwrap();
        let fi = FockInterferometer::new(&plan, space).unwrap();
        for flat in 0..space.dim() {
            let occ = space.occupation(flat);
            if occ.total() >= d {
                continue;
            }
            let mut psi = PureState::basis(space, &occ).unwrap();
            fi.apply_pure(&mut psi).unwrap();
            for (g, a) in psi.amplitudes().iter().enumerate() {
                if space.occupation(g).total() != occ.total() {
                    assert!(a.norm() < 1e-10);
                }
            }
            assert!((psi.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn mean_photon_number_preserved_on_squeezed_input() {
        let d = 4;
        let space = SpaceSpec::new(3, d).unwrap();
        let mut state = State::Pure(vacuum(space));
        state.apply_single_mode_mut(&squeezer_matrix(0.2, d).unwrap(), 0).unwrap();
        let plan = clements_decompose(&haar_unitary::<f64>(3, 4).unwrap()).unwrap();
        let total = |s: &State<f64>| -> f64 {
            // Sum of unnormalized <n_i> restricted to sectors below the cutoff.
            s.weights()
                .iter()
                .enumerate()
                .filter(|(f, _)| space.occupation(*f).total() < d)
                .map(|(f, w)| w * space.occupation(f).total() as f64)
                .sum()
        };
        let out = apply_interferometer(&plan, &state).unwrap();
        assert!((total(&out) - total(&state)).abs() < 1e-10);
        let _ = NumberProduct::new(vec![0]).unwrap();
    }

    #[test]
    fn oracle_of_identity_is_identity() {
        let lift = lift_oracle(&ModeUnitary::<f64>::identity(2), 3).unwrap();
        assert!(max_abs(&(lift - DMatrix::identity(9, 9))) < 1e-12);
    }

    #[test]
    fn principal_log_inverts_exponential() {
        let u = haar_unitary::<f64>(4, 21).unwrap();
        let log = principal_log(u.matrix()).unwrap();
        assert!(max_abs(&(log.exp() - u.matrix())) < 1e-12);
        assert!(max_abs(&(&log + log.adjoint())) < 1e-12);
    }

    #[test]
    fn oracle_handles_eigenvalue_minus_one() {
        // Swap matrix has eigenvalues +1 and -1.
        let mut swap = DMatrix::from_element(2, 2, czero::<f64>());
        swap[(0, 1)] = C::new(1.0, 0.0);
        swap[(1, 0)] = C::new(1.0, 0.0);
        let u = ModeUnitary::new(swap).unwrap();
        assert!(matches!(principal_log(u.matrix()), Err(Error::LogBranch)));
        let lift = lift_oracle(&u, 3).unwrap();
        let space = SpaceSpec::new(2, 3).unwrap();
        // |1,0> -> |0,1>, |2,0> -> |0,2>
        let f = |o: Vec<usize>| space.flat_index(&o.into()).unwrap();
        assert!((lift[(f(vec![0, 1]), f(vec![1, 0]))] - C::new(1.0, 0.0)).norm() < 1e-10);
        assert!((lift[(f(vec![0, 2]), f(vec![2, 0]))] - C::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn oracle_agrees_with_beamsplitter_on_two_modes() {
        let d = 4;
        for (theta, phi) in [(0.4, 0.0), (1.1, 2.0), (std::f64::consts::FRAC_PI_4, -0.5)] {
            let rot = Rotation { mode: 0, theta, phi };
            let u = ModeUnitary::new(rot.embed(2)).unwrap();
            let lift = lift_oracle(&u, d).unwrap();
            let bs = beamsplitter_fock(theta, phi, d);
            for c in 0..d * d {
                if c / d + c % d >= d {
                    continue;
                }
                for r in 0..d * d {
                    assert!((lift[(r, c)] - bs[(r, c)]).norm() < 1e-10);
                }
            }
        }
    }
}
