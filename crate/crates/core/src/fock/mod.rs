//! Truncated Fock-space simulation of multimode bosonic states.
//!
//! Pure states hold `d^M` complex amplitudes; mixed states are either a dense
//! [`DensityOperator`] or an [`Ensemble`] of pure states. Operators that do not
//! conserve photon number (squeezers) leak probability past the cutoff; the
//! leakage is tracked and expectations are normalized by the remaining trace.

mod measure;
mod operators;
mod space;
mod state;

pub use measure::{
    expect, expect_operator, expect_operator_ensemble, fock_probabilities, normalize_weights, sample_fock, FockSampler,
    NumberProduct,
};
pub use operators::{
    annihilation, calibrate_mean_photon, db_to_r, number_op, quadrature_matrix, quadrature_power, r_to_db,
    single_mode_ensemble, single_mode_state, squeezer_matrix, squeezer_matrix_capped, squeezer_padded, tensor,
    tensor_ensembles, Family, FamilyKind, R_MAX_DEFAULT, SQUEEZER_PADDING,
};
pub use space::{OccupationIndex, SpaceSpec, MAX_DENSITY_SIDE, MAX_PURE_DIM};
pub use state::{DensityOperator, Ensemble, LocalOp, PureState, State};

pub(crate) use state::{apply_local_1, apply_local_2};

/// Vacuum on every mode.
pub fn vacuum<T: crate::scalar::Real>(space: SpaceSpec) -> PureState<T> {
    PureState::vacuum(space)
}
