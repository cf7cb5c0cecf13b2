use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of amplitudes a pure state may hold.
pub const MAX_PURE_DIM: usize = 1 << 20;
/// Largest side length of a dense density operator.
pub const MAX_DENSITY_SIDE: usize = 1 << 14;

/// Shape of a truncated multimode Fock space: `modes` modes, each holding
/// occupations `0..cutoff`.
///
/// Flat indices use mixed-radix order with mode 0 most significant, which is
/// the Kronecker-product order of the factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceSpec {
    modes: usize,
    cutoff: usize,
}

impl SpaceSpec {
    pub fn new(modes: usize, cutoff: usize) -> Result<Self> {
        Self::with_limit(modes, cutoff, MAX_PURE_DIM)
    }

    pub fn with_limit(modes: usize, cutoff: usize, limit: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidSpace("at least one mode is required".into()));
        }
        if cutoff < 2 {
            return Err(Error::InvalidSpace(format!("cutoff must be >= 2, got {cutoff}")));
        }
        let dim = u32::try_from(modes)
            .ok()
            .and_then(|m| cutoff.checked_pow(m))
            .ok_or(Error::DimensionLimit { dim: usize::MAX, limit })?;
        if dim > limit {
            return Err(Error::DimensionLimit { dim, limit });
        }
        Ok(Self { modes, cutoff })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Total dimension `cutoff^modes`.
    pub fn dim(&self) -> usize {
        self.cutoff.pow(self.modes as u32)
    }

    /// Refuse spaces whose dense density operator would be too large.
    pub fn check_density(&self) -> Result<()> {
        if self.dim() > MAX_DENSITY_SIDE {
            return Err(Error::DimensionLimit { dim: self.dim(), limit: MAX_DENSITY_SIDE });
        }
        Ok(())
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.modes {
            return Err(Error::IndexOutOfRange { index: mode, bound: self.modes });
        }
        Ok(())
    }

    /// Flat-index stride of `mode`.
    pub fn stride(&self, mode: usize) -> usize {
        self.cutoff.pow((self.modes - 1 - mode) as u32)
    }

    /// Occupation of `mode` in the basis state at `flat`.
    #[inline]
    pub fn digit(&self, flat: usize, mode: usize) -> usize {
        (flat / self.stride(mode)) % self.cutoff
    }

    pub fn occupation(&self, flat: usize) -> OccupationIndex {
        debug_assert!(flat < self.dim());
        let mut counts = vec![0; self.modes];
        let mut rest = flat;
        for slot in counts.iter_mut().rev() {
            *slot = rest % self.cutoff;
            rest /= self.cutoff;
        }
        OccupationIndex(counts)
    }

    pub fn flat_index(&self, occ: &OccupationIndex) -> Result<usize> {
        if occ.0.len() != self.modes {
            return Err(Error::DimensionMismatch { expected: self.modes, got: occ.0.len() });
        }
        occ.0.iter().try_fold(0usize, |acc, &n| {
            if n >= self.cutoff {
                Err(Error::IndexOutOfRange { index: n, bound: self.cutoff })
            } else {
                Ok(acc * self.cutoff + n)
            }
        })
    }

    /// Row-major `dim x modes` table of occupations, for tight loops.
    pub fn occupation_table(&self) -> Vec<u16> {
        let mut table = Vec::with_capacity(self.dim() * self.modes);
        for flat in 0..self.dim() {
            table.extend(self.occupation(flat).0.iter().map(|&n| n as u16));
        }
        table
    }
}

/// Per-mode photon counts of one Fock basis state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OccupationIndex(pub Vec<usize>);

impl OccupationIndex {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

impl From<Vec<usize>> for OccupationIndex {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}
