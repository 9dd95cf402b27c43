//! Threshold-voltage model of an MLC cell: fresh per-state distributions,
//! their evolution under P/E cycling and retention, and sampling.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{PhysicsConfig, WearConfig};
use crate::error::{Error, Result};
use crate::num::Scalar;

/// P/E count at which the sigma growth term equals its coefficient.
pub const PE_SCALE: f64 = 10_000.0;

/// One of the four MLC threshold levels.
///
/// Gray mapping (LSB, MSB): L0 = (1,1), L1 = (1,0), L2 = (0,0), L3 = (0,1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum CellState {
    L0 = 0,
    L1 = 1,
    L2 = 2,
    L3 = 3,
}

impl CellState {
    pub const ALL: [CellState; 4] = [CellState::L0, CellState::L1, CellState::L2, CellState::L3];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    #[inline]
    pub fn lsb(self) -> bool {
        matches!(self, CellState::L0 | CellState::L1)
    }

    #[inline]
    pub fn msb(self) -> bool {
        matches!(self, CellState::L0 | CellState::L3)
    }

    /// `(lsb, msb)`.
    #[inline]
    pub fn bits(self) -> (bool, bool) {
        (self.lsb(), self.msb())
    }

    #[inline]
    pub fn from_bits(lsb: bool, msb: bool) -> Self {
        match (lsb, msb) {
            (true, true) => CellState::L0,
            (true, false) => CellState::L1,
            (false, false) => CellState::L2,
            (false, true) => CellState::L3,
        }
    }

    pub fn is_programmed(self) -> bool {
        self != CellState::L0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution<S> {
    pub mean: S,
    pub sigma: S,
}

impl<S: Scalar> StateDistribution<S> {
    /// `mean + k * sigma`.
    pub fn upper_edge(&self, k: S) -> S {
        self.mean + k * self.sigma
    }

    /// `mean - k * sigma`.
    pub fn lower_edge(&self, k: S) -> S {
        self.mean - k * self.sigma
    }
}

/// Per-block degradation state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WearState {
    pub pe_cycles: u32,
    pub retention_hours: f64,
}

impl WearState {
    pub const FRESH: WearState = WearState { pe_cycles: 0, retention_hours: 0.0 };

    pub fn new(pe_cycles: u32, retention_hours: f64) -> Self {
        assert!(retention_hours >= 0.0 && retention_hours.is_finite(), "invalid retention time");
        Self { pe_cycles, retention_hours }
    }

    pub fn is_fresh(&self) -> bool {
        self.pe_cycles == 0 && self.retention_hours == 0.0
    }
}

/// Power-law sigma growth with P/E cycles and logarithmic retention drift.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WearModelParams<S> {
    /// `(coefficient, exponent)` per state.
    pub sigma_growth: [(S, S); 4],
    /// Volts per unit of `ln(1 + t / timescale)`; positive shifts down.
    pub retention_shift: [S; 4],
    pub retention_timescale: S,
}

impl<S: Scalar> WearModelParams<S> {
    pub fn from_config(w: &WearConfig) -> Self {
        Self {
            sigma_growth: std::array::from_fn(|i| (S::of(w.sigma_coeff[i]), S::of(w.sigma_exponent[i]))),
            retention_shift: w.retention_shift.map(S::of),
            retention_timescale: S::of(w.retention_timescale_hours),
        }
    }

    pub fn write_config(&self, w: &mut WearConfig) {
        for i in 0..4 {
            w.sigma_coeff[i] = self.sigma_growth[i].0.as_f64();
            w.sigma_exponent[i] = self.sigma_growth[i].1.as_f64();
            w.retention_shift[i] = self.retention_shift[i].as_f64();
        }
        w.retention_timescale_hours = self.retention_timescale.as_f64();
    }

    /// Multiplicative sigma growth for `state` after `pe` cycles.
    pub fn sigma_factor(&self, state: CellState, pe: u32) -> S {
        let (c, e) = self.sigma_growth[state.index()];
        if pe == 0 {
            return S::ONE;
        }
        S::ONE + c * (S::of(pe as f64 / PE_SCALE)).powf(e)
    }

    /// Mean displacement (volts, negative = downward) after `hours`.
    pub fn mean_shift(&self, state: CellState, hours: f64) -> S {
        if hours == 0.0 {
            return S::ZERO;
        }
        -self.retention_shift[state.index()] * (S::ONE + S::of(hours) / self.retention_timescale).ln()
    }
}

/// The analog parameter table: fresh distributions, wear model and the
/// factory read references.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellPhysics<S> {
    pub fresh: [StateDistribution<S>; 4],
    pub k_sigma: S,
    pub default_refs: [S; 3],
    pub wear: WearModelParams<S>,
}

impl<S: Scalar> CellPhysics<S> {
    pub fn from_config(p: &PhysicsConfig, w: &WearConfig) -> Self {
        Self {
            fresh: std::array::from_fn(|i| StateDistribution { mean: S::of(p.mean[i]), sigma: S::of(p.sigma[i]) }),
            k_sigma: S::of(p.k_sigma),
            default_refs: p.default_refs.map(S::of),
            wear: WearModelParams::from_config(w),
        }
    }

    pub fn fresh(&self, state: CellState) -> StateDistribution<S> {
        self.fresh[state.index()]
    }

    /// Distribution of `state` under `wear`. Total and deterministic.
    pub fn distribution_params(&self, state: CellState, wear: WearState) -> StateDistribution<S> {
        let f = self.fresh(state);
        StateDistribution {
            mean: f.mean + self.wear.mean_shift(state, wear.retention_hours),
            sigma: f.sigma * self.wear.sigma_factor(state, wear.pe_cycles),
        }
    }

    /// All four distributions at once, indexed by level.
    pub fn distributions(&self, wear: WearState) -> [StateDistribution<S>; 4] {
        CellState::ALL.map(|s| self.distribution_params(s, wear))
    }

    pub fn sample_vth<R: Rng + ?Sized>(&self, state: CellState, wear: WearState, rng: &mut R) -> S {
        let d = self.distribution_params(state, wear);
        draw(&d, rng)
    }

    /// Midpoint of the gap between `lower`'s upper k-sigma edge and `upper`'s
    /// lower k-sigma edge, on fresh distributions.
    pub fn valley_midpoint(&self, lower: CellState, upper: CellState, k_sigma: S) -> Result<S> {
        if upper.index() != lower.index() + 1 {
            return Err(Error::NotAdjacent { lower, upper });
        }
        let lo = self.fresh(lower).upper_edge(k_sigma);
        let hi = self.fresh(upper).lower_edge(k_sigma);
        Ok((lo + hi) * S::HALF)
    }

    /// The open interval between adjacent k-sigma edges under `wear`, if the
    /// intervals do not overlap.
    pub fn zero_window(&self, lower: CellState, wear: WearState) -> Option<(S, S)> {
        let upper = CellState::from_index(lower.index() + 1)?;
        let lo = self.distribution_params(lower, wear).upper_edge(self.k_sigma);
        let hi = self.distribution_params(upper, wear).lower_edge(self.k_sigma);
        (lo < hi).then_some((lo, hi))
    }

    /// True when some adjacent pair's k-sigma intervals overlap.
    pub fn any_overlap(&self, wear: WearState) -> bool {
        [CellState::L0, CellState::L1, CellState::L2]
            .into_iter()
            .any(|s| self.zero_window(s, wear).is_none())
    }
}

#[inline]
pub(crate) fn draw<S: Scalar, R: Rng + ?Sized>(d: &StateDistribution<S>, rng: &mut R) -> S {
    let z: f64 = StandardNormal.sample(rng);
    d.mean + d.sigma * S::of(z)
}
