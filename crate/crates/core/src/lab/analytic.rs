//! Closed-form expected RBER: Gaussian mass of each state on the side of
//! the applied references where the planned read decodes it wrongly.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::cell_physics::{CellPhysics, CellState, WearState};
use crate::device::{ReadRefConfig, SenseLimits};
use crate::engine::{OffsetPlan, OpKind, ReadMode};
use crate::num::Scalar;

fn volts<S: Scalar>(physics: &CellPhysics<S>, limits: &SenseLimits<S>, cfg: &ReadRefConfig) -> [f64; 3] {
    std::array::from_fn(|i| limits.shifted(physics.default_refs[i], cfg.offsets[i]).as_f64())
}

fn msb(v: f64, r: &[f64; 3]) -> bool {
    v < r[0] || v >= r[2]
}

/// Output bit the planned read produces for a cell at `v`.
pub fn decode(plan: &OffsetPlan, plus: &[f64; 3], minus: &[f64; 3], v: f64) -> bool {
    let bit = match plan.mode {
        ReadMode::Lsb => v < plus[1],
        ReadMode::Msb => msb(v, plus),
        ReadMode::SoftBit => msb(v, minus) == msb(v, plus),
    };
    bit != plan.invert
}

/// Probability mass of `N(mean, sd)` on `[lo, hi)`, accurate in both tails.
fn mass(n: &Normal, mean: f64, lo: f64, hi: f64) -> f64 {
    if lo >= mean {
        n.sf(lo) - n.sf(hi)
    } else {
        n.cdf(hi) - n.cdf(lo)
    }
}

/// Fraction of state-`s` cells the plan decodes wrongly under `wear`.
pub fn state_error<S: Scalar>(
    physics: &CellPhysics<S>,
    limits: &SenseLimits<S>,
    plan: &OffsetPlan,
    state: CellState,
    wear: WearState,
) -> f64 {
    let Some(want) = plan.op.kind.expected(state) else { return 0.0 };
    let plus = volts(physics, limits, &plan.cfg);
    let minus = volts(physics, limits, &plan.cfg_minus);
    let mut cuts: Vec<f64> = plus.iter().chain(&minus).copied().collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let d = physics.distribution_params(state, wear);
    let (mean, sd) = (d.mean.as_f64(), d.sigma.as_f64());
    let n = Normal::new(mean, sd).expect("positive sigma");
    let mut edges = vec![f64::NEG_INFINITY];
    edges.extend(&cuts);
    edges.push(f64::INFINITY);
    edges
        .windows(2)
        .map(|w| {
            let probe = match (w[0].is_finite(), w[1].is_finite()) {
                (true, true) => 0.5 * (w[0] + w[1]),
                (false, true) => w[1] - 1.0,
                (true, false) => w[0] + 1.0,
                (false, false) => 0.0,
            };
            if decode(plan, &plus, &minus, probe) != want {
                mass(&n, mean, w[0], w[1])
            } else {
                0.0
            }
        })
        .sum()
}

/// Expected bit error fraction over uniformly random operands.
pub fn expected_rber<S: Scalar>(
    physics: &CellPhysics<S>,
    limits: &SenseLimits<S>,
    plan: &OffsetPlan,
    wear: WearState,
) -> f64 {
    let states: &[CellState] = if plan.op.kind == OpKind::Not {
        &[CellState::L2, CellState::L3]
    } else {
        &CellState::ALL
    };
    states.iter().map(|&s| state_error(physics, limits, plan, s, wear)).sum::<f64>() / states.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::engine::{plan_offsets, OpCode};

    fn setup() -> (CellPhysics<f64>, SenseLimits<f64>) {
        let cfg = Config::default();
        (CellPhysics::from_config(&cfg.physics, &cfg.wear), SenseLimits::from_config(&cfg.device))
    }

    #[test]
    fn default_or_read_misses_exactly_the_l1_quarter() {
        let (p, l) = setup();
        let mut plan = plan_offsets(OpCode::new(OpKind::Or), &p, &l);
        plan.cfg = ReadRefConfig::DEFAULT;
        let r = expected_rber(&p, &l, &plan, WearState::FRESH);
        assert!((r - 0.25).abs() < 1e-9, "{r}");
    }

    #[test]
    fn fresh_errors_are_negligible() {
        let (p, l) = setup();
        for k in [OpKind::And, OpKind::Or, OpKind::Xnor, OpKind::Not] {
            let plan = plan_offsets(OpCode::new(k), &p, &l);
            assert!(expected_rber(&p, &l, &plan, WearState::FRESH) < 1e-11, "{k}");
        }
    }

    #[test]
    fn degraded_complements_are_far_off() {
        let (p, l) = setup();
        for k in [OpKind::Nand, OpKind::Nor, OpKind::Xor] {
            let plan = plan_offsets(OpCode::new(k), &p, &l);
            assert!(expected_rber(&p, &l, &plan, WearState::FRESH) > 0.05, "{k}");
        }
    }

    #[test]
    fn inverse_variants_share_their_base_error() {
        let (p, l) = setup();
        let w = WearState::new(3000, 48.0);
        for k in [OpKind::Nand, OpKind::Nor, OpKind::Xor] {
            let inv = expected_rber(&p, &l, &plan_offsets(OpCode::inverse(k), &p, &l), w);
            let base = expected_rber(&p, &l, &plan_offsets(OpCode::new(k.base().unwrap()), &p, &l), w);
            assert_eq!(inv, base);
        }
    }

    #[test]
    fn tail_mass_matches_textbook_value() {
        // P(Z > 3) for a standard normal
        let n = Normal::new(0.0, 1.0).unwrap();
        let m = mass(&n, 0.0, 3.0, f64::INFINITY);
        // statrs erfc is good to about 1e-10 relative
        assert!((m / 1.349_898_031_630_094_5e-3 - 1.0).abs() < 1e-9, "{m:e}");
        assert!((mass(&n, 0.0, f64::NEG_INFINITY, -3.0) / 1.349_898_031_630_094_5e-3 - 1.0).abs() < 1e-9);
    }
}
