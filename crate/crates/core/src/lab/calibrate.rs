//! Fits the wear-model coefficients to target RBERs at the cycled
//! operating point by coordinate descent on the analytic predictor.

use serde::Serialize;

use crate::cell_physics::{CellPhysics, WearModelParams, WearState};
use crate::config::{Config, WearConfig};
use crate::device::{RefIndex, SenseLimits};
use crate::engine::{plan_offsets, OpCode, OpKind};
use crate::error::{Error, Result};

use super::analytic::expected_rber;

pub const CALIBRATED_OPS: [OpKind; 4] = [OpKind::And, OpKind::Or, OpKind::Xnor, OpKind::Not];

/// Band edges are pulled inward by this many binomial standard deviations
/// of a full-size run so a fit inside the band stays inside it across seeds.
const BAND_SIGMAS: f64 = 4.0;
/// Minimum expected errors per point for a heavy-wear sweep to count as
/// closed everywhere.
const MIN_SWEEP_ERRORS: f64 = 10.0;
/// Fresh runs must expect fewer than this many errors in a full-size run.
const MAX_FRESH_ERRORS: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Targets {
    /// Fractions, not percent.
    pub and: f64,
    pub or: f64,
    pub xnor: f64,
    pub not: f64,
    pub and_band: (f64, f64),
}

impl Targets {
    pub fn from_config(cfg: &Config) -> Self {
        let t = &cfg.lab.targets;
        Self {
            and: t.and.target / 100.0,
            or: t.or.target / 100.0,
            xnor: t.xnor.target / 100.0,
            not: t.not.target / 100.0,
            and_band: (t.and.band[0] / 100.0, t.and.band[1] / 100.0),
        }
    }

    pub fn get(&self, k: OpKind) -> f64 {
        match k {
            OpKind::And => self.and,
            OpKind::Or => self.or,
            OpKind::Xnor => self.xnor,
            OpKind::Not => self.not,
            _ => f64::NAN,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Calibration {
    pub wear: WearConfig,
    /// Predicted RBER fractions at the cycled point, in [`CALIBRATED_OPS`] order.
    pub predicted: [f64; 4],
    pub targets: Targets,
    /// AND band after shrinking for sampling noise.
    pub and_band_used: (f64, f64),
    pub objective: f64,
    pub evaluations: usize,
    pub constraints: Vec<ConstraintCheck>,
}

impl Calibration {
    pub fn apply(&self, cfg: &mut Config) {
        cfg.wear = self.wear.clone();
    }

    /// The fitted `[wear]` section as TOML.
    pub fn wear_toml(&self) -> String {
        #[derive(Serialize)]
        struct Section<'a> {
            wear: &'a WearConfig,
        }
        toml::to_string(&Section { wear: &self.wear }).expect("wear serializes")
    }
}

/// Free coordinates: sigma coefficients for L0..L3, the shared exponent,
/// and retention shifts for L1..L3. L0's retention shift and the timescale
/// stay as configured.
fn unpack(base: &WearConfig, x: &[f64; 8]) -> WearConfig {
    let mut w = base.clone();
    w.sigma_coeff.copy_from_slice(&x[..4]);
    w.sigma_exponent = [x[4]; 4];
    w.retention_shift[1..].copy_from_slice(&x[5..]);
    w
}

fn pack(w: &WearConfig) -> [f64; 8] {
    let mut x = [0.0; 8];
    x[..4].copy_from_slice(&w.sigma_coeff);
    x[4] = w.sigma_exponent.iter().sum::<f64>() / 4.0;
    x[5..].copy_from_slice(&w.retention_shift[1..]);
    x
}

struct Problem<'a> {
    cfg: &'a Config,
    limits: SenseLimits<f64>,
    cycled: WearState,
    heavy: WearState,
    full_bits: f64,
    sweep_bits: f64,
    targets: [f64; 4],
    band: (f64, f64),
}

impl Problem<'_> {
    fn physics(&self, w: &WearConfig) -> CellPhysics<f64> {
        CellPhysics::from_config(&self.cfg.physics, w)
    }

    fn predict(&self, p: &CellPhysics<f64>, wear: WearState) -> [f64; 4] {
        CALIBRATED_OPS.map(|k| expected_rber(p, &self.limits, &plan_offsets(OpCode::new(k), p, &self.limits), wear))
    }

    /// Structural requirements used to reject search moves.
    fn admissible(&self, w: &WearConfig, p: &CellPhysics<f64>) -> bool {
        let a = w.retention_shift;
        a[3] > a[2] && a[2] > a[1] && a[1] > 0.0 && p.any_overlap(self.heavy)
    }

    fn objective(&self, pred: &[f64; 4]) -> f64 {
        pred.iter().zip(&self.targets).map(|(p, t)| (p.max(1e-300) / t).ln().powi(2)).sum()
    }

    fn min_sweep_rber(&self, p: &CellPhysics<f64>) -> f64 {
        let base = plan_offsets(OpCode::new(OpKind::Or), p, &self.limits);
        let (lo, hi) = self.limits.legal_range(p.default_refs[0]);
        (lo..=hi)
            .map(|o| {
                let mut plan = base.clone();
                plan.cfg = plan.cfg.with(RefIndex::Vref0, o);
                expected_rber(p, &self.limits, &plan, self.heavy)
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn checks(&self, w: &WearConfig) -> Vec<ConstraintCheck> {
        let p = self.physics(w);
        let mut out = Vec::new();
        let mut push = |name: String, value: f64, limit: f64, satisfied: bool| {
            out.push(ConstraintCheck { name, value, limit, satisfied })
        };
        for (k, r) in CALIBRATED_OPS.iter().zip(self.predict(&p, WearState::FRESH)) {
            let errs = r * self.full_bits;
            push(format!("fresh expected errors, {k}"), errs, MAX_FRESH_ERRORS, errs < MAX_FRESH_ERRORS);
        }
        let and = self.predict(&p, self.cycled)[0];
        push("cycled AND above band floor".into(), and, self.band.0, and >= self.band.0);
        push("cycled AND below band ceiling".into(), and, self.band.1, and <= self.band.1);
        let overlap = p.any_overlap(self.heavy);
        push("k-sigma overlap at heavy wear".into(), overlap as u8 as f64, 1.0, overlap);
        let sweep = self.min_sweep_rber(&p) * self.sweep_bits;
        push("heavy-wear sweep minimum expected errors".into(), sweep, MIN_SWEEP_ERRORS, sweep >= MIN_SWEEP_ERRORS);
        let a = w.retention_shift;
        push("retention shift L3 > L2".into(), a[3] - a[2], 0.0, a[3] > a[2]);
        push("retention shift L2 > L1".into(), a[2] - a[1], 0.0, a[2] > a[1]);
        out
    }
}

/// Deterministic coordinate descent from the configured wear parameters.
/// Returns [`Error::Infeasible`] if the fit violates a hard constraint.
pub fn calibrate(cfg: &Config) -> Result<Calibration> {
    let targets = Targets::from_config(cfg);
    let cells = (cfg.device.page_size_bytes * 8) as f64;
    let full_bits = cfg.lab.pages as f64 * cells;
    let (lo, hi) = targets.and_band;
    let band = (lo + BAND_SIGMAS * (lo / full_bits).sqrt(), hi - BAND_SIGMAS * (hi / full_bits).sqrt());
    if band.0 >= band.1 {
        return Err(Error::Infeasible(format!("AND band {:?} collapses under sampling noise", targets.and_band)));
    }
    let prob = Problem {
        cfg,
        limits: SenseLimits::from_config(&cfg.device),
        cycled: WearState::new(cfg.lab.cycled_pe, cfg.lab.cycled_retention_hours),
        heavy: WearState::new(cfg.lab.heavy_pe, 0.0),
        full_bits,
        sweep_bits: cfg.lab.sweep_pages_per_point as f64 * cells,
        targets: [targets.and.clamp(band.0, band.1), targets.or, targets.xnor, targets.not],
        band,
    };

    let mut x = pack(&cfg.wear);
    let eval = |x: &[f64; 8]| -> Option<f64> {
        let w = unpack(&cfg.wear, x);
        let p = prob.physics(&w);
        if !prob.admissible(&w, &p) {
            return None;
        }
        let pred = prob.predict(&p, prob.cycled);
        (prob.band.0..=prob.band.1).contains(&pred[0]).then(|| prob.objective(&pred))
    };
    let mut best = eval(&x).unwrap_or(f64::INFINITY);
    let mut evaluations = 1;
    let mut step = 0.25;
    while step > 1e-5 && evaluations < 20_000 {
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [1.0 + step, 1.0 / (1.0 + step)] {
                let mut trial = x;
                trial[i] *= dir;
                evaluations += 1;
                if let Some(f) = eval(&trial) {
                    if f < best {
                        best = f;
                        x = trial;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    let wear = unpack(&cfg.wear, &x);
    let constraints = prob.checks(&wear);
    let predicted = prob.predict(&prob.physics(&wear), prob.cycled);
    let failed: Vec<&str> = constraints.iter().filter(|c| !c.satisfied).map(|c| c.name.as_str()).collect();
    if !failed.is_empty() {
        return Err(Error::Infeasible(failed.join("; ")));
    }
    Ok(Calibration { wear, predicted, targets, and_band_used: band, objective: best, evaluations, constraints })
}

/// Predicted RBER fractions for the calibrated ops at `wear` under `cfg`.
pub fn predict(cfg: &Config, wear: WearState) -> [f64; 4] {
    let p = CellPhysics::<f64>::from_config(&cfg.physics, &cfg.wear);
    let limits = SenseLimits::from_config(&cfg.device);
    CALIBRATED_OPS.map(|k| expected_rber(&p, &limits, &plan_offsets(OpCode::new(k), &p, &limits), wear))
}

/// Wear parameters as stored in the model, for inspection.
pub fn model_params(cfg: &Config) -> WearModelParams<f64> {
    WearModelParams::from_config(&cfg.wear)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_round_trips() {
        let w = Config::default().wear;
        let x = pack(&w);
        let u = unpack(&w, &x);
        assert_eq!(u.sigma_coeff, w.sigma_coeff);
        assert_eq!(u.retention_shift, w.retention_shift);
    }

    #[test]
    fn collapsed_band_is_reported() {
        let mut cfg = Config::default();
        cfg.lab.targets.and.band = [0.0002, 0.00020001];
        assert!(matches!(calibrate(&cfg), Err(Error::Infeasible(_))));
    }
}
