//! Exact propagation of piecewise-constant controls across offsets,
//! fidelity profiles with finite-difference derivatives, and the ensemble
//! cost.
//!
//! Each segment of a control is integrated in closed form, so the
//! propagator is exact up to roundoff; no ODE stepping is involved.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::so3::{compose, fidelity, rot_exp, Rotation};
use crate::{Error, Result};

/// One constant-amplitude piece of a control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub amplitude: f64,
    pub duration: f64,
}

/// A piecewise-constant single-input pulse with a global amplitude bound.
///
/// JSON schema:
/// `{"omega0": <real>, "segments": [{"amplitude": <real>, "duration": <real>}, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlField {
    #[serde(rename = "omega0")]
    pub bound: f64,
    pub segments: Vec<Segment>,
}

impl ControlField {
    pub fn new(bound: f64, segments: Vec<Segment>) -> Result<ControlField> {
        let field = ControlField { bound, segments };
        field.validate()?;
        Ok(field)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bound.is_finite() && self.bound > 0.0) {
            return Err(Error::InvalidField(format!(
                "bound omega0 = {} must be finite and positive",
                self.bound
            )));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if !seg.duration.is_finite() || seg.duration <= 0.0 {
                return Err(Error::InvalidField(format!(
                    "segment {i}: duration {} must be finite and positive",
                    seg.duration
                )));
            }
            if !seg.amplitude.is_finite() || seg.amplitude.abs() > self.bound + 1e-12 {
                return Err(Error::InvalidField(format!(
                    "segment {i}: amplitude {} exceeds bound {}",
                    seg.amplitude, self.bound
                )));
            }
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }
}

/// Ordered offsets paired with target rotations.
#[derive(Debug, Clone)]
pub struct SpinEnsemble {
    entries: Vec<(f64, Rotation)>,
}

impl SpinEnsemble {
    pub fn new(entries: Vec<(f64, Rotation)>) -> Result<SpinEnsemble> {
        if entries.is_empty() {
            return Err(Error::InvalidEnsemble("at least one entry required".into()));
        }
        for i in 0..entries.len() {
            for j in (i + 1)..entries.len() {
                if entries[i].0 == entries[j].0 {
                    return Err(Error::InvalidEnsemble(format!(
                        "offsets must be pairwise distinct (duplicate {})",
                        entries[i].0
                    )));
                }
            }
        }
        Ok(SpinEnsemble { entries })
    }

    pub fn entries(&self) -> &[(f64, Rotation)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Sampled map `Delta -> F(Delta)` with optional derivative estimates.
#[derive(Debug, Clone)]
pub struct FidelityProfile {
    pub target: Rotation,
    pub samples: Vec<(f64, f64)>,
    pub derivative_estimates: BTreeMap<u32, f64>,
}

impl FidelityProfile {
    /// Writes the profile as CSV with header `delta,F`, 15 significant
    /// digits per value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "delta,F")?;
        for (delta, f) in &self.samples {
            writeln!(w, "{delta:.14e},{f:.14e}")?;
        }
        Ok(())
    }
}

/// Time-ordered product of per-segment exact exponentials; later segments
/// apply on the left.
pub fn propagate(field: &ControlField, offset: f64) -> Rotation {
    let mut u = Rotation::identity();
    for seg in &field.segments {
        let step = rot_exp([seg.amplitude, 0.0, offset], seg.duration);
        u = compose(&step, &u);
    }
    u
}

/// Samples `F(Delta) = || U(Delta) - target ||^2` over a strictly
/// increasing offset grid.
pub fn fidelity_profile(
    field: &ControlField,
    target: &Rotation,
    offsets: &[f64],
) -> Result<FidelityProfile> {
    if offsets.is_empty() {
        return Err(Error::InvalidGrid("offset grid is empty".into()));
    }
    if offsets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid("offset grid must be strictly increasing".into()));
    }
    let samples = offsets
        .iter()
        .map(|&d| (d, fidelity(&propagate(field, d), target)))
        .collect();
    Ok(FidelityProfile {
        target: *target,
        samples,
        derivative_estimates: BTreeMap::new(),
    })
}

/// Central finite-difference estimate of a derivative of `F` along the
/// offset.
#[derive(Debug, Clone, Copy)]
pub struct DerivativeEstimate {
    pub value: f64,
    /// True when the estimate is below the roundoff floor
    /// `64 * eps / step^2`, i.e. dominated by cancellation.
    pub cancellation_suspect: bool,
}

/// Default finite-difference step: `1e-4 * max(1, omega0)` for order 1,
/// `1e-3 * max(1, omega0)` for order 2.
pub fn default_derivative_step(order: u32, omega0: f64) -> f64 {
    let scale = omega0.abs().max(1.0);
    match order {
        1 => 1e-4 * scale,
        _ => 1e-3 * scale,
    }
}

/// Central finite-difference estimate of `d^n F / d Delta^n` at
/// `at_offset`, `n` in {1, 2}.
pub fn profile_derivative(
    field: &ControlField,
    target: &Rotation,
    at_offset: f64,
    order: u32,
    step: f64,
) -> Result<DerivativeEstimate> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidParameter(format!("step {step} must be positive")));
    }
    let f = |d: f64| fidelity(&propagate(field, d), target);
    let value = match order {
        1 => (f(at_offset + step) - f(at_offset - step)) / (2.0 * step),
        2 => (f(at_offset + step) - 2.0 * f(at_offset) + f(at_offset - step)) / (step * step),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "derivative order {order} not supported (1 or 2)"
            )))
        }
    };
    let floor = 64.0 * f64::EPSILON / (step * step);
    Ok(DerivativeEstimate {
        value,
        cancellation_suspect: value.abs() < floor,
    })
}

/// Ensemble cost `C = (1/3N) sum_n || U(Delta_n) - target_n ||^2`.
pub fn ensemble_cost(field: &ControlField, ensemble: &SpinEnsemble) -> f64 {
    let n = ensemble.len() as f64;
    let sum: f64 = ensemble
        .entries()
        .iter()
        .map(|(delta, target)| fidelity(&propagate(field, *delta), target))
        .sum();
    sum / (3.0 * n)
}

/// First-order split propagator over `steps` equal sub-intervals:
/// `[exp((T/M) w eps_x) exp((T/M) Delta eps_z)]^M`. Convergence-test
/// harness only; `propagate` is exact.
pub fn bang_bang_discretize(
    amplitude: f64,
    total_duration: f64,
    steps: u32,
    offset: f64,
) -> Result<Rotation> {
    if steps < 1 {
        return Err(Error::InvalidParameter("steps must be >= 1".into()));
    }
    let h = total_duration / steps as f64;
    let ax = rot_exp([amplitude, 0.0, 0.0], h);
    let az = rot_exp([0.0, 0.0, offset], h);
    let step = compose(&ax, &az);
    let mut u = Rotation::identity();
    for _ in 0..steps {
        u = compose(&step, &u);
    }
    Ok(u)
}
