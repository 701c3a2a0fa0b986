//! Gradient-based minimization of the ensemble cost over bounded
//! piecewise-constant fields, and (T, offset) landscape sweeps.
//!
//! The per-segment gradient is exact (closed-form directional derivative
//! of the segment exponential via the right Jacobian); finite differences
//! are kept as a test oracle only.

use std::io::{self, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::propagation::{ControlField, Segment, SpinEnsemble};
use crate::so3::{compose, cross, fidelity, mat_mul, mat_transpose, rot_exp, Rotation, Vec3};
use crate::{Error, Result};

/// Optimizer settings. Deterministic for a fixed `seed`.
#[derive(Debug, Clone)]
pub struct GrapeConfig {
    /// Time discretization: number of equal-duration amplitudes.
    pub steps: usize,
    pub max_iters: u32,
    /// Initial gradient step for the backtracking line search.
    pub step_size: f64,
    /// Stop when the cost improvement per iteration falls below this.
    pub tol: f64,
    pub seed: u64,
    /// Amplitude bound omega0; iterates are clipped to [-bound, bound].
    pub bound: f64,
    /// Independent seeded runs per landscape cell.
    pub restarts: u32,
    /// Warm start; random in [-bound/2, bound/2] when absent.
    pub init_amplitudes: Option<Vec<f64>>,
}

impl GrapeConfig {
    pub fn new(bound: f64) -> GrapeConfig {
        GrapeConfig {
            steps: 64,
            max_iters: 500,
            step_size: 1.0,
            tol: 1e-12,
            seed: 0,
            bound,
            restarts: 5,
            init_amplitudes: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.steps < 8 {
            return Err(Error::InvalidParameter(format!(
                "steps = {} must be >= 8",
                self.steps
            )));
        }
        if !(self.bound.is_finite() && self.bound > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bound = {} must be positive",
                self.bound
            )));
        }
        if !(self.step_size > 0.0 && self.tol > 0.0) {
            return Err(Error::InvalidParameter(
                "step_size and tol must be positive".into(),
            ));
        }
        if let Some(init) = &self.init_amplitudes {
            if init.len() != self.steps {
                return Err(Error::InvalidParameter(format!(
                    "init_amplitudes has {} entries, steps = {}",
                    init.len(),
                    self.steps
                )));
            }
        }
        Ok(())
    }
}

/// Result of one optimization run.
#[derive(Debug, Clone)]
pub struct GrapeResult {
    pub field: ControlField,
    pub cost: f64,
    pub iterations: u32,
    /// Cost after each accepted step, starting with the initial cost.
    /// Non-increasing by construction (backtracking line search).
    pub history: Vec<f64>,
}

/// `J_r(v) d`: right Jacobian of the rotation exponential applied to `d`.
fn right_jacobian_apply(v: &Vec3, d: &Vec3) -> Vec3 {
    let theta2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let theta = theta2.sqrt();
    let (c1, c2) = if theta < 1e-4 {
        // Taylor: (1-cos)/t^2 ~ 1/2 - t^2/24, (t-sin)/t^3 ~ 1/6 - t^2/120
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        ((1.0 - theta.cos()) / theta2, (theta - theta.sin()) / (theta2 * theta))
    };
    let vxd = cross(v, d);
    let vxvxd = cross(v, &vxd);
    [
        d[0] - c1 * vxd[0] + c2 * vxvxd[0],
        d[1] - c1 * vxd[1] + c2 * vxvxd[1],
        d[2] - c1 * vxd[2] + c2 * vxvxd[2],
    ]
}

/// `C = (1/3N) sum_n || U_n - V_n ||^2` for per-segment amplitudes and
/// durations, without building a `ControlField` (amplitudes may stray
/// outside the bound during finite-difference probes).
fn cost_raw(ensemble: &SpinEnsemble, amps: &[f64], durations: &[f64]) -> f64 {
    let n = ensemble.len() as f64;
    let sum: f64 = ensemble
        .entries()
        .iter()
        .map(|(delta, target)| {
            let mut u = Rotation::identity();
            for (&a, &dt) in amps.iter().zip(durations) {
                u = compose(&rot_exp([a, 0.0, *delta], dt), &u);
            }
            fidelity(&u, target)
        })
        .sum();
    sum / (3.0 * n)
}

/// Exact cost and gradient via forward/backward propagator products.
fn cost_and_gradient(
    ensemble: &SpinEnsemble,
    amps: &[f64],
    durations: &[f64],
) -> (f64, Vec<f64>) {
    let n_seg = amps.len();
    let n = ensemble.len() as f64;
    let mut cost = 0.0;
    let mut grad = vec![0.0; n_seg];

    for (delta, target) in ensemble.entries() {
        let p: Vec<Rotation> = amps
            .iter()
            .zip(durations)
            .map(|(&a, &dt)| rot_exp([a, 0.0, *delta], dt))
            .collect();
        // prefix[j] = P_{j-1} ... P_0 (identity at j = 0)
        let mut prefix = Vec::with_capacity(n_seg + 1);
        prefix.push(Rotation::identity());
        for j in 0..n_seg {
            let next = compose(&p[j], &prefix[j]);
            prefix.push(next);
        }
        cost += fidelity(&prefix[n_seg], target);

        // suffix[j] = P_{N-1} ... P_j (identity at j = N)
        let mut suffix = vec![Rotation::identity(); n_seg + 1];
        for j in (0..n_seg).rev() {
            suffix[j] = compose(&suffix[j + 1], &p[j]);
        }

        let vt = mat_transpose(target.matrix());
        for j in 0..n_seg {
            // dU/dw_j = suffix[j] [m]_x prefix[j] with
            // m = J_r(v_j)(-dt e_x), v_j = -dt (w_j, 0, delta)
            let dt = durations[j];
            let v = [-dt * amps[j], 0.0, -dt * *delta];
            let m = right_jacobian_apply(&v, &[-dt, 0.0, 0.0]);
            let g = mat_mul(prefix[j].matrix(), &mat_mul(&vt, suffix[j].matrix()));
            let tr = m[0] * (g[1][2] - g[2][1])
                + m[1] * (g[2][0] - g[0][2])
                + m[2] * (g[0][1] - g[1][0]);
            grad[j] += -2.0 * tr / (3.0 * n);
        }
    }
    (cost / (3.0 * n), grad)
}

fn clip(x: f64, bound: f64) -> f64 {
    x.clamp(-bound, bound)
}

/// Gradient with the components pointing out of the feasible box zeroed.
fn projected_gradient(amps: &[f64], grad: &[f64], bound: f64) -> Vec<f64> {
    amps.iter()
        .zip(grad)
        .map(|(&a, &g)| {
            if (a >= bound - 1e-14 && g < 0.0) || (a <= -bound + 1e-14 && g > 0.0) {
                0.0
            } else {
                g
            }
        })
        .collect()
}

/// Projected gradient descent with backtracking (Armijo) line search on
/// the ensemble cost. Deterministic for a fixed seed.
pub fn grape_optimize(
    ensemble: &SpinEnsemble,
    total_time: f64,
    config: &GrapeConfig,
) -> Result<GrapeResult> {
    config.validate()?;
    if !(total_time.is_finite() && total_time > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "total_time = {total_time} must be positive"
        )));
    }
    let n_seg = config.steps;
    let dt = total_time / n_seg as f64;
    let durations = vec![dt; n_seg];

    let mut amps: Vec<f64> = match &config.init_amplitudes {
        Some(init) => init.iter().map(|&a| clip(a, config.bound)).collect(),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            (0..n_seg)
                .map(|_| rng.random_range(-0.5 * config.bound..=0.5 * config.bound))
                .collect()
        }
    };

    let (mut cost, mut grad) = cost_and_gradient(ensemble, &amps, &durations);
    if !cost.is_finite() {
        return Err(Error::NonFinite(format!("initial cost = {cost}")));
    }
    let mut history = vec![cost];
    let mut step = config.step_size;
    let mut iterations = 0;

    while iterations < config.max_iters {
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient at iteration {iterations}"
            )));
        }
        let pg = projected_gradient(&amps, &grad, config.bound);
        let pg2: f64 = pg.iter().map(|g| g * g).sum();
        if pg2.sqrt() < 1e-13 {
            break;
        }

        // backtracking line search
        let mut s = step;
        let mut accepted: Option<(Vec<f64>, f64)> = None;
        for _ in 0..60 {
            let trial: Vec<f64> = amps
                .iter()
                .zip(&grad)
                .map(|(&a, &g)| clip(a - s * g, config.bound))
                .collect();
            let c = cost_raw(ensemble, &trial, &durations);
            if c.is_finite() && c < cost - 1e-4 * s * pg2 {
                accepted = Some((trial, c));
                break;
            }
            s *= 0.5;
        }
        let Some((trial, new_cost)) = accepted else {
            break; // no descent direction at fp resolution
        };
        let improvement = cost - new_cost;
        amps = trial;
        cost = new_cost;
        step = (2.0 * s).min(1e3 * config.step_size);
        iterations += 1;
        history.push(cost);
        let (c2, g2) = cost_and_gradient(ensemble, &amps, &durations);
        debug_assert!((c2 - cost).abs() < 1e-12);
        cost = c2;
        grad = g2;
        if improvement < config.tol {
            break;
        }
    }

    let field = ControlField::new(
        config.bound,
        amps.iter()
            .map(|&a| Segment { amplitude: a, duration: dt })
            .collect(),
    )?;
    Ok(GrapeResult { field, cost, iterations, history })
}

/// Analytic vs finite-difference gradient comparison for one segment.
#[derive(Debug, Clone, Copy)]
pub struct GradientCheck {
    pub analytic: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

pub fn gradient_check_with_step(
    ensemble: &SpinEnsemble,
    field: &ControlField,
    segment_index: usize,
    step: f64,
) -> Result<GradientCheck> {
    if segment_index >= field.segments.len() {
        return Err(Error::InvalidParameter(format!(
            "segment index {segment_index} out of range (field has {})",
            field.segments.len()
        )));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidParameter(format!("step {step} must be positive")));
    }
    let amps: Vec<f64> = field.segments.iter().map(|s| s.amplitude).collect();
    let durations: Vec<f64> = field.segments.iter().map(|s| s.duration).collect();
    let (_, grad) = cost_and_gradient(ensemble, &amps, &durations);
    let analytic = grad[segment_index];

    let mut plus = amps.clone();
    plus[segment_index] += step;
    let mut minus = amps;
    minus[segment_index] -= step;
    let finite_difference = (cost_raw(ensemble, &plus, &durations)
        - cost_raw(ensemble, &minus, &durations))
        / (2.0 * step);

    let scale = analytic.abs().max(finite_difference.abs()).max(1e-8);
    Ok(GradientCheck {
        analytic,
        finite_difference,
        relative_error: (analytic - finite_difference).abs() / scale,
    })
}

/// Default finite-difference step `1e-6 * omega0`.
pub fn gradient_check(
    ensemble: &SpinEnsemble,
    field: &ControlField,
    segment_index: usize,
) -> Result<GradientCheck> {
    gradient_check_with_step(ensemble, field, segment_index, 1e-6 * field.bound)
}

/// Offset/target pattern instantiated at each landscape grid column.
#[derive(Debug, Clone, Copy)]
pub enum EnsemblePattern {
    /// `{(0, X_phi), (axis, I)}`; the grid axis is the offset.
    Selective { phi: f64 },
    /// `{(0, X_axis), (delta1, I)}`; the grid axis is the angle phi.
    PhiSweep { delta1: f64 },
    /// `{(+/-delta1, X_phi), (+/-axis, I)}`; the grid axis is delta2.
    PairedRobust { phi: f64, delta1: f64 },
    /// `{(0, X_phi), (+/-delta1, X_phi), (+/-axis, I)}`.
    FiveOffset { phi: f64, delta1: f64 },
}

impl EnsemblePattern {
    /// Name of the grid axis for CSV headers.
    pub fn axis_name(&self) -> &'static str {
        match self {
            EnsemblePattern::PhiSweep { .. } => "phi",
            _ => "delta",
        }
    }

    pub fn instantiate(&self, axis: f64) -> Result<SpinEnsemble> {
        let x = |phi: f64| rot_exp([1.0, 0.0, 0.0], phi);
        let i = Rotation::identity();
        match *self {
            EnsemblePattern::Selective { phi } => {
                SpinEnsemble::new(vec![(0.0, x(phi)), (axis, i)])
            }
            EnsemblePattern::PhiSweep { delta1 } => {
                SpinEnsemble::new(vec![(0.0, x(axis)), (delta1, i)])
            }
            EnsemblePattern::PairedRobust { phi, delta1 } => SpinEnsemble::new(vec![
                (-delta1, x(phi)),
                (delta1, x(phi)),
                (-axis, i),
                (axis, i),
            ]),
            EnsemblePattern::FiveOffset { phi, delta1 } => SpinEnsemble::new(vec![
                (0.0, x(phi)),
                (-delta1, x(phi)),
                (delta1, x(phi)),
                (-axis, i),
                (axis, i),
            ]),
        }
    }
}

/// Minimized costs over a (T, axis) grid. `costs[i][j]` pairs
/// `t_values[i]` with `delta_values[j]`; failed cells carry NaN.
#[derive(Debug, Clone)]
pub struct LandscapeGrid {
    pub t_values: Vec<f64>,
    pub delta_values: Vec<f64>,
    pub costs: Vec<Vec<f64>>,
}

impl LandscapeGrid {
    pub fn failed_cells(&self) -> usize {
        self.costs
            .iter()
            .flat_map(|row| row.iter())
            .filter(|c| c.is_nan())
            .count()
    }

    pub fn total_cells(&self) -> usize {
        self.t_values.len() * self.delta_values.len()
    }

    /// CSV rows `T,<axis>,cost`, row-major over T then the axis, 10
    /// significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W, axis_name: &str) -> io::Result<()> {
        writeln!(w, "T,{axis_name},cost")?;
        for (i, &t) in self.t_values.iter().enumerate() {
            for (j, &d) in self.delta_values.iter().enumerate() {
                writeln!(w, "{t:.9e},{d:.9e},{:.9e}", self.costs[i][j])?;
            }
        }
        Ok(())
    }
}

fn cell_seed(seed: u64, i: u64, j: u64, r: u64) -> u64 {
    let mut z = seed
        ^ i.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ j.wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ r.wrapping_mul(0x94D0_49BB_1331_11EB);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_grid(values: &[f64], name: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidGrid(format!("{name} grid is empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid(format!("{name} grid has non-finite values")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid(format!(
            "{name} grid must be strictly increasing"
        )));
    }
    Ok(())
}

/// Per-cell minimization over `config.restarts` derived seeds. Cells run
/// concurrently; seeds are pre-assigned per (cell, restart), so the
/// output is identical for any thread count or schedule. Per-cell
/// progress lines go to standard error; failures are NaN-marked.
pub fn landscape_scan(
    pattern: EnsemblePattern,
    t_values: &[f64],
    delta_values: &[f64],
    config: &GrapeConfig,
) -> Result<LandscapeGrid> {
    config.validate()?;
    check_grid(t_values, "T")?;
    check_grid(delta_values, "delta")?;
    if t_values.iter().any(|&t| t <= 0.0) {
        return Err(Error::InvalidGrid("T grid must be positive".into()));
    }
    let restarts = config.restarts.max(1);

    let cells: Vec<(usize, usize)> = (0..t_values.len())
        .flat_map(|i| (0..delta_values.len()).map(move |j| (i, j)))
        .collect();

    let flat: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| {
            let t = t_values[i];
            let axis = delta_values[j];
            let ensemble = match pattern.instantiate(axis) {
                Ok(e) => e,
                Err(e) => {
                    eprintln!("cell {i},{j} T={t} delta={axis} cost=NaN iters=0 ({e})");
                    return f64::NAN;
                }
            };
            let mut best: Option<GrapeResult> = None;
            for r in 0..restarts {
                let mut c = config.clone();
                c.seed = cell_seed(config.seed, i as u64, j as u64, r as u64);
                match grape_optimize(&ensemble, t, &c) {
                    Ok(res) => {
                        if best.as_ref().map_or(true, |b| res.cost < b.cost) {
                            best = Some(res);
                        }
                    }
                    Err(e) => {
                        eprintln!(
                            "cell {i},{j} T={t} delta={axis} restart {r} failed: {e}"
                        );
                    }
                }
            }
            match best {
                Some(res) => {
                    eprintln!(
                        "cell {i},{j} T={t} delta={axis} cost={:.6e} iters={}",
                        res.cost, res.iterations
                    );
                    res.cost
                }
                None => {
                    eprintln!("cell {i},{j} T={t} delta={axis} cost=NaN iters=0");
                    f64::NAN
                }
            }
        })
        .collect();

    let m = delta_values.len();
    let costs = flat.chunks(m).map(|row| row.to_vec()).collect();
    Ok(LandscapeGrid {
        t_values: t_values.to_vec(),
        delta_values: delta_values.to_vec(),
        costs,
    })
}
