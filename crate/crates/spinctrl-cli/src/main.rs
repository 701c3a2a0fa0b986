//! Command-line surface: designers, fidelity profiles, PMP utilities and
//! landscape scans, emitting JSON/CSV for external plotting.
//!
//! Exit codes: 0 success, 2 usage or precondition violation, 3 I/O
//! failure, 4 landscape finished with more than 10% failed cells.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spinctrl::design::{
    design_locally_robust_pair, design_robust_one_switch, design_robust_two_switch,
    design_selective, identity_offsets, DesignReport, RobustFamilyParams,
};
use spinctrl::grape::{grape_optimize, landscape_scan, EnsemblePattern, GrapeConfig};
use spinctrl::pmp::{next_bang_duration, singular_crossing_times, SwitchParam};
use spinctrl::propagation::{
    default_derivative_step, fidelity_profile, profile_derivative, propagate, ControlField,
};
use spinctrl::so3::{frobenius_sq, rot_exp, Rotation};

/// Accepts plain reals plus `pi` literals: `pi`, `pi/2`, `2pi`, `3pi/4`,
/// with an optional leading sign. Avoids precision loss from decimal
/// entry of angles.
fn real(s: &str) -> Result<f64, String> {
    let t = s.trim();
    if let Some(pos) = t.find("pi") {
        let (pre, post) = (&t[..pos], &t[pos + 2..]);
        let mut value = std::f64::consts::PI;
        match pre {
            "" | "+" => {}
            "-" => value = -value,
            _ => {
                value *= pre
                    .parse::<f64>()
                    .map_err(|_| format!("bad multiplier in pi literal: {s}"))?
            }
        }
        match post.strip_prefix('/') {
            None if post.is_empty() => Ok(value),
            None => Err(format!("trailing text after pi literal: {s}")),
            Some(den) => {
                let d: f64 = den
                    .parse()
                    .map_err(|_| format!("bad denominator in pi literal: {s}"))?;
                if d == 0.0 {
                    return Err(format!("zero denominator in pi literal: {s}"));
                }
                Ok(value / d)
            }
        }
    } else {
        t.parse::<f64>().map_err(|_| format!("not a real number: {s}"))
    }
}

#[derive(Parser)]
#[command(name = "spinctrl", version, about = "Pulse design for selective and robust spin rotations")]
struct Cli {
    /// Worker-thread cap; the SPIN_THREADS environment variable overrides
    /// this flag. Default: available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Time-optimal selective singular pulse (resonant rotation by phi,
    /// identity at delta1).
    DesignSelective {
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        phi: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        delta1: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        omega0: f64,
        /// Write the DesignReport JSON here (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Robust (n, k) bang family with one or two switches.
    DesignRobust {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
        switches: u32,
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        phi: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true, default_value = "1")]
        omega0: f64,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        k: u32,
        /// Asymmetry t1 = alpha * t3 of the two-switch family.
        #[arg(long, value_parser = real, allow_hyphen_values = true, default_value = "1")]
        alpha: f64,
        /// Sign of the first bang (+1 or -1); family default when omitted.
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        first_sign: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Locally robust two-bang pair: X_phi near +/-delta1, identity at a
    /// solved +/-delta2.
    DesignPair {
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        phi: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        delta1: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true, default_value = "1")]
        omega0: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fidelity profile F(delta) of a stored field against X_phi.
    Profile {
        /// Control-field JSON: {"omega0": w, "segments": [{"amplitude": a, "duration": t}, ...]}.
        #[arg(long)]
        field: PathBuf,
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        target_phi: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        delta_min: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        delta_max: f64,
        /// Number of sample points; 1 samples delta_min only.
        #[arg(long)]
        steps: usize,
        /// Write `delta,F` CSV here (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// GRAPE cost landscape over a (T, delta) or (T, phi) grid.
    Landscape {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        t_min: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        t_max: f64,
        #[arg(long)]
        t_steps: usize,
        /// Grid axis: offset delta (fig3a, app-b1, app-b2) or angle phi (fig3b).
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        axis_min: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        axis_max: f64,
        #[arg(long)]
        axis_steps: usize,
        /// Target angle (fig3a, app-b1, app-b2).
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        phi: Option<f64>,
        /// Inner offset (fig3b, app-b1, app-b2).
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        delta1: Option<f64>,
        #[command(flatten)]
        opt: OptFlags,
        /// Write `T,<axis>,cost` CSV here (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single-point GRAPE optimization; writes the optimized field JSON.
    Grape {
        #[arg(long, value_enum)]
        mode: Mode,
        /// Grid-axis value: delta (fig3a, app-b1, app-b2) or phi (fig3b).
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        axis: f64,
        /// Total pulse duration.
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        duration: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        phi: Option<f64>,
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        delta1: Option<f64>,
        #[command(flatten)]
        opt: OptFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regular bang duration and singular-crossing times from the
    /// switching-function parameters (A, Omega).
    PmpBang {
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        omega: f64,
        /// How many crossing branches to list.
        #[arg(long, default_value = "4")]
        k_max: u32,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// {(0, X_phi), (delta, I)}; axis = delta.
    Fig3a,
    /// {(0, X_phi), (delta1, I)}; axis = phi.
    Fig3b,
    /// {(+/-delta1, X_phi), (+/-delta2, I)}; axis = delta2.
    AppB1,
    /// {(0, X_phi), (+/-delta1, X_phi), (+/-delta2, I)}; axis = delta2.
    AppB2,
}

#[derive(Args)]
struct OptFlags {
    #[arg(long, value_parser = real, allow_hyphen_values = true, default_value = "1")]
    omega0: f64,
    /// Piecewise-constant segments of the optimized field.
    #[arg(long, default_value = "64")]
    segments: usize,
    #[arg(long, default_value = "5")]
    restarts: u32,
    #[arg(long, default_value = "0")]
    seed: u64,
    #[arg(long, default_value = "500")]
    max_iters: u32,
}

impl OptFlags {
    fn config(&self) -> GrapeConfig {
        let mut c = GrapeConfig::new(self.omega0);
        c.steps = self.segments;
        c.restarts = self.restarts;
        c.seed = self.seed;
        c.max_iters = self.max_iters;
        c
    }
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure { code: 2, message: e.to_string() }
}

fn io_fail(path: &PathBuf, e: impl std::fmt::Display) -> Failure {
    Failure { code: 3, message: format!("{}: {e}", path.display()) }
}

fn mode_pattern(mode: Mode, phi: Option<f64>, delta1: Option<f64>) -> Result<EnsemblePattern, Failure> {
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| usage(format!("this mode requires --{name}")))
    };
    Ok(match mode {
        Mode::Fig3a => EnsemblePattern::Selective { phi: need(phi, "phi")? },
        Mode::Fig3b => EnsemblePattern::PhiSweep { delta1: need(delta1, "delta1")? },
        Mode::AppB1 => EnsemblePattern::PairedRobust {
            phi: need(phi, "phi")?,
            delta1: need(delta1, "delta1")?,
        },
        Mode::AppB2 => EnsemblePattern::FiveOffset {
            phi: need(phi, "phi")?,
            delta1: need(delta1, "delta1")?,
        },
    })
}

fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, Failure> {
    if n == 0 {
        return Err(usage("grid must have at least one point"));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    if !(hi > lo) {
        return Err(usage(format!("zero-area grid: [{lo}, {hi}] with {n} points")));
    }
    Ok((0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect())
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| io_fail(path, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn emit_report(report: &DesignReport, out: &Option<PathBuf>) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    emit(&json, out)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.cmd {
        Cmd::DesignSelective { phi, delta1, omega0, out } => {
            let d = design_selective(phi, delta1, omega0).map_err(usage)?;
            let field = d.field(omega0).map_err(usage)?;
            let res0 =
                frobenius_sq(propagate(&field, 0.0).matrix(), rot_exp([1.0, 0.0, 0.0], phi).matrix())
                    .sqrt();
            let res1 = frobenius_sq(
                propagate(&field, delta1).matrix(),
                Rotation::identity().matrix(),
            )
            .sqrt();
            println!(
                "omega_S = {:.12}, T_S = {:.12}; residuals: resonance {res0:.2e}, offset {res1:.2e}",
                d.omega_s, d.t_s
            );
            let target = rot_exp([1.0, 0.0, 0.0], phi);
            let curvature = profile_derivative(
                &field,
                &target,
                0.0,
                2,
                default_derivative_step(2, omega0),
            )
            .map_err(usage)?
            .value;
            let report = DesignReport {
                total_time: d.t_s,
                identity_offsets: identity_offsets(&field, 3.2 * delta1, 4000).map_err(usage)?,
                curvature_at_zero: curvature,
                note: None,
                field,
            };
            emit_report(&report, &out)?;
            Ok(0)
        }
        Cmd::DesignRobust { switches, phi, omega0, n, k, alpha, first_sign, out } => {
            let params = RobustFamilyParams { n, k, alpha, phi, omega0, first_sign };
            let report = match switches {
                1 => design_robust_one_switch(&params),
                _ => design_robust_two_switch(&params),
            }
            .map_err(usage)?;
            println!(
                "total_time = {:.12}, curvature_at_zero = {:.6e}{}",
                report.total_time,
                report.curvature_at_zero,
                report
                    .note
                    .as_deref()
                    .map(|s| format!(" ({s})"))
                    .unwrap_or_default()
            );
            emit_report(&report, &out)?;
            Ok(0)
        }
        Cmd::DesignPair { phi, delta1, omega0, out } => {
            let (report, delta2) = design_locally_robust_pair(phi, omega0, delta1).map_err(usage)?;
            println!(
                "total_time = {:.12}, delta2 = {:.12}, curvature_at_zero = {:.6e}",
                report.total_time, delta2, report.curvature_at_zero
            );
            emit_report(&report, &out)?;
            Ok(0)
        }
        Cmd::Profile { field, target_phi, delta_min, delta_max, steps, out } => {
            let text = fs::read_to_string(&field).map_err(|e| io_fail(&field, e))?;
            // accept a bare ControlField or a full DesignReport
            let parsed: ControlField = match serde_json::from_str(&text) {
                Ok(f) => f,
                Err(e) => serde_json::from_str::<DesignReport>(&text)
                    .map(|r| r.field)
                    .map_err(|_| usage(e))?,
            };
            parsed.validate().map_err(usage)?;
            let grid = linspace(delta_min, delta_max, steps)?;
            let target = rot_exp([1.0, 0.0, 0.0], target_phi);
            let profile = fidelity_profile(&parsed, &target, &grid).map_err(usage)?;
            let mut csv = Vec::new();
            profile.write_csv(&mut csv).expect("in-memory write");
            emit(String::from_utf8(csv).expect("ascii csv").trim_end(), &out)?;
            Ok(0)
        }
        Cmd::Landscape {
            mode,
            t_min,
            t_max,
            t_steps,
            axis_min,
            axis_max,
            axis_steps,
            phi,
            delta1,
            opt,
            out,
        } => {
            let pattern = mode_pattern(mode, phi, delta1)?;
            let t_values = linspace(t_min, t_max, t_steps)?;
            let axis_values = linspace(axis_min, axis_max, axis_steps)?;
            let grid =
                landscape_scan(pattern, &t_values, &axis_values, &opt.config()).map_err(usage)?;
            let mut csv = Vec::new();
            grid.write_csv(&mut csv, pattern.axis_name()).expect("in-memory write");
            emit(String::from_utf8(csv).expect("ascii csv").trim_end(), &out)?;
            let failed = grid.failed_cells();
            let total = grid.total_cells();
            eprintln!("{} of {total} cells converged", total - failed);
            if failed * 10 > total {
                return Ok(4);
            }
            Ok(0)
        }
        Cmd::Grape { mode, axis, duration, phi, delta1, opt, out } => {
            let pattern = mode_pattern(mode, phi, delta1)?;
            let ensemble = pattern.instantiate(axis).map_err(usage)?;
            let result = grape_optimize(&ensemble, duration, &opt.config()).map_err(usage)?;
            println!("cost = {:.9e} after {} iterations", result.cost, result.iterations);
            let json = serde_json::to_string_pretty(&result.field).expect("field serializes");
            emit(&json, &out)?;
            Ok(0)
        }
        Cmd::PmpBang { a, omega, k_max } => {
            let p = SwitchParam::new(a, omega).map_err(usage)?;
            let bang = next_bang_duration(&p).map_err(usage)?;
            let crossings = singular_crossing_times(&p, k_max).map_err(usage)?;
            let json = serde_json::json!({
                "next_bang_duration": bang,
                "singular_crossing_times": crossings,
            });
            println!("{}", serde_json::to_string_pretty(&json).expect("json"));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = match std::env::var("SPIN_THREADS") {
        Ok(v) => match v.parse::<usize>() {
            Ok(n) => Some(n),
            Err(_) => {
                eprintln!("error: SPIN_THREADS = {v:?} is not a thread count");
                return ExitCode::from(2);
            }
        },
        Err(_) => cli.threads,
    };
    if let Some(n) = threads {
        if n == 0 {
            eprintln!("error: thread count must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }

    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
