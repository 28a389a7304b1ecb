use std::path::PathBuf;

use clap::{Args, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use hetcycle::cycle::{classify_boundary_cycle, CycleHypotheses, CycleVerdict, InteriorStatus};
use hetcycle::fixed_points::{find_all_fixed_points, FixedPointKind, FixedPointOptions, Stability};
use hetcycle::orbit::{
    iterate_backward, iterate_forward, sample_interior_status, OrbitOptions, OrbitTrace, StopReason,
    TimeDirection,
};
use hetcycle::ricker::{slice_oracle_h, classify_regime_with, RegimeClassification};
use hetcycle::simplex::{verify_simplex_conditions, Verdict, VerificationReport, VerifyOptions};
use hetcycle::{KolmogorovModel, StateVector};

use crate::config::{parse_triple, Format, RunConfig};
use crate::error::{exit, CliError};
use crate::output;

pub const DEFAULT_APPENDIX_GRID: usize = 200;

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the simplex-existence conditions on a grid.
    Verify {
        /// Evaluate spectral radii everywhere and cross-check the row-sum shortcut.
        #[arg(long)]
        force_eigen: bool,
    },
    /// List the fixed points with their eigenvalues and stability.
    FixedPoints {
        /// Use multistart Newton instead of the exact linear solves.
        #[arg(long)]
        force_newton: bool,
    },
    /// Classify the boundary heteroclinic cycle.
    Classify {
        /// Sample this many forward orbits to estimate the interior point's
        /// global behaviour when it is not known in closed form.
        #[arg(long)]
        sample_interior: Option<usize>,
    },
    /// Iterate an orbit and write its trace.
    Simulate(SimulateArgs),
    /// Classify one Ricker parameter pair.
    Regime,
    /// Classify a rectangle of Ricker parameter pairs.
    Sweep(SweepArgs),
    /// Maximise the comparison function over a slice of constant total density.
    Appendix {
        /// Slice level: the slice is `x1 + x2 + x3 = 3θ`.
        #[arg(long)]
        theta: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Start point `x1,x2,x3`.
    #[arg(long, value_name = "X1,X2,X3")]
    pub x0: Option<String>,
    /// Number of steps (defaults to --max-iter).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Iterate the inverse map.
    #[arg(long)]
    pub backward: bool,
    /// Orbit CSV destination.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha_max: Option<f64>,
    #[arg(long)]
    pub alpha_steps: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub u_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub u_max: Option<f64>,
    #[arg(long)]
    pub u_steps: Option<usize>,
}

/// Runs `cmd` and returns the process exit code for a successful run.
pub fn run(cmd: &Command, cfg: &RunConfig) -> Result<u8, CliError> {
    match cmd {
        Command::Verify { force_eigen } => verify(cfg, *force_eigen),
        Command::FixedPoints { force_newton } => fixed_points(cfg, *force_newton),
        Command::Classify { sample_interior } => classify(cfg, *sample_interior),
        Command::Simulate(args) => simulate(cfg, args),
        Command::Regime => regime(cfg),
        Command::Sweep(args) => sweep(cfg, args),
        Command::Appendix { theta } => appendix(cfg, *theta),
    }
}

fn emit(cfg: &RunConfig, bytes: Vec<u8>) -> Result<(), CliError> {
    output::emit(cfg.output.as_deref(), &bytes)
}

fn emit_report<T: Serialize, R: Serialize>(
    cfg: &RunConfig,
    report: &T,
    csv_rows: impl FnOnce() -> Vec<R>,
) -> Result<(), CliError> {
    let bytes = match cfg.format {
        Format::Json => output::json(report)?,
        Format::Csv => output::csv_rows(&csv_rows())?,
    };
    emit(cfg, bytes)
}

#[derive(Serialize)]
struct VerifyRow {
    grid_n: usize,
    verdict: &'static str,
    classical_strictness: bool,
    violation_count: usize,
    witness_x1: Option<f64>,
    witness_x2: Option<f64>,
    witness_x3: Option<f64>,
    witness_condition: Option<String>,
    witness_value: Option<f64>,
}

fn verdict_label(v: &Verdict) -> &'static str {
    match v {
        Verdict::ModifiedSimplexCertified => "ModifiedSimplexCertified",
        Verdict::ClassicalSimplexCertified => "ClassicalSimplexCertified",
        Verdict::Violated(_) => "Violated",
        Verdict::Indeterminate => "Indeterminate",
    }
}

fn verify_report(cfg: &RunConfig, model: &KolmogorovModel, force_eigen: bool) -> Result<VerificationReport, CliError> {
    let opts = VerifyOptions {
        grid_n: cfg.grid_n,
        eps_strict: cfg.tolerances.eps_strict,
        force_eigen,
    };
    Ok(verify_simplex_conditions(model, &opts)?)
}

fn verify(cfg: &RunConfig, force_eigen: bool) -> Result<u8, CliError> {
    let model = cfg.require_model()?;
    let report = verify_report(cfg, model, force_eigen)?;
    emit_report(cfg, &report, || {
        let w = report.worst_witness.as_ref();
        vec![VerifyRow {
            grid_n: report.grid_n,
            verdict: verdict_label(&report.verdict),
            classical_strictness: report.classical_strictness,
            violation_count: report.violation_count,
            witness_x1: w.map(|w| w.point[0]),
            witness_x2: w.map(|w| w.point[1]),
            witness_x3: w.map(|w| w.point[2]),
            witness_condition: w.map(|w| erased::Label::label(&w.condition)),
            witness_value: w.and_then(|w| w.value),
        }]
    })?;
    Ok(match report.verdict {
        Verdict::ModifiedSimplexCertified | Verdict::ClassicalSimplexCertified => exit::OK,
        Verdict::Violated(_) => exit::VIOLATED,
        Verdict::Indeterminate => exit::INDETERMINATE,
    })
}

#[derive(Serialize)]
struct FixedPointRow {
    kind: &'static str,
    index: Option<usize>,
    x1: f64,
    x2: f64,
    x3: f64,
    stability: &'static str,
    stable_dim: Option<usize>,
    modulus1: f64,
    modulus2: f64,
    modulus3: f64,
    residual: f64,
}

fn fixed_points(cfg: &RunConfig, force_newton: bool) -> Result<u8, CliError> {
    let model = cfg.require_model()?;
    let opts = FixedPointOptions { eps_hyp: cfg.tolerances.eps_hyp, force_newton };
    let set = find_all_fixed_points(model, &opts)?;
    emit_report(cfg, &set, || {
        set.records
            .iter()
            .map(|r| {
                let (kind, index) = match r.kind {
                    FixedPointKind::Origin => ("origin", None),
                    FixedPointKind::Axial { axis } => ("axial", Some(axis)),
                    FixedPointKind::Planar { face } => ("planar", Some(face)),
                    FixedPointKind::Interior => ("interior", None),
                };
                let (stability, stable_dim) = match r.stability {
                    Stability::Repellor => ("repellor", Some(0)),
                    Stability::Saddle { stable_dim } => ("saddle", Some(stable_dim)),
                    Stability::Attractor => ("attractor", Some(3)),
                    Stability::NonHyperbolic => ("non_hyperbolic", None),
                };
                let m = r.eigenvalues.map(|z| z.norm());
                FixedPointRow {
                    kind,
                    index,
                    x1: r.location[0],
                    x2: r.location[1],
                    x3: r.location[2],
                    stability,
                    stable_dim,
                    modulus1: m[0],
                    modulus2: m[1],
                    modulus3: m[2],
                    residual: r.residual,
                }
            })
            .collect()
    })?;
    Ok(exit::OK)
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ClassifyReport {
    pub simplex_verdict: Verdict,
    pub simplex_certified: bool,
    pub interior_status: Option<InteriorStatus>,
    pub cycle: CycleVerdict,
}

#[derive(Serialize)]
struct ClassifyRow {
    simplex_certified: bool,
    direction: String,
    det_theta: f64,
    local_verdict: String,
    condition_c: bool,
    global_verdict: String,
}

/// Deterministic well-spread points in `(0.05 q, 0.95 q)`.
fn sample_starts(q: &[f64; 3], n: usize) -> Result<Vec<StateVector>, CliError> {
    const STEP: [f64; 3] = [0.819_172_513_396_164_5, 0.671_043_606_703_789_3, 0.549_700_477_901_970_3];
    (1..=n)
        .map(|k| {
            let x = [0, 1, 2].map(|i| q[i] * (0.05 + 0.9 * (k as f64 * STEP[i]).fract()));
            StateVector::new(x).map_err(CliError::from)
        })
        .collect()
}

fn interior_status(
    cfg: &RunConfig,
    model: &KolmogorovModel,
    interior: Option<StateVector>,
    axial: Option<[StateVector; 3]>,
    samples: Option<usize>,
) -> Result<Option<InteriorStatus>, CliError> {
    if let Some((u, alpha)) = model.ricker_params() {
        let r = classify_regime_with(alpha, u, cfg.tolerances.eps_strict)?;
        if let Some(status) = r.interior_status() {
            return Ok(Some(status));
        }
    }
    let n = match samples {
        Some(n) if n > 0 => n,
        _ => return Ok(None),
    };
    let (Some(p), Some(axial)) = (interior, axial) else {
        return Ok(Some(InteriorStatus::Neither));
    };
    let q = [axial[0][0], axial[1][1], axial[2][2]];
    let starts = sample_starts(&q, n)?;
    let opts = OrbitOptions { tolerances: cfg.tolerances, ..Default::default() };
    Ok(Some(sample_interior_status(model, &p, &starts, cfg.max_iter, &opts)))
}

fn classify(cfg: &RunConfig, samples: Option<usize>) -> Result<u8, CliError> {
    let model = cfg.require_model()?;
    let samples = cfg.file.pick_str(samples, "sample_interior")?;
    let simplex = verify_report(cfg, model, false)?;
    let set = find_all_fixed_points(model, &FixedPointOptions { eps_hyp: cfg.tolerances.eps_hyp, force_newton: false })?;
    let interior = interior_status(cfg, model, set.interior().next().map(|r| r.location), set.axial_points(), samples)?;
    let hyp = CycleHypotheses { simplex_certified: simplex.is_certified(), interior };
    let cycle = classify_boundary_cycle(model, &set.records, Some(&hyp), cfg.tolerances.eps_strict)?;
    let report = ClassifyReport {
        simplex_certified: simplex.is_certified(),
        simplex_verdict: simplex.verdict,
        interior_status: interior,
        cycle,
    };
    emit_report(cfg, &report, || {
        use erased::Label;
        vec![ClassifyRow {
            simplex_certified: report.simplex_certified,
            direction: report.cycle.direction.label(),
            det_theta: report.cycle.det_theta,
            local_verdict: report.cycle.local_verdict.label(),
            condition_c: report.cycle.condition_c,
            global_verdict: report.cycle.global_verdict.label(),
        }]
    })?;
    Ok(exit::OK)
}

mod erased {
    use serde::Serialize;
    use serde_json::Value;

    /// Compact text form of a serialisable enum for CSV cells. Internally
    /// tagged variants become `tag(field=value;...)`.
    const TAGS: &[&str] = &["verdict", "condition", "status", "reason", "kind", "type", "outcome"];

    pub trait Label {
        fn label(&self) -> String;
    }

    fn scalar(v: &Value) -> String {
        match v {
            Value::String(s) => s.clone(),
            Value::Array(items) => items.iter().map(scalar).collect::<Vec<_>>().join("+"),
            other => other.to_string(),
        }
    }

    impl<T: Serialize> Label for T {
        fn label(&self) -> String {
            match serde_json::to_value(self) {
                Ok(Value::Object(map)) => {
                    let Some((tag_key, tag)) = map.iter().find(|(k, _)| TAGS.contains(&k.as_str())) else {
                        return Value::Object(map).to_string();
                    };
                    let rest: Vec<String> = map
                        .iter()
                        .filter(|(k, _)| *k != tag_key)
                        .map(|(k, v)| format!("{k}={}", scalar(v)))
                        .collect();
                    if rest.is_empty() {
                        scalar(tag)
                    } else {
                        format!("{}({})", scalar(tag), rest.join(";"))
                    }
                }
                Ok(v) => scalar(&v),
                Err(e) => format!("<{e}>"),
            }
        }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SimulateReport {
    pub direction: TimeDirection,
    pub x0: StateVector,
    pub steps: usize,
    pub stop_reason: StopReason,
    pub final_state: StateVector,
    pub v_final: f64,
    pub w_final: f64,
    pub v_underflow: bool,
    pub max_newton_residual: Option<f64>,
    pub trace: PathBuf,
}

#[derive(Serialize)]
struct OrbitRow {
    n: usize,
    x1: f64,
    x2: f64,
    x3: f64,
    #[serde(rename = "V")]
    v: f64,
    #[serde(rename = "W")]
    w: f64,
}

#[derive(Serialize)]
struct SimulateRow {
    direction: String,
    steps: usize,
    stop_reason: String,
    x1: f64,
    x2: f64,
    x3: f64,
    #[serde(rename = "V")]
    v: f64,
    #[serde(rename = "W")]
    w: f64,
}

fn orbit_csv(trace: &OrbitTrace) -> Result<Vec<u8>, CliError> {
    let rows: Vec<OrbitRow> = trace
        .states
        .iter()
        .enumerate()
        .map(|(n, x)| OrbitRow { n, x1: x[0], x2: x[1], x3: x[2], v: trace.v_seq[n], w: trace.w_seq[n] })
        .collect();
    output::csv_rows(&rows)
}

fn simulate(cfg: &RunConfig, args: &SimulateArgs) -> Result<u8, CliError> {
    use erased::Label;
    let model = cfg.require_model()?;
    let x0 = cfg
        .file
        .pick(args.x0.clone(), "x0", |s| Ok(s.to_string()))?
        .ok_or_else(|| CliError::Usage("simulate needs --x0".into()))?;
    let x0 = parse_triple(&x0).map_err(|e| CliError::Usage(format!("--x0: {e}")))?;
    let x0 = StateVector::new(x0).map_err(CliError::usage)?;
    let steps = cfg.file.pick_str(args.steps, "steps")?.unwrap_or(cfg.max_iter);
    let trace_path = cfg
        .file
        .pick(args.trace.clone(), "trace", |s| Ok(PathBuf::from(s)))?
        .unwrap_or_else(|| PathBuf::from("orbit.csv"));

    let opts = OrbitOptions { tolerances: cfg.tolerances, ..Default::default() };
    let trace = if args.backward {
        iterate_backward(model, x0, steps, &opts)?
    } else {
        iterate_forward(model, x0, steps, &opts)
    };
    output::emit(Some(&trace_path), &orbit_csv(&trace)?)?;

    let last = *trace.last();
    let report = SimulateReport {
        direction: trace.direction,
        x0,
        steps: trace.steps(),
        stop_reason: trace.stop_reason.clone(),
        final_state: last,
        v_final: *trace.v_seq.last().expect("nonempty trace"),
        w_final: *trace.w_seq.last().expect("nonempty trace"),
        v_underflow: trace.v_underflow,
        max_newton_residual: trace.newton_residuals.iter().copied().reduce(f64::max),
        trace: trace_path,
    };
    emit_report(cfg, &report, || {
        let reason = match &report.stop_reason {
            StopReason::MaxIter => "max_iter".to_string(),
            StopReason::ConvergedToPoint { .. } => "converged_to_point".to_string(),
            StopReason::CycleDetected { direction, .. } => format!("cycle_detected_{}", direction.label()),
            StopReason::Diverged { .. } => "diverged".to_string(),
            StopReason::InversionFailed { .. } => "inversion_failed".to_string(),
        };
        vec![SimulateRow {
            direction: report.direction.label(),
            steps: report.steps,
            stop_reason: reason,
            x1: last[0],
            x2: last[1],
            x3: last[2],
            v: report.v_final,
            w: report.w_final,
        }]
    })?;
    Ok(exit::OK)
}

/// One row of a regime map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeRow {
    pub alpha: f64,
    pub u: f64,
    pub admissible: bool,
    pub det_theta: f64,
    pub lambda_modulus: f64,
    pub verdict: String,
}

impl From<&RegimeClassification> for RegimeRow {
    fn from(r: &RegimeClassification) -> Self {
        Self {
            alpha: r.alpha,
            u: r.u,
            admissible: r.admissible,
            det_theta: r.det_theta,
            lambda_modulus: r.lambda_modulus,
            verdict: r.verdict.label(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct RegimeReport {
    #[serde(flatten)]
    pub classification: RegimeClassification,
    pub verdict_label: String,
}

fn regime(cfg: &RunConfig) -> Result<u8, CliError> {
    let (alpha, u) = cfg.ricker_params()?;
    let r = classify_regime_with(alpha, u, cfg.tolerances.eps_strict)?;
    let report = RegimeReport { verdict_label: r.verdict.label(), classification: r };
    emit_report(cfg, &report, || vec![RegimeRow::from(&report.classification)])?;
    Ok(exit::OK)
}

fn axis(min: f64, max: f64, steps: usize, name: &str) -> Result<Vec<f64>, CliError> {
    if steps == 0 || !(min.is_finite() && max.is_finite()) || min > max || (steps > 1 && min == max) {
        return Err(CliError::Usage(format!(
            "empty {name} range: [{min}, {max}] with {steps} step(s)"
        )));
    }
    if steps == 1 {
        return Ok(vec![min]);
    }
    let last = (steps - 1) as f64;
    Ok((0..steps)
        .map(|k| if k == steps - 1 { max } else { min + (max - min) * k as f64 / last })
        .collect())
}

fn sweep(cfg: &RunConfig, args: &SweepArgs) -> Result<u8, CliError> {
    let need = |flag: Option<f64>, key: &str| -> Result<f64, CliError> {
        cfg.file
            .pick_str(flag, key)?
            .ok_or_else(|| CliError::Usage(format!("sweep needs --{}", key.replace('_', "-"))))
    };
    let alphas = axis(
        need(args.alpha_min, "alpha_min")?,
        need(args.alpha_max, "alpha_max")?,
        cfg.file.pick_str(args.alpha_steps, "alpha_steps")?.unwrap_or(1),
        "alpha",
    )?;
    let us = axis(
        need(args.u_min, "u_min")?,
        need(args.u_max, "u_max")?,
        cfg.file.pick_str(args.u_steps, "u_steps")?.unwrap_or(1),
        "u",
    )?;
    let eps = cfg.tolerances.eps_strict;
    let cells: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| us.iter().map(move |&u| (a, u))).collect();
    let rows: Vec<RegimeRow> = cells
        .par_iter()
        .map(|&(alpha, u)| classify_regime_with(alpha, u, eps).map(|r| RegimeRow::from(&r)))
        .collect::<Result<_, _>>()?;
    // A regime map is plot data, so CSV unless JSON was asked for.
    let bytes = match cfg.format_given {
        Some(Format::Json) => output::json(&rows)?,
        _ => output::csv_rows(&rows)?,
    };
    emit(cfg, bytes)?;
    Ok(exit::OK)
}

#[derive(Serialize)]
struct SliceRow {
    theta: f64,
    grid_n: usize,
    max_h: f64,
    argmax_x1: f64,
    argmax_x2: f64,
    argmax_x3: f64,
    h_p0: f64,
    excess: f64,
    argmax_within_cell: bool,
    edge_bound_holds: bool,
}

fn appendix(cfg: &RunConfig, theta: Option<f64>) -> Result<u8, CliError> {
    let (alpha, u) = cfg.ricker_params()?;
    let theta = cfg
        .file
        .pick_str(theta, "theta")?
        .ok_or_else(|| CliError::Usage("appendix needs --theta".into()))?;
    let grid_n = cfg.grid_given.unwrap_or(DEFAULT_APPENDIX_GRID);
    let rep = slice_oracle_h(alpha, u, theta, grid_n)?;
    emit_report(cfg, &rep, || {
        vec![SliceRow {
            theta: rep.theta,
            grid_n: rep.grid_n,
            max_h: rep.max_h,
            argmax_x1: rep.argmax[0],
            argmax_x2: rep.argmax[1],
            argmax_x3: rep.argmax[2],
            h_p0: rep.h_p0,
            excess: rep.excess,
            argmax_within_cell: rep.argmax_within_cell,
            edge_bound_holds: rep.edge_bound_holds,
        }]
    })?;
    Ok(exit::OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes() {
        assert_eq!(axis(1.0, 2.0, 3, "a").unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(axis(1.0, 1.0, 1, "a").unwrap(), vec![1.0]);
        assert!(axis(2.0, 1.0, 3, "a").is_err());
        assert!(axis(1.0, 2.0, 0, "a").is_err());
        assert!(axis(1.0, 1.0, 4, "a").is_err());
        assert!(axis(f64::NAN, 1.0, 2, "a").is_err());
    }

    #[test]
    fn starts_are_interior_and_below_q() {
        let q = [1.0, 2.0, 0.5];
        let s = sample_starts(&q, 50).unwrap();
        assert_eq!(s.len(), 50);
        for x in &s {
            assert!(x.is_interior());
            for i in 0..3 {
                assert!(x[i] < q[i]);
            }
        }
    }
}
