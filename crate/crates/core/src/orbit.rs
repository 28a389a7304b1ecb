//! Forward and backward orbits with the `V = x₁x₂x₃`, `W = x₁+x₂+x₃`
//! diagnostics, and a detector for convergence to the boundary cycle.
//!
//! The detector looks at visits: maximal runs of consecutive states inside
//! the `ε_Q` neighbourhood of an axial point. Near an attracting heteroclinic
//! cycle the dwell time at each saddle grows geometrically, so only the most
//! recent `3 · min_cycles` visits are examined; a fraction-of-trace window
//! would hold too few of them.

use serde::{Deserialize, Serialize};

use crate::cycle::{CycleDirection, Evidence, InteriorStatus};
use crate::error::{Error, Result};
use crate::linalg::{self, Vec3};
use crate::model::{KolmogorovModel, StateVector};
use crate::simplex::find_axial_fixed_points;
use crate::tolerances::{Tolerances, CONVERGENCE_STEP, CONVERGENCE_WINDOW, V_UNDERFLOW};

/// Newton residual required for each backward step.
pub const INVERSION_RESIDUAL: f64 = 1e-12;
pub const INVERSION_MAX_ITER: usize = 50;
const MAX_HALVINGS: usize = 40;

/// `V(x)`, clamped to zero below [`V_UNDERFLOW`]; the flag reports a clamp.
pub fn v_of(x: &StateVector) -> (f64, bool) {
    let v = x.product();
    if v > 0.0 && v < V_UNDERFLOW {
        (0.0, true)
    } else {
        (v, false)
    }
}

pub fn w_of(x: &StateVector) -> f64 {
    x.sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeDirection {
    Forward,
    Backward,
}

/// A maximal run of states near one axial point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visit {
    pub saddle: usize,
    pub start: usize,
    pub dwell: usize,
    /// The run reaches the end of the trace, so `dwell` is a lower bound.
    pub open: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwellStats {
    /// The visits examined, oldest first.
    pub visits: Vec<Visit>,
    pub cycles: usize,
    /// Mean ratio of consecutive dwell times at the same saddle.
    pub mean_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum StopReason {
    MaxIter,
    ConvergedToPoint { point: StateVector },
    CycleDetected { direction: CycleDirection, stats: DwellStats },
    Diverged { step: usize },
    InversionFailed { step: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitTrace {
    pub states: Vec<StateVector>,
    pub v_seq: Vec<f64>,
    pub w_seq: Vec<f64>,
    pub direction: TimeDirection,
    pub stop_reason: StopReason,
    /// Some `V` value was clamped to zero.
    pub v_underflow: bool,
    /// Final Newton residual of each backward step; empty for forward orbits.
    pub newton_residuals: Vec<f64>,
}

impl OrbitTrace {
    fn start(x0: StateVector, direction: TimeDirection) -> Self {
        let mut t = OrbitTrace {
            states: Vec::new(),
            v_seq: Vec::new(),
            w_seq: Vec::new(),
            direction,
            stop_reason: StopReason::MaxIter,
            v_underflow: false,
            newton_residuals: Vec::new(),
        };
        t.push(x0);
        t
    }

    fn push(&mut self, x: StateVector) {
        let (v, clamped) = v_of(&x);
        self.v_underflow |= clamped;
        self.states.push(x);
        self.v_seq.push(v);
        self.w_seq.push(w_of(&x));
    }

    pub fn last(&self) -> &StateVector {
        self.states.last().expect("trace holds at least x0")
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitOptions {
    pub tolerances: Tolerances,
    pub detect_cycles: bool,
    /// Steps between cycle-detector evaluations.
    pub check_every: usize,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self { tolerances: Tolerances::default(), detect_cycles: true, check_every: 100 }
    }
}

/// Builds visits incrementally as states arrive.
#[derive(Debug, Clone)]
struct VisitTracker {
    axial: [StateVector; 3],
    eps_q: f64,
    visits: Vec<Visit>,
}

impl VisitTracker {
    fn new(axial: [StateVector; 3], eps_q: f64) -> Self {
        Self { axial, eps_q, visits: Vec::new() }
    }

    fn label(&self, x: &StateVector) -> Option<usize> {
        (0..3).find(|&k| x.dist_inf(&self.axial[k]) < self.eps_q)
    }

    fn push(&mut self, step: usize, x: &StateVector) {
        let label = self.label(x);
        if let Some(last) = self.visits.last_mut() {
            if last.open && Some(last.saddle) == label {
                last.dwell += 1;
                return;
            }
            last.open = false;
        }
        if let Some(saddle) = label {
            self.visits.push(Visit { saddle, start: step, dwell: 1, open: true });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionFailure {
    VNotSmall,
    TooFewVisits,
    InconsistentOrder,
    DwellDecreased,
    RatioTooSmall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroclinicDetection {
    /// Visit order when detected, otherwise `NotACycle`.
    pub direction: CycleDirection,
    pub stats: DwellStats,
    pub v_final: f64,
    pub failure: Option<DetectionFailure>,
}

impl HeteroclinicDetection {
    pub fn detected(&self) -> bool {
        self.failure.is_none()
    }
}

fn evaluate_visits(visits: &[Visit], v_seq: &[f64], tol: &Tolerances) -> HeteroclinicDetection {
    let v_final = *v_seq.last().unwrap_or(&f64::NAN);
    let fail = |failure, stats| HeteroclinicDetection {
        direction: CycleDirection::NotACycle,
        stats,
        v_final,
        failure: Some(failure),
    };
    let empty = DwellStats { visits: Vec::new(), cycles: 0, mean_ratio: None };

    let mut usable = visits;
    if let Some((last, rest)) = visits.split_last() {
        if last.open {
            let prev = rest.iter().rev().find(|v| v.saddle == last.saddle);
            if !prev.is_some_and(|p| last.dwell >= p.dwell) {
                usable = rest;
            }
        }
    }
    let need = 3 * tol.min_cycles;
    if usable.len() < need {
        return fail(DetectionFailure::TooFewVisits, empty);
    }
    let window = &usable[usable.len() - need..];
    let mut stats = DwellStats { visits: window.to_vec(), cycles: tol.min_cycles, mean_ratio: None };

    let v_start = v_seq[window[0].start];
    if !(v_final < tol.v_tol && v_final <= v_start) {
        return fail(DetectionFailure::VNotSmall, stats);
    }

    let direction = match (window[1].saddle + 3 - window[0].saddle) % 3 {
        1 => CycleDirection::Forward,
        2 => CycleDirection::Backward,
        _ => return fail(DetectionFailure::InconsistentOrder, stats),
    };
    if window.windows(2).any(|p| direction.next(p[0].saddle) != Some(p[1].saddle)) {
        return fail(DetectionFailure::InconsistentOrder, stats);
    }

    // Same-saddle visits sit three apart once the order is consistent.
    let mut ratios = Vec::new();
    for k in 3..window.len() {
        let (prev, cur) = (window[k - 3].dwell, window[k].dwell);
        if cur < prev {
            return fail(DetectionFailure::DwellDecreased, stats);
        }
        ratios.push(cur as f64 / prev as f64);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    stats.mean_ratio = (!ratios.is_empty()).then_some(mean);
    if ratios.is_empty() || mean < tol.ratio_min {
        return fail(DetectionFailure::RatioTooSmall, stats);
    }
    HeteroclinicDetection { direction, stats, v_final, failure: None }
}

/// Checks a finished trace for convergence to the boundary cycle.
pub fn detect_heteroclinic_convergence(
    trace: &OrbitTrace,
    axial: &[StateVector; 3],
    tol: &Tolerances,
) -> HeteroclinicDetection {
    let mut tracker = VisitTracker::new(*axial, tol.eps_q);
    for (n, x) in trace.states.iter().enumerate() {
        tracker.push(n, x);
    }
    evaluate_visits(&tracker.visits, &trace.v_seq, tol)
}

fn axial_points(model: &KolmogorovModel) -> Option<[StateVector; 3]> {
    let q = find_axial_fixed_points(model).ok()?;
    Some([
        StateVector::axis(0, q[0]).ok()?,
        StateVector::axis(1, q[1]).ok()?,
        StateVector::axis(2, q[2]).ok()?,
    ])
}

/// Decides whether a run of tiny steps is a genuine limit. Slow passages
/// near a saddle also produce tiny steps, so the point must attract in the
/// current time direction, or the orbit must be stationary relative to the
/// size of each coordinate.
fn settled(
    model: &KolmogorovModel,
    prev: &StateVector,
    next: &StateVector,
    direction: TimeDirection,
    eps_hyp: f64,
) -> bool {
    let relative = (0..3).all(|i| {
        let d = (next[i] - prev[i]).abs();
        d == 0.0 || d < CONVERGENCE_STEP * next[i].max(prev[i])
    });
    if relative {
        return true;
    }
    let Ok(bundle) = model.eval_jacobians(next) else { return false };
    let Ok(ev) = linalg::eigenvalues_3x3(&bundle.dt) else { return false };
    match direction {
        TimeDirection::Forward => ev[0].norm() <= 1.0 + eps_hyp,
        TimeDirection::Backward => ev[2].norm() >= 1.0 - eps_hyp,
    }
}

/// Shared loop for both time directions. `step` maps a state to its
/// successor and an optional Newton residual.
fn run<F>(
    model: &KolmogorovModel,
    x0: StateVector,
    max_iter: usize,
    opts: &OrbitOptions,
    direction: TimeDirection,
    mut step: F,
) -> OrbitTrace
where
    F: FnMut(&StateVector) -> std::result::Result<(StateVector, Option<f64>), ()>,
{
    let mut trace = OrbitTrace::start(x0, direction);
    let mut tracker = if opts.detect_cycles {
        axial_points(model).map(|q| VisitTracker::new(q, opts.tolerances.eps_q))
    } else {
        None
    };
    if let Some(t) = tracker.as_mut() {
        t.push(0, &x0);
    }
    let check_every = opts.check_every.max(1);
    let mut still = 0;
    for n in 1..=max_iter {
        let prev = *trace.last();
        let (next, residual) = match step(&prev) {
            Ok(s) => s,
            Err(()) => {
                trace.stop_reason = match direction {
                    TimeDirection::Forward => StopReason::Diverged { step: n },
                    TimeDirection::Backward => StopReason::InversionFailed { step: n },
                };
                return trace;
            }
        };
        if let Some(r) = residual {
            trace.newton_residuals.push(r);
        }
        trace.push(next);
        if let Some(t) = tracker.as_mut() {
            t.push(n, &next);
        }

        if next.dist_inf(&prev) < CONVERGENCE_STEP {
            still += 1;
            if still >= CONVERGENCE_WINDOW {
                if settled(model, &prev, &next, direction, opts.tolerances.eps_hyp) {
                    trace.stop_reason = StopReason::ConvergedToPoint { point: next };
                    return trace;
                }
                still = 0;
            }
        } else {
            still = 0;
        }

        if let Some(t) = tracker.as_ref() {
            if n % check_every == 0 || n == max_iter {
                let d = evaluate_visits(&t.visits, &trace.v_seq, &opts.tolerances);
                if d.detected() {
                    trace.stop_reason =
                        StopReason::CycleDetected { direction: d.direction, stats: d.stats };
                    return trace;
                }
            }
        }
    }
    trace
}

/// Applies the map up to `max_iter` times.
pub fn iterate_forward(
    model: &KolmogorovModel,
    x0: StateVector,
    max_iter: usize,
    opts: &OrbitOptions,
) -> OrbitTrace {
    run(model, x0, max_iter, opts, TimeDirection::Forward, |x| {
        model.eval_map(x).map(|y| (y, None)).map_err(|_| ())
    })
}

/// Residual of `T(y) = target` plus a merit scaled per component by the
/// target, so that preimages of points near the faces are resolved to full
/// relative precision.
fn residual(model: &KolmogorovModel, y: &Vec3, target: &Vec3) -> Option<(Vec3, f64, f64)> {
    let ty = model.eval_map_raw(y).ok()?;
    let r = [ty[0] - target[0], ty[1] - target[1], ty[2] - target[2]];
    let abs = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut rel = 0.0_f64;
    for i in 0..3 {
        if target[i] > 0.0 {
            rel = rel.max(r[i].abs() / target[i].min(1.0));
        } else if r[i] != 0.0 {
            rel = f64::INFINITY;
        }
    }
    Some((r, abs, rel))
}

/// Solves `T(y) = x` by damped Newton seeded at `x`. Returns the preimage and
/// the final residual `‖T(y) − x‖∞`.
pub fn invert_map(model: &KolmogorovModel, x: &StateVector) -> Result<(StateVector, f64)> {
    let target = x.components();
    let mut y = target;
    let (mut r, mut abs, mut rel) = residual(model, &y, &target)
        .ok_or(Error::NonFinite { what: "T", component: 0 })?;
    let mut iter = 0;
    while rel >= INVERSION_RESIDUAL {
        if iter == INVERSION_MAX_ITER {
            return Err(Error::Precondition(format!(
                "inversion did not converge (residual {abs:e})"
            )));
        }
        iter += 1;
        let bundle = model.eval_jacobians(&StateVector::new(y)?)?;
        let delta = linalg::solve3(&bundle.dt, &r.map(|v| -v))
            .ok_or_else(|| Error::Precondition("singular Jacobian during inversion".into()))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial = [0, 1, 2].map(|i| y[i] + lambda * delta[i]);
            if trial.iter().all(|&v| v >= 0.0) {
                if let Some((tr, ta, tl)) = residual(model, &trial, &target) {
                    if tl < rel {
                        (y, r, abs, rel) = (trial, tr, ta, tl);
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::Precondition(format!(
                "line search stalled during inversion (residual {abs:e})"
            )));
        }
    }
    let y = StateVector::new(y)?;
    if !y.le(&model.box_r) {
        return Err(Error::Precondition("preimage leaves the box".into()));
    }
    Ok((y, abs))
}

/// Inverts the map up to `max_iter` times, staying inside `[0, box_r]`.
pub fn iterate_backward(
    model: &KolmogorovModel,
    x0: StateVector,
    max_iter: usize,
    opts: &OrbitOptions,
) -> Result<OrbitTrace> {
    if !x0.le(&model.box_r) {
        return Err(Error::Precondition("backward orbits must start inside the box".into()));
    }
    Ok(run(model, x0, max_iter, opts, TimeDirection::Backward, |x| {
        invert_map(model, x).map(|(y, r)| (y, Some(r))).map_err(|_| ())
    }))
}

fn require_ricker(model: &KolmogorovModel) -> Result<(f64, f64)> {
    model
        .ricker_params()
        .ok_or_else(|| Error::Unsupported("only defined for the cyclic Ricker model".into()))
}

/// `|V(T(x)) − V(x) exp(u(1+α)(3/(1+α) − W(x)))|`.
pub fn lyapunov_identity_check(model: &KolmogorovModel, x: &StateVector) -> Result<f64> {
    let (u, alpha) = require_ricker(model)?;
    let lhs = model.eval_map(x)?.product();
    let rhs = x.product() * (u * (1.0 + alpha) * (3.0 / (1.0 + alpha) - x.sum())).exp();
    Ok((lhs - rhs).abs())
}

/// `W(T(x)) > (1+u) W(x) − (u(1+α)/3) W(x)²` for non-fixed `x`, `α ≥ 2`.
pub fn w_growth_check(model: &KolmogorovModel, x: &StateVector) -> Result<bool> {
    let (u, alpha) = require_ricker(model)?;
    if alpha < 2.0 {
        return Err(Error::Unsupported(format!("needs alpha >= 2, got {alpha}")));
    }
    let tx = model.eval_map(x)?;
    if tx.dist_inf(x) == 0.0 {
        return Err(Error::Precondition("x is a fixed point".into()));
    }
    let w = x.sum();
    Ok(tx.sum() > (1.0 + u) * w - u * (1.0 + alpha) / 3.0 * w * w)
}

/// Samples forward orbits to guess the interior point's global behaviour.
/// The result only ever carries numerical evidence.
pub fn sample_interior_status(
    model: &KolmogorovModel,
    p: &StateVector,
    starts: &[StateVector],
    max_iter: usize,
    opts: &OrbitOptions,
) -> InteriorStatus {
    let mut to_p = 0;
    let mut to_cycle = 0;
    for x0 in starts {
        let trace = iterate_forward(model, *x0, max_iter, opts);
        match trace.stop_reason {
            StopReason::ConvergedToPoint { point } if point.dist_inf(p) < 1e-8 => to_p += 1,
            StopReason::CycleDetected { .. } => to_cycle += 1,
            _ => {}
        }
    }
    if !starts.is_empty() && to_p == starts.len() {
        InteriorStatus::GloballyAttracting { evidence: Evidence::Numerical }
    } else if !starts.is_empty() && to_cycle == starts.len() {
        InteriorStatus::RepellingOnSimplex { evidence: Evidence::Numerical }
    } else {
        InteriorStatus::Neither
    }
}
