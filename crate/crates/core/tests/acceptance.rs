//! End-to-end acceptance checks. Runs every criterion, prints one line each,
//! and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use hetcycle::cycle::{classify_boundary_cycle, LocalVerdict};
use hetcycle::fixed_points::{eigen_at, find_all_fixed_points, FixedPointOptions};
use hetcycle::linalg::Mat3;
use hetcycle::orbit::{
    iterate_backward, iterate_forward, lyapunov_identity_check, OrbitOptions, StopReason,
    INVERSION_RESIDUAL,
};
use hetcycle::ricker::{alpha0_polynomial, slice_oracle_h, compute_alpha0};
use hetcycle::simplex::{find_axial_fixed_points, verify_simplex_conditions, Verdict, VerifyOptions};
use hetcycle::tolerances::EPS_STRICT;
use hetcycle::{cycle::CycleDirection, KolmogorovModel, StateVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn sv(x: [f64; 3]) -> StateVector {
    StateVector::new(x).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

// Plain bisection to the limit of double precision; shares nothing with the
// library's solver beyond the polynomial itself.
fn bisection_oracle() -> f64 {
    let g = |a: f64| a * a * a + a * a - 4.0 * a - 1.0;
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn alpha0_bracket() -> Outcome {
    let t = Instant::now();
    let a0 = compute_alpha0();
    let res = alpha0_polynomial(a0).abs();
    let oracle = bisection_oracle();
    ensure(a0 > 1.69 && a0 < 1.70, || format!("alpha0 = {a0} outside (1.69, 1.70)"))?;
    ensure(res < 1e-10, || format!("|g(alpha0)| = {res:e}"))?;
    ensure((a0 - oracle).abs() < 1e-10, || format!("oracle {oracle} vs {a0}"))?;
    within(t.elapsed(), Duration::from_millis(50))?;
    Ok(format!("alpha0 = {a0:.16}, |g| = {res:.1e}, oracle diff = {:.1e}", (a0 - oracle).abs()))
}

fn eigen_closed_form() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let alpha = rng.gen_range(1.0..5.0f64).max(1.0 + 1e-9);
        let u = rng.gen_range(1e-6..1.0) / (1.0 + alpha);
        let m = KolmogorovModel::ricker3(u, alpha).map_err(|e| e.to_string())?;
        let p = sv([1.0 / (1.0 + alpha); 3]);
        let ev = eigen_at(&m, &p).map_err(|e| e.to_string())?;
        let s = 1.0 + alpha;
        let re = 1.0 + u * (alpha - 2.0) / (2.0 * s);
        let im = 3f64.sqrt() * u * alpha / (2.0 * s);
        for want in [Complex64::new(1.0 - u, 0.0), Complex64::new(re, im), Complex64::new(re, -im)] {
            let err = ev.iter().map(|z| (z - want).norm()).fold(f64::INFINITY, f64::min);
            worst = worst.max(err);
        }
    }
    ensure(worst < 1e-12, || format!("max eigenvalue error {worst:e}"))?;
    within(t.elapsed(), Duration::from_secs(1))?;
    Ok(format!("100 parameter pairs, max error {worst:.1e}"))
}

fn modified_not_classical() -> Outcome {
    let t = Instant::now();
    let m = KolmogorovModel::ricker3(0.3, 2.0).unwrap();
    let r = verify_simplex_conditions(&m, &VerifyOptions::with_grid(21)).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    ensure(r.verdict == Verdict::ModifiedSimplexCertified, || format!("verdict {:?}", r.verdict))?;
    ensure(!r.classical_strictness, || "classical strictness unexpectedly true".into())?;
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("21^3 grid: modified certified, classical_strictness = false ({elapsed:.2?})"))
}

fn attracting_cycle() -> Outcome {
    let t = Instant::now();
    let m = KolmogorovModel::ricker3(0.25, 2.5).unwrap();
    let trace = iterate_forward(&m, sv([0.3, 0.31, 0.32]), 5000, &OrbitOptions::default());
    let elapsed = t.elapsed();
    let StopReason::CycleDetected { direction, stats } = &trace.stop_reason else {
        return Err(format!("stop reason {:?}", trace.stop_reason));
    };
    let v_final = *trace.v_seq.last().unwrap();
    ensure(*direction == CycleDirection::Forward, || format!("direction {direction:?}"))?;
    ensure(v_final < 1e-10, || format!("final V {v_final:e}"))?;
    ensure(stats.cycles >= 3, || format!("{} cycles", stats.cycles))?;
    let nondecreasing = (3..stats.visits.len())
        .all(|k| stats.visits[k].dwell >= stats.visits[k - 3].dwell);
    ensure(nondecreasing, || "dwell times decrease".into())?;
    within(elapsed, Duration::from_secs(1))?;
    let dwells: Vec<usize> = stats.visits.iter().map(|v| v.dwell).collect();
    Ok(format!(
        "forward cycle at step {}, final V = {v_final:.1e}, dwells {dwells:?}",
        trace.steps()
    ))
}

fn global_stability() -> Outcome {
    let t = Instant::now();
    let m = KolmogorovModel::ricker3(0.2, 1.5).unwrap();
    let p = sv([0.4; 3]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut longest = 0;
    for _ in 0..20 {
        let x0 = sv([0; 3].map(|_| rng.gen_range(0.01..1.5)));
        let trace = iterate_forward(&m, x0, 5000, &OrbitOptions::default());
        let hit = trace.states.iter().position(|x| x.dist_inf(&p) < 1e-8);
        let Some(n) = hit else {
            return Err(format!("start {x0:?} did not reach p: {:?}", trace.stop_reason));
        };
        longest = longest.max(n);
        worst = worst.max(trace.last().dist_inf(&p));
    }
    within(t.elapsed(), Duration::from_secs(2))?;
    Ok(format!("20/20 starts within 1e-8 of p by step {longest}, final distance <= {worst:.1e}"))
}

fn repulsion_on_simplex() -> Outcome {
    let m = KolmogorovModel::ricker3(0.2, 1.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut longest = 0;
    let mut worst_res = 0.0f64;
    for _ in 0..10 {
        let delta = rng.gen_range(0.005..0.1);
        let x0 = sv([0; 3].map(|_| 0.4 - delta * rng.gen_range(0.2..1.0)));
        let trace = iterate_backward(&m, x0, 2000, &OrbitOptions::default()).map_err(|e| e.to_string())?;
        if let StopReason::InversionFailed { step } = trace.stop_reason {
            return Err(format!("inversion failed at step {step} from {x0:?}"));
        }
        let n = trace
            .v_seq
            .iter()
            .position(|&v| v < 1e-6)
            .ok_or_else(|| format!("V stayed above 1e-6 from {x0:?}"))?;
        let decreasing = trace
            .v_seq
            .windows(2)
            .all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0));
        ensure(decreasing, || format!("V not monotone from {x0:?}"))?;
        let res = trace.newton_residuals.iter().copied().fold(0.0, f64::max);
        ensure(res < INVERSION_RESIDUAL, || format!("Newton residual {res:e}"))?;
        longest = longest.max(n);
        worst_res = worst_res.max(res);
    }
    Ok(format!("10/10 backward orbits below V = 1e-6 by step {longest}, max residual {worst_res:.1e}"))
}

fn lyapunov_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let alpha = rng.gen_range(1.01..4.0);
        let u = rng.gen_range(0.01..0.99) / (1.0 + alpha);
        let m = KolmogorovModel::ricker3(u, alpha).unwrap();
        let x = sv([0; 3].map(|_| rng.gen_range(0.0..1.5)));
        let r = lyapunov_identity_check(&m, &x).map_err(|e| e.to_string())?;
        let scaled = r / x.product().max(1.0);
        ensure(scaled < 1e-14, || format!("residual {r:e} at {x:?}"))?;
        worst = worst.max(scaled);
    }
    Ok(format!("10^4 points, max scaled residual {worst:.1e}"))
}

fn det_theta_formula() -> Outcome {
    let mut worst = 0.0f64;
    let mut cells = 0;
    let alphas = (0..50).map(|i| 1.1 + 1.9 * i as f64 / 49.0).chain([2.0]);
    for alpha in alphas {
        for j in 0..30 {
            let u = 0.01 + 0.29 * j as f64 / 29.0;
            let m = KolmogorovModel::ricker3(u, alpha).unwrap();
            let fps = find_all_fixed_points(&m, &FixedPointOptions::default()).map_err(|e| e.to_string())?;
            let v = classify_boundary_cycle(&m, &fps.records, None, EPS_STRICT).map_err(|e| e.to_string())?;
            let want = u.powi(3) * ((1.0 - alpha).powi(3) + 1.0);
            worst = worst.max((v.det_theta - want).abs());
            let expected = if want.abs() < EPS_STRICT {
                LocalVerdict::Degenerate
            } else if alpha > 2.0 {
                LocalVerdict::LocallyAttracting
            } else {
                LocalVerdict::LocallyRepelling
            };
            ensure(v.local_verdict == expected, || {
                format!("alpha={alpha} u={u}: {:?}, expected {expected:?}", v.local_verdict)
            })?;
            if alpha == 2.0 {
                ensure(v.local_verdict == LocalVerdict::Degenerate, || "alpha = 2 not degenerate".into())?;
            }
            cells += 1;
        }
    }
    ensure(worst < 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("{cells} cells (50x30 plus alpha = 2), max deviation {worst:.1e}, sign flips at alpha = 2"))
}

fn appendix_oracle() -> Outcome {
    let t = Instant::now();
    let mut notes = Vec::new();
    for theta in [0.1, 0.25, 0.4] {
        let r = slice_oracle_h(1.5, 0.2, theta, 200).map_err(|e| e.to_string())?;
        ensure(r.argmax_within_cell, || {
            format!("theta={theta}: argmax {:?} is {:e} from p0", r.argmax, r.argmax_distance)
        })?;
        ensure(r.max_h <= r.h_p0 + 1e-4, || format!("theta={theta}: max H {} > H(p0) {}", r.max_h, r.h_p0))?;
        ensure(r.edge_bound_holds, || format!("theta={theta}: reduced inequality fails"))?;
        notes.push(format!("theta={theta}: excess {:.1e}", r.excess));
    }
    within(t.elapsed(), Duration::from_secs(5))?;
    Ok(notes.join(", "))
}

fn row_condition_implication() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut held = 0;
    for k in 0..10_000 {
        let m = if k % 2 == 0 {
            let alpha = rng.gen_range(1.01..4.0);
            KolmogorovModel::ricker3(rng.gen_range(0.01..1.5) / (1.0 + alpha), alpha).unwrap()
        } else {
            let mut a: Mat3 = [[0.0; 3]; 3];
            for (i, row) in a.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = if i == j { rng.gen_range(0.5..2.0) } else { rng.gen_range(0.0..3.0) };
                }
            }
            let rates = [0; 3].map(|_| rng.gen_range(0.01..1.0));
            KolmogorovModel::general_exp(rates, a).unwrap()
        };
        let q = find_axial_fixed_points(&m).map_err(|e| e.to_string())?;
        let x = sv([0, 1, 2].map(|i| q[i] * rng.gen_range(0.0..=1.0)));
        if m.row_condition_m(&x, 0.0).map_err(|e| e.to_string())?.holds() {
            held += 1;
            let rho = m.eval_jacobians(&x).and_then(|j| j.spectral_radius_m()).map_err(|e| e.to_string())?;
            ensure(rho < 1.0, || format!("counterexample at {x:?}: rho(M) = {rho}"))?;
        }
    }
    Ok(format!("10^4 points, row condition held at {held}, 0 counterexamples"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("alpha0 bracket", alpha0_bracket),
        ("interior eigenvalues closed form", eigen_closed_form),
        ("modified vs classical simplex", modified_not_classical),
        ("globally attracting cycle", attracting_cycle),
        ("globally stable interior point", global_stability),
        ("repulsion on the simplex (backward orbits)", repulsion_on_simplex),
        ("Lyapunov identity", lyapunov_identity),
        ("det theta formula", det_theta_formula),
        ("slice oracle for H", appendix_oracle),
        ("row condition implies rho(M) < 1", row_condition_implication),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
