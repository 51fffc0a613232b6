//! Evaluation of the spec-selectable run checks, including the brute-force
//! prox oracle that cross-validates the closed-form prox-mappings.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{Domain, Geometry, Point, PsiKind};
use crate::optimizers::{RunConfig, RunRecord, TRAJECTORY_TOL};
use crate::smoothness::{check_local_smooth, check_self_bounding, random_domain_point};
use crate::vecmath as vm;

use super::{config::check_applicable, CheckKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: CheckKind,
    pub passed: bool,
    pub detail: String,
}

/// Evaluate one check against a finished run. Returns None when the check
/// does not apply to this run's algorithm or setup.
pub fn evaluate_check(check: CheckKind, cfg: &RunConfig, rec: &RunRecord) -> Result<Option<CheckOutcome>> {
    if !check_applicable(check, cfg) {
        return Ok(None);
    }
    let ok = |passed: bool, detail: String| Ok(Some(CheckOutcome { check, passed, detail }));
    match check {
        CheckKind::GradBound => {
            let x_excess = rec.checks.grad_bound_max_excess.unwrap_or(f64::NEG_INFINITY);
            let aux_excess = rec.checks.aux_grad_bound_max_excess.unwrap_or(f64::NEG_INFINITY);
            let worst = x_excess.max(aux_excess);
            ok(worst <= TRAJECTORY_TOL, format!("max gradient-bound excess {worst:.3e}"))
        }
        CheckKind::Descent => {
            let worst = rec.checks.descent_max_violation.unwrap_or(f64::NEG_INFINITY);
            ok(worst <= 0.0, format!("max descent violation {worst:.3e}"))
        }
        CheckKind::ESeq => {
            let worst = rec.checks.e_seq_max_excess.unwrap_or(f64::NEG_INFINITY);
            ok(worst <= TRAJECTORY_TOL, format!("max e_t excess over G/L {worst:.3e}"))
        }
        CheckKind::TheoremBound => {
            let tol = rec.constants.fstar_gap + TRAJECTORY_TOL;
            let last = rec.checks.bound_min_slack_last.unwrap_or(f64::INFINITY);
            let avg = rec.checks.bound_min_slack_avg.unwrap_or(f64::INFINITY);
            let worst = last.min(avg);
            ok(worst >= -tol, format!("min bound slack {worst:.3e} (tolerance {tol:.3e})"))
        }
        CheckKind::SelfBounding => {
            let link = match &cfg.link {
                Some(l) => l.clone(),
                None => cfg.objective.analytic_link(cfg.geometry.norm_pair)?,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
            let n = cfg.geometry.dim();
            let points: Vec<Point> = (0..1000)
                .map(|_| Point::new(random_domain_point(&cfg.geometry.domain, &mut rng, n)))
                .collect();
            // Certified lower bound on f over the domain.
            let fstar_lower = rec.constants.fstar - rec.constants.fstar_gap;
            let report =
                check_self_bounding(&cfg.objective, &cfg.geometry, &link, &points, fstar_lower)?;
            ok(
                report.violations.is_empty(),
                format!("{} violations over {} points", report.violations.len(), points.len()),
            )
        }
        CheckKind::ProxOracle => {
            let dev = prox_oracle_deviation(&cfg.geometry, 200, 0x9a0c)?;
            ok(dev <= 1e-8, format!("max prox deviation {dev:.3e}"))
        }
        CheckKind::LocalSmooth => {
            let link = match &cfg.link {
                Some(l) => l.clone(),
                None => cfg.objective.analytic_link(cfg.geometry.norm_pair)?,
            };
            let x0 = cfg.geometry.argmin_psi();
            let report = check_local_smooth(
                &cfg.objective,
                &cfg.geometry,
                &link,
                &x0,
                rec.constants.g,
                1000,
                0x10ca1,
            )?;
            let total = report.lipschitz_violations + report.quadratic_violations;
            ok(
                total == 0,
                format!(
                    "{} lipschitz + {} quadratic violations over {} pairs (coverage {:.2})",
                    report.lipschitz_violations,
                    report.quadratic_violations,
                    report.trials,
                    report.coverage
                ),
            )
        }
    }
}

/// Max primal-norm deviation between the closed-form prox and a brute-force
/// numeric minimization of ⟨g, x⟩ + B(x, y) over `pairs` random inputs.
pub fn prox_oracle_deviation(geom: &Geometry, pairs: usize, seed: u64) -> Result<f64> {
    let n = geom.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let y = Point::new(random_domain_point(&geom.domain, &mut rng, n));
        if let PsiKind::NegEntropy = geom.psi_kind {
            if y.as_slice().iter().any(|&v| v <= 1e-12) {
                continue; // keep the reference point safely interior
            }
        }
        let g: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        let closed = geom.prox_map(&y, &g)?;
        let numeric = numeric_prox(geom, &y, &g);
        worst = worst.max(geom.norm_pair.norm(&vm::sub(closed.as_slice(), &numeric)));
    }
    Ok(worst)
}

/// Brute-force prox: minimizes the prox objective with generic iterative
/// schemes that never touch the closed forms. Simplex domains use pairwise
/// coordinate exchanges with bisection line search; balls use projected
/// gradient descent on the strongly convex model.
pub fn numeric_prox(geom: &Geometry, y: &Point, g: &[f64]) -> Vec<f64> {
    match (&geom.domain, geom.psi_kind) {
        (Domain::Simplex { .. }, PsiKind::NegEntropy) => {
            let n = y.dim();
            let mut x = y.coords.clone();
            // phi(x) = <g, x> + sum x_k ln(x_k / y_k); transfer mass between
            // coordinate pairs, each 1-d problem solved by bisection on the
            // increasing derivative g_i - g_j + ln((x_i+t)/y_i) - ln((x_j-t)/y_j).
            for _ in 0..400 {
                let mut largest_move = 0.0f64;
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        let floor = 1e-15;
                        let (mut lo, mut hi) = (-(x[i] - floor), x[j] - floor);
                        if hi <= lo {
                            continue;
                        }
                        let deriv = |t: f64| {
                            g[i] - g[j] + ((x[i] + t) / y.coords[i]).ln()
                                - ((x[j] - t) / y.coords[j]).ln()
                        };
                        if deriv(lo) >= 0.0 {
                            continue; // minimum at or below the left edge
                        }
                        if deriv(hi) <= 0.0 {
                            lo = hi;
                        } else {
                            for _ in 0..90 {
                                let mid = 0.5 * (lo + hi);
                                if deriv(mid) < 0.0 {
                                    lo = mid;
                                } else {
                                    hi = mid;
                                }
                            }
                        }
                        let t = 0.5 * (lo + hi);
                        if t.abs() > 0.0 {
                            x[i] += t;
                            x[j] -= t;
                            largest_move = largest_move.max(t.abs());
                        }
                    }
                }
                if largest_move < 1e-13 {
                    break;
                }
            }
            x
        }
        (Domain::Ball { radius, center, .. }, PsiKind::HalfSqEuclidean) => {
            // phi(x) = <g, x> + 0.5 ||x - y||^2, projected gradient with the
            // oracle's own projection.
            let project = |v: Vec<f64>| -> Vec<f64> {
                let d = vm::sub(&v, center);
                let norm = vm::l2_norm(&d);
                if norm <= *radius {
                    v
                } else if *radius == 0.0 {
                    center.clone()
                } else {
                    center.iter().zip(&d).map(|(c, di)| c + radius / norm * di).collect()
                }
            };
            let mut x = y.coords.clone();
            for _ in 0..200 {
                let grad = vm::add(g, &vm::sub(&x, y.as_slice()));
                x = project(vm::combine(1.0, &x, -0.5, &grad));
            }
            x
        }
        _ => unreachable!("geometry constructors enforce the pairing rule"),
    }
}
