//! The five mirror-descent-family algorithms with their exact step-size
//! rules, trajectory invariant tracking, and per-iteration bound curves.
//!
//! All runs start from x₀ = argmin ψ, derive F = f(x₀) − f* from the
//! reference optimum, solve the effective-smoothness pair (G, L) from the
//! link function, and then apply the scheme-specific caps:
//!
//! * `md`   x_{t+1} = P_{x_t}(η ∇f(x_t)),             η ≤ 1/L
//! * `amd`  three-sequence acceleration,               η_t = tη/(2L), L = ℓ(4G)
//! * `omd`  y_t = P_{x_{t−1}}(η ∇f(y_{t−1})), …        η ≤ 1/(3L)
//! * `mp`   y_t = P_{x_{t−1}}(η ∇f(x_{t−1})), …        η ≤ 1/(2L)
//! * `smd`  x_{t+1} = P_{x_t}(η_{t+1} g_t), adaptive cap, noisy oracle
//!
//! Step counting: `md`/`amd`/`smd` use one gradient evaluation per iteration
//! and `omd` reuses the previous gradient; `mp` uses two. Invariant tracking
//! evaluates extra diagnostic gradients; those never feed the updates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geometry::{Geometry, Point};
use crate::noise::{NoiseModel, RNG_ALGORITHM};
use crate::objectives::{FStarEstimate, Objective};
use crate::oracle::Oracle;
use crate::smoothness::{solve_effective, EffectiveSmoothness, LinkFunction};
use crate::vecmath as vm;

/// Tolerance on trajectory gradient-bound and step-bound assertions.
pub const TRAJECTORY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Md,
    Amd,
    Omd,
    Mp,
    Smd,
}

impl Algorithm {
    pub fn id(&self) -> &'static str {
        match self {
            Algorithm::Md => "md",
            Algorithm::Amd => "amd",
            Algorithm::Omd => "omd",
            Algorithm::Mp => "mp",
            Algorithm::Smd => "smd",
        }
    }
}

/// Step-size policy: the per-algorithm default cap taken with equality, or
/// an explicit value validated against that cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaPolicy {
    Named(EtaName),
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaName {
    PaperDefault,
}

impl EtaPolicy {
    pub fn paper_default() -> Self {
        EtaPolicy::Named(EtaName::PaperDefault)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub objective: Objective,
    pub geometry: Geometry,
    /// Iteration count T >= 1.
    pub t_max: usize,
    pub eta_policy: EtaPolicy,
    /// RNG seed; only stochastic runs consume it.
    pub seed: u64,
    pub noise: Option<NoiseModel>,
    /// Link override; the objective's analytic link is used when absent.
    pub link: Option<LinkFunction>,
}

/// Run-level constants derived before iterating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConstants {
    /// Initial gap F = f(x₀) − f*.
    pub f_init: f64,
    pub g: f64,
    pub l: f64,
    pub d_sq: f64,
    pub fstar: f64,
    pub fstar_gap: f64,
    /// Fixed step for md/omd/mp; base η of the accelerated schedule.
    pub eta: Option<f64>,
    pub tau: Option<u64>,
    pub eta_base: Option<f64>,
    pub rng_algorithm: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: u64,
    /// f(x_t) − f*.
    pub f_gap: f64,
    /// Gap of the algorithm's stated average iterate (running mean for md,
    /// mean of y for omd/mp, step-weighted mean for smd; mirrors the running
    /// x-mean for amd as a diagnostic).
    pub avg_gap: f64,
    pub grad_dual_norm: f64,
    /// ‖∇f(y_t)‖_* for amd/omd/mp.
    pub aux_grad_dual_norm: Option<f64>,
    pub step: f64,
    /// ‖x_t − x_{t−1}‖ in the primal norm.
    #[serde(rename = "move")]
    pub move_norm: f64,
    /// ‖y_t − x_{t−1}‖, accelerated runs only.
    pub e_t: Option<f64>,
}

/// Worst-case slacks of the per-step assertions, accumulated over every
/// iteration (not only recorded checkpoints).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryChecks {
    /// max_t ‖∇f(x_t)‖_* − G (md/omd/mp/smd) or − 2·(G) rule, see aux.
    pub grad_bound_max_excess: Option<f64>,
    /// omd/mp: max_t ‖∇f(y_t)‖_* − G; amd: max_t max{‖∇f(y_t)‖, 2‖∇f(x_t)‖} − 2G.
    pub aux_grad_bound_max_excess: Option<f64>,
    /// md: max_t f(x_t) − f(x_{t−1}) − tol; mp: same with max{f(x_t), f(y_t)}.
    pub descent_max_violation: Option<f64>,
    /// amd: max_t e_t − G/L.
    pub e_seq_max_excess: Option<f64>,
    /// omd: max_t ‖y_t − y_{t−1}‖ − (G/L)·Σ_{s≤t} 3^{−s}.
    pub stability_max_excess: Option<f64>,
    /// min_t bound(t) − last-iterate gap (md/amd).
    pub bound_min_slack_last: Option<f64>,
    /// min_t bound(t) − average-iterate gap (md/omd/mp).
    pub bound_min_slack_avg: Option<f64>,
    /// smd: draws that broke the almost-sure bound (should stay 0).
    pub noise_violations: u64,
    /// max_t ‖∇f(x_t)‖_* including the start point.
    pub max_grad_dual_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub constants: RunConstants,
    pub records: Vec<IterationRecord>,
    /// Convergence-bound value at each recorded checkpoint (empty for smd,
    /// whose guarantee has unstated constants).
    pub bound_curve: Vec<f64>,
    pub checks: TrajectoryChecks,
    pub final_point: Point,
    /// True when G = 0 (started at the optimum) and no iterations ran.
    pub terminated_at_optimum: bool,
}

/// Checkpoints: every t ≤ 100, then the geometric grid t = ⌈1.1^k⌉, always
/// including T. Bound and invariant checks still run at every step.
pub fn checkpoints(t_max: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=t_max.min(100)).collect();
    if t_max > 100 {
        let mut v = 1.0f64;
        while (v.ceil() as usize) <= t_max {
            let t = v.ceil() as usize;
            if t > 100 {
                out.push(t);
            }
            v *= 1.1;
        }
        out.push(t_max);
        out.dedup();
    }
    out
}

/// Adaptive stochastic step size, the analysis cap taken with equality:
///   η_t = min{ min{1, G_{t−1}/σ(G_{t−1})} / (2ℓ(2G_{t−1})), D/(σ(G_{t−1})√t) },
/// with the convention that a zero noise level removes both σ branches.
pub fn smd_step_size(
    grad_dual_norm: f64,
    link: &LinkFunction,
    noise: &NoiseModel,
    d: f64,
    t: usize,
) -> Result<f64> {
    let lt = link.eval(2.0 * grad_dual_norm)?;
    let st = noise.eval_sigma(grad_dual_norm)?;
    let ratio = if st > 0.0 { (grad_dual_norm / st).min(1.0) } else { 1.0 };
    let curvature_branch = ratio / (2.0 * lt);
    let horizon_branch = if st > 0.0 { d / (st * (t as f64).sqrt()) } else { f64::INFINITY };
    Ok(curvature_branch.min(horizon_branch))
}

struct Prepared {
    x0: Point,
    f0: f64,
    fstar: FStarEstimate,
    f_init: f64,
    link: LinkFunction,
    es: EffectiveSmoothness,
    d_sq: f64,
}

fn prepare(cfg: &RunConfig, factor: f64) -> Result<Prepared> {
    if cfg.t_max < 1 {
        return Err(CoreError::Domain("iteration count must be >= 1".into()));
    }
    if cfg.objective.dim() != cfg.geometry.dim() {
        return Err(CoreError::Domain("objective and geometry dimensions differ".into()));
    }
    let link = match &cfg.link {
        Some(l) => l.clone(),
        None => cfg.objective.analytic_link(cfg.geometry.norm_pair)?,
    };
    let x0 = cfg.geometry.argmin_psi();
    let f0 = cfg.objective.value(&x0)?;
    let fstar = cfg.objective.reference_fstar(&cfg.geometry)?;
    let f_init = (f0 - fstar.value).max(0.0);
    let es = solve_effective(&link, f_init, factor)?;
    Ok(Prepared {
        x0,
        f0,
        fstar,
        f_init,
        link,
        es,
        d_sq: cfg.geometry.diameter_sq(),
    })
}

fn resolve_eta(policy: EtaPolicy, cap: f64, algo: &str) -> Result<f64> {
    match policy {
        EtaPolicy::Named(EtaName::PaperDefault) => Ok(cap),
        EtaPolicy::Explicit(eta) => {
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(CoreError::StepSize(format!("explicit eta must be positive and finite, got {eta}")));
            }
            if eta > cap * (1.0 + 1e-12) {
                return Err(CoreError::StepSize(format!(
                    "explicit eta {eta} exceeds the {algo} cap {cap}"
                )));
            }
            Ok(eta)
        }
    }
}

fn max_opt(slot: &mut Option<f64>, v: f64) {
    *slot = Some(slot.map_or(v, |m: f64| m.max(v)));
}

fn min_opt(slot: &mut Option<f64>, v: f64) {
    *slot = Some(slot.map_or(v, |m: f64| m.min(v)));
}

fn empty_record(cfg: &RunConfig, p: Prepared, constants: RunConstants) -> RunRecord {
    RunRecord {
        config: cfg.clone(),
        constants,
        records: Vec::new(),
        bound_curve: Vec::new(),
        checks: TrajectoryChecks {
            max_grad_dual_norm: Some(0.0),
            ..TrajectoryChecks::default()
        },
        final_point: p.x0,
        terminated_at_optimum: true,
    }
}

/// Execute the configured run.
pub fn run(cfg: &RunConfig) -> Result<RunRecord> {
    match cfg.algorithm {
        Algorithm::Md => run_md(cfg),
        Algorithm::Amd => run_amd(cfg),
        Algorithm::Omd => run_omd(cfg),
        Algorithm::Mp => run_mp(cfg),
        Algorithm::Smd => run_smd(cfg),
    }
}

pub fn run_md(cfg: &RunConfig) -> Result<RunRecord> {
    let p = prepare(cfg, 2.0)?;
    let eta = resolve_eta(cfg.eta_policy, 1.0 / p.es.l, "md")?;
    let constants = RunConstants {
        f_init: p.f_init,
        g: p.es.g,
        l: p.es.l,
        d_sq: p.d_sq,
        fstar: p.fstar.value,
        fstar_gap: p.fstar.gap,
        eta: Some(eta),
        tau: None,
        eta_base: None,
        rng_algorithm: None,
    };
    if p.es.g == 0.0 {
        return Ok(empty_record(cfg, p, constants));
    }

    let obj = &cfg.objective;
    let geom = &cfg.geometry;
    let marks = checkpoints(cfg.t_max);
    let mut records = Vec::with_capacity(marks.len());
    let mut bound_curve = Vec::with_capacity(marks.len());
    let mut checks = TrajectoryChecks::default();
    let mut mark_iter = marks.iter().peekable();

    let mut x = p.x0.clone();
    let mut fx = p.f0;
    // One gradient evaluation per iteration: the value at x_t doubles as the
    // next step's input.
    let mut grad = obj.gradient(&x)?;
    let mut sum_x = vec![0.0; geom.dim()];
    max_opt(&mut checks.max_grad_dual_norm, geom.norm_pair.dual_norm(&grad));

    for t in 1..=cfg.t_max {
        let x_next = geom.prox_map(&x, &vm::scale(&grad, eta))?;
        let move_norm = geom.norm_pair.norm(&vm::sub(x_next.as_slice(), x.as_slice()));
        let f_next = obj.value(&x_next)?;
        max_opt(&mut checks.descent_max_violation, f_next - fx - 1e-12 * (1.0 + fx.abs()));

        x = x_next;
        fx = f_next;
        for (s, xi) in sum_x.iter_mut().zip(x.as_slice()) {
            *s += xi;
        }
        grad = obj.gradient(&x)?;
        let gn = geom.norm_pair.dual_norm(&grad);
        max_opt(&mut checks.grad_bound_max_excess, gn - p.es.g);
        max_opt(&mut checks.max_grad_dual_norm, gn);

        let avg = Point::new(vm::scale(&sum_x, 1.0 / t as f64));
        let f_gap = fx - p.fstar.value;
        let avg_gap = obj.value(&avg)? - p.fstar.value;
        let bound = p.d_sq / (eta * t as f64);
        min_opt(&mut checks.bound_min_slack_last, bound - f_gap);
        min_opt(&mut checks.bound_min_slack_avg, bound - avg_gap);

        if mark_iter.peek() == Some(&&t) {
            mark_iter.next();
            records.push(IterationRecord {
                t: t as u64,
                f_gap,
                avg_gap,
                grad_dual_norm: gn,
                aux_grad_dual_norm: None,
                step: eta,
                move_norm,
                e_t: None,
            });
            bound_curve.push(bound);
        }
    }
    Ok(RunRecord {
        config: cfg.clone(),
        constants,
        records,
        bound_curve,
        checks,
        final_point: x,
        terminated_at_optimum: false,
    })
}

pub fn run_amd(cfg: &RunConfig) -> Result<RunRecord> {
    let p = prepare(cfg, 4.0)?;
    let (g, l4) = (p.es.g, p.es.l);
    let constants_stub = |eta_base: Option<f64>, tau: Option<u64>| RunConstants {
        f_init: p.f_init,
        g,
        l: l4,
        d_sq: p.d_sq,
        fstar: p.fstar.value,
        fstar_gap: p.fstar.gap,
        eta: eta_base,
        tau,
        eta_base,
        rng_algorithm: None,
    };
    if g == 0.0 {
        let c = constants_stub(None, None);
        return Ok(empty_record(cfg, p, c));
    }
    let d = p.d_sq.sqrt();
    let tau = ((4.0 * 2f64.sqrt() * d * l4 / g).ceil() as u64).max(4);
    let tf = tau as f64;
    let eta_cap = 1f64.min(3.0 * (tf - 1.0) / (2.0 * (tf - 3.0) * (tf - 2.0)));
    let eta_base = resolve_eta(cfg.eta_policy, eta_cap, "amd")?;
    let constants = constants_stub(Some(eta_base), Some(tau));

    let obj = &cfg.objective;
    let geom = &cfg.geometry;
    let marks = checkpoints(cfg.t_max);
    let mut records = Vec::with_capacity(marks.len());
    let mut bound_curve = Vec::with_capacity(marks.len());
    let mut checks = TrajectoryChecks::default();
    let mut mark_iter = marks.iter().peekable();

    let mut x = p.x0.clone();
    let mut z = p.x0.clone();
    let mut sum_x = vec![0.0; geom.dim()];
    max_opt(&mut checks.max_grad_dual_norm, geom.norm_pair.dual_norm(&obj.gradient(&x)?));

    for t in 1..=cfg.t_max {
        let tf = t as f64;
        let alpha = 2.0 / (tf + 1.0);
        let eta_t = tf * eta_base / (2.0 * l4);
        let y = Point::new(vm::combine(1.0 - alpha, x.as_slice(), alpha, z.as_slice()));
        let e_t = geom.norm_pair.norm(&vm::sub(y.as_slice(), x.as_slice()));
        let grad_y = obj.gradient(&y)?;
        let z_next = geom.prox_map(&z, &vm::scale(&grad_y, eta_t))?;
        let x_next = Point::new(vm::combine(1.0 - alpha, x.as_slice(), alpha, z_next.as_slice()));

        let move_norm = geom.norm_pair.norm(&vm::sub(x_next.as_slice(), x.as_slice()));
        z = z_next;
        x = x_next;

        for (s, xi) in sum_x.iter_mut().zip(x.as_slice()) {
            *s += xi;
        }
        let gy = geom.norm_pair.dual_norm(&grad_y);
        let gx = geom.norm_pair.dual_norm(&obj.gradient(&x)?);
        max_opt(&mut checks.grad_bound_max_excess, gx - g);
        max_opt(&mut checks.aux_grad_bound_max_excess, gy.max(2.0 * gx) - 2.0 * g);
        max_opt(&mut checks.e_seq_max_excess, e_t - g / l4);
        max_opt(&mut checks.max_grad_dual_norm, gx.max(gy));

        let f_gap = obj.value(&x)? - p.fstar.value;
        let avg = Point::new(vm::scale(&sum_x, 1.0 / tf));
        let avg_gap = obj.value(&avg)? - p.fstar.value;
        // Telescoping the per-step estimate gives (eta t(t+1)/(4L)) gap <= D^2;
        // the factor 4 is required (the unscaled variant is empirically
        // violated at small t).
        let bound = 4.0 * p.d_sq * l4 / (eta_base * tf * (tf + 1.0));
        min_opt(&mut checks.bound_min_slack_last, bound - f_gap);

        if mark_iter.peek() == Some(&&t) {
            mark_iter.next();
            records.push(IterationRecord {
                t: t as u64,
                f_gap,
                avg_gap,
                grad_dual_norm: gx,
                aux_grad_dual_norm: Some(gy),
                step: eta_t,
                move_norm,
                e_t: Some(e_t),
            });
            bound_curve.push(bound);
        }
    }
    Ok(RunRecord {
        config: cfg.clone(),
        constants,
        records,
        bound_curve,
        checks,
        final_point: x,
        terminated_at_optimum: false,
    })
}

pub fn run_omd(cfg: &RunConfig) -> Result<RunRecord> {
    let p = prepare(cfg, 2.0)?;
    let eta = resolve_eta(cfg.eta_policy, 1.0 / (3.0 * p.es.l), "omd")?;
    let constants = RunConstants {
        f_init: p.f_init,
        g: p.es.g,
        l: p.es.l,
        d_sq: p.d_sq,
        fstar: p.fstar.value,
        fstar_gap: p.fstar.gap,
        eta: Some(eta),
        tau: None,
        eta_base: None,
        rng_algorithm: None,
    };
    if p.es.g == 0.0 {
        return Ok(empty_record(cfg, p, constants));
    }

    let obj = &cfg.objective;
    let geom = &cfg.geometry;
    let (g, l) = (p.es.g, p.es.l);
    let marks = checkpoints(cfg.t_max);
    let mut records = Vec::with_capacity(marks.len());
    let mut bound_curve = Vec::with_capacity(marks.len());
    let mut checks = TrajectoryChecks::default();
    let mut mark_iter = marks.iter().peekable();

    let mut x = p.x0.clone();
    let mut y_prev = p.x0.clone();
    // One gradient evaluation per iteration: reuse grad(y_{t-1}).
    let mut grad_prev = obj.gradient(&y_prev)?;
    let mut sum_y = vec![0.0; geom.dim()];
    max_opt(&mut checks.max_grad_dual_norm, geom.norm_pair.dual_norm(&grad_prev));

    for t in 1..=cfg.t_max {
        let y = geom.prox_map(&x, &vm::scale(&grad_prev, eta))?;
        let grad_y = obj.gradient(&y)?;
        let x_next = geom.prox_map(&x, &vm::scale(&grad_y, eta))?;

        let stability = geom.norm_pair.norm(&vm::sub(y.as_slice(), y_prev.as_slice()));
        let geo_sum = 0.5 * (1.0 - 3f64.powi(-(t as i32)));
        max_opt(&mut checks.stability_max_excess, stability - (g / l) * geo_sum);

        let move_norm = geom.norm_pair.norm(&vm::sub(x_next.as_slice(), x.as_slice()));
        x = x_next;
        y_prev = y;
        grad_prev = grad_y;

        for (s, yi) in sum_y.iter_mut().zip(y_prev.as_slice()) {
            *s += yi;
        }
        let gy = geom.norm_pair.dual_norm(&grad_prev);
        let gx = geom.norm_pair.dual_norm(&obj.gradient(&x)?); // diagnostic only
        max_opt(&mut checks.grad_bound_max_excess, gx - g);
        max_opt(&mut checks.aux_grad_bound_max_excess, gy - g);
        max_opt(&mut checks.max_grad_dual_norm, gx.max(gy));

        let f_gap = obj.value(&x)? - p.fstar.value;
        let avg = Point::new(vm::scale(&sum_y, 1.0 / t as f64));
        let avg_gap = obj.value(&avg)? - p.fstar.value;
        let bound = p.d_sq / (eta * t as f64);
        min_opt(&mut checks.bound_min_slack_avg, bound - avg_gap);

        if mark_iter.peek() == Some(&&t) {
            mark_iter.next();
            records.push(IterationRecord {
                t: t as u64,
                f_gap,
                avg_gap,
                grad_dual_norm: gx,
                aux_grad_dual_norm: Some(gy),
                step: eta,
                move_norm,
                e_t: None,
            });
            bound_curve.push(bound);
        }
    }
    Ok(RunRecord {
        config: cfg.clone(),
        constants,
        records,
        bound_curve,
        checks,
        final_point: x,
        terminated_at_optimum: false,
    })
}

pub fn run_mp(cfg: &RunConfig) -> Result<RunRecord> {
    let p = prepare(cfg, 2.0)?;
    let eta = resolve_eta(cfg.eta_policy, 1.0 / (2.0 * p.es.l), "mp")?;
    let constants = RunConstants {
        f_init: p.f_init,
        g: p.es.g,
        l: p.es.l,
        d_sq: p.d_sq,
        fstar: p.fstar.value,
        fstar_gap: p.fstar.gap,
        eta: Some(eta),
        tau: None,
        eta_base: None,
        rng_algorithm: None,
    };
    if p.es.g == 0.0 {
        return Ok(empty_record(cfg, p, constants));
    }

    let obj = &cfg.objective;
    let geom = &cfg.geometry;
    let g = p.es.g;
    let marks = checkpoints(cfg.t_max);
    let mut records = Vec::with_capacity(marks.len());
    let mut bound_curve = Vec::with_capacity(marks.len());
    let mut checks = TrajectoryChecks::default();
    let mut mark_iter = marks.iter().peekable();

    let mut x = p.x0.clone();
    let mut fx = p.f0;
    let mut sum_y = vec![0.0; geom.dim()];
    max_opt(&mut checks.max_grad_dual_norm, geom.norm_pair.dual_norm(&obj.gradient(&x)?));

    for t in 1..=cfg.t_max {
        let grad_x = obj.gradient(&x)?;
        let y = geom.prox_map(&x, &vm::scale(&grad_x, eta))?;
        let grad_y = obj.gradient(&y)?;
        let x_next = geom.prox_map(&x, &vm::scale(&grad_y, eta))?;

        let f_y = obj.value(&y)?;
        let f_next = obj.value(&x_next)?;
        max_opt(
            &mut checks.descent_max_violation,
            f_next.max(f_y) - fx - 1e-12 * (1.0 + fx.abs()),
        );

        let move_norm = geom.norm_pair.norm(&vm::sub(x_next.as_slice(), x.as_slice()));
        x = x_next;
        fx = f_next;
        for (s, yi) in sum_y.iter_mut().zip(y.as_slice()) {
            *s += yi;
        }
        let gy = geom.norm_pair.dual_norm(&grad_y);
        let gx = geom.norm_pair.dual_norm(&obj.gradient(&x)?);
        max_opt(&mut checks.grad_bound_max_excess, gx - g);
        max_opt(&mut checks.aux_grad_bound_max_excess, gy - g);
        max_opt(&mut checks.max_grad_dual_norm, gx.max(gy));

        let f_gap = fx - p.fstar.value;
        let avg = Point::new(vm::scale(&sum_y, 1.0 / t as f64));
        let avg_gap = obj.value(&avg)? - p.fstar.value;
        let bound = p.d_sq / (eta * t as f64);
        min_opt(&mut checks.bound_min_slack_avg, bound - avg_gap);

        if mark_iter.peek() == Some(&&t) {
            mark_iter.next();
            records.push(IterationRecord {
                t: t as u64,
                f_gap,
                avg_gap,
                grad_dual_norm: gx,
                aux_grad_dual_norm: Some(gy),
                step: eta,
                move_norm,
                e_t: None,
            });
            bound_curve.push(bound);
        }
    }
    Ok(RunRecord {
        config: cfg.clone(),
        constants,
        records,
        bound_curve,
        checks,
        final_point: x,
        terminated_at_optimum: false,
    })
}

pub fn run_smd(cfg: &RunConfig) -> Result<RunRecord> {
    let noise = cfg
        .noise
        .as_ref()
        .ok_or_else(|| CoreError::Noise("smd needs a noise model".into()))?;
    let p = prepare(cfg, 2.0)?;
    let constants = RunConstants {
        f_init: p.f_init,
        g: p.es.g,
        l: p.es.l,
        d_sq: p.d_sq,
        fstar: p.fstar.value,
        fstar_gap: p.fstar.gap,
        eta: None,
        tau: None,
        eta_base: None,
        rng_algorithm: Some(RNG_ALGORITHM.to_string()),
    };
    if let EtaPolicy::Explicit(_) = cfg.eta_policy {
        return Err(CoreError::StepSize(
            "smd uses the adaptive schedule; explicit eta is not supported".into(),
        ));
    }
    if p.es.g == 0.0 {
        return Ok(empty_record(cfg, p, constants));
    }

    let obj = &cfg.objective;
    let geom = &cfg.geometry;
    let d = p.d_sq.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let marks = checkpoints(cfg.t_max);
    let mut records = Vec::with_capacity(marks.len());
    let mut checks = TrajectoryChecks::default();
    let mut mark_iter = marks.iter().peekable();

    let mut x = p.x0.clone();
    let mut grad = obj.gradient(&x)?;
    let mut weighted_sum = vec![0.0; geom.dim()];
    let mut weight_total = 0.0;
    max_opt(&mut checks.max_grad_dual_norm, geom.norm_pair.dual_norm(&grad));

    for t in 1..=cfg.t_max {
        let gn = geom.norm_pair.dual_norm(&grad);
        let st = noise.eval_sigma(gn)?;
        let eta_t = smd_step_size(gn, &p.link, noise, d, t)?;

        let eps = noise.sample(&grad, geom.norm_pair, &mut rng)?;
        if geom.norm_pair.dual_norm(&eps) > st * (1.0 + 1e-12) {
            return Err(CoreError::Noise(format!(
                "sample broke the almost-sure bound at t={t}: {} > {st}",
                geom.norm_pair.dual_norm(&eps)
            )));
        }
        let g_noisy = vm::add(&grad, &eps);
        let x_next = geom.prox_map(&x, &vm::scale(&g_noisy, eta_t))?;
        let move_norm = geom.norm_pair.norm(&vm::sub(x_next.as_slice(), x.as_slice()));
        x = x_next;

        weight_total += eta_t;
        for (s, xi) in weighted_sum.iter_mut().zip(x.as_slice()) {
            *s += eta_t * xi;
        }

        grad = obj.gradient(&x)?;
        let gn_now = geom.norm_pair.dual_norm(&grad);
        max_opt(&mut checks.max_grad_dual_norm, gn_now);

        if mark_iter.peek() == Some(&&t) {
            mark_iter.next();
            let avg = if weight_total > 0.0 {
                Point::new(vm::scale(&weighted_sum, 1.0 / weight_total))
            } else {
                p.x0.clone()
            };
            records.push(IterationRecord {
                t: t as u64,
                f_gap: obj.value(&x)? - p.fstar.value,
                avg_gap: obj.value(&avg)? - p.fstar.value,
                grad_dual_norm: gn_now,
                aux_grad_dual_norm: None,
                step: eta_t,
                move_norm,
                e_t: None,
            });
        }
    }
    Ok(RunRecord {
        config: cfg.clone(),
        constants,
        records,
        bound_curve: Vec::new(),
        checks,
        final_point: x,
        terminated_at_optimum: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseShape;

    fn base_cfg(algorithm: Algorithm, n: usize, t_max: usize) -> RunConfig {
        RunConfig {
            algorithm,
            objective: Objective::rank_one_quadratic(n),
            geometry: Geometry::entropy_simplex(n),
            t_max,
            eta_policy: EtaPolicy::paper_default(),
            seed: 0,
            noise: None,
            link: None,
        }
    }

    #[test]
    fn checkpoint_grid_shape() {
        assert_eq!(checkpoints(5), vec![1, 2, 3, 4, 5]);
        let c = checkpoints(10_000);
        assert_eq!(c[..100], (1..=100).collect::<Vec<_>>()[..]);
        assert_eq!(*c.last().unwrap(), 10_000);
        for w in c.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn md_bounds_and_descent() {
        let rec = run_md(&base_cfg(Algorithm::Md, 20, 1000)).unwrap();
        assert_eq!(rec.constants.l, 1.0);
        assert!((rec.constants.g - 0.95).abs() < 1e-12);
        assert!(rec.checks.grad_bound_max_excess.unwrap() <= TRAJECTORY_TOL);
        assert!(rec.checks.descent_max_violation.unwrap() <= 0.0);
        assert!(rec.checks.bound_min_slack_last.unwrap() >= -TRAJECTORY_TOL);
        assert!(rec.checks.bound_min_slack_avg.unwrap() >= -TRAJECTORY_TOL);
        assert_eq!(rec.records.len(), rec.bound_curve.len());
    }

    #[test]
    fn md_rejects_oversized_eta() {
        let mut cfg = base_cfg(Algorithm::Md, 5, 10);
        cfg.eta_policy = EtaPolicy::Explicit(1.5); // cap is 1/L = 1
        assert!(matches!(run_md(&cfg), Err(CoreError::StepSize(_))));
        cfg.eta_policy = EtaPolicy::Explicit(0.5);
        assert!(run_md(&cfg).is_ok());
    }

    #[test]
    fn amd_schedule_and_invariants() {
        let cfg = base_cfg(Algorithm::Amd, 10, 300);
        let rec = run_amd(&cfg).unwrap();
        let tau = rec.constants.tau.unwrap();
        assert!(tau >= 4);
        // alpha_t = 2/(t+1): eta_t = t*eta/(2L) is recorded as the step.
        let eta = rec.constants.eta_base.unwrap();
        assert!((rec.records[2].step - 3.0 * eta / (2.0 * rec.constants.l)).abs() < 1e-15);
        // e_1 = e_2 = 0 by initialization.
        assert_eq!(rec.records[0].e_t.unwrap(), 0.0);
        assert!(rec.records[1].e_t.unwrap().abs() < 1e-14);
        assert!(rec.checks.e_seq_max_excess.unwrap() <= TRAJECTORY_TOL);
        assert!(rec.checks.aux_grad_bound_max_excess.unwrap() <= TRAJECTORY_TOL);
        assert!(rec.checks.bound_min_slack_last.unwrap() >= -TRAJECTORY_TOL);
    }

    #[test]
    fn omd_invariants_and_init_identity() {
        let cfg = base_cfg(Algorithm::Omd, 5, 500);
        let rec = run_omd(&cfg).unwrap();
        assert!(rec.checks.stability_max_excess.unwrap() <= TRAJECTORY_TOL);
        assert!(rec.checks.grad_bound_max_excess.unwrap() <= TRAJECTORY_TOL);
        assert!(rec.checks.aux_grad_bound_max_excess.unwrap() <= TRAJECTORY_TOL);
        assert!(rec.checks.bound_min_slack_avg.unwrap() >= -TRAJECTORY_TOL);

        // t = 1: y_1 = P_{x0}(eta * grad f(y_0)) with y_0 = x_0.
        let geom = Geometry::entropy_simplex(5);
        let obj = Objective::rank_one_quadratic(5);
        let x0 = geom.argmin_psi();
        let eta = rec.constants.eta.unwrap();
        let y1 = geom
            .prox_map(&x0, &vm::scale(&obj.gradient(&x0).unwrap(), eta))
            .unwrap();
        let manual = geom.norm_pair.dual_norm(&obj.gradient(&y1).unwrap());
        assert!((rec.records[0].aux_grad_dual_norm.unwrap() - manual).abs() < 1e-14);
    }

    #[test]
    fn mp_descent_and_bound() {
        let cfg = base_cfg(Algorithm::Mp, 5, 500);
        let rec = run_mp(&cfg).unwrap();
        assert!(rec.checks.descent_max_violation.unwrap() <= 0.0);
        assert!(rec.checks.grad_bound_max_excess.unwrap() <= TRAJECTORY_TOL);
        assert!(rec.checks.bound_min_slack_avg.unwrap() >= -TRAJECTORY_TOL);
    }

    #[test]
    fn start_at_optimum_terminates_immediately() {
        // Constant objective: zero gradient everywhere, F = 0, G = 0.
        let mut cfg = base_cfg(Algorithm::Mp, 3, 50);
        cfg.objective = Objective::logistic_kernel(vec![0.0, 0.0, 0.0], 0.0, 1.0);
        let rec = run_mp(&cfg).unwrap();
        assert!(rec.terminated_at_optimum);
        assert!(rec.records.is_empty());
        assert_eq!(rec.constants.g, 0.0);
        assert_eq!(rec.final_point, cfg.geometry.argmin_psi());
    }

    #[test]
    fn smd_step_size_formula() {
        // G0 = 2, sigma(a) = 1 + a so sigma0 = 3, L0 = l(4), D arbitrary:
        // eta_1 = min{ min(1, 2/3)/(2 L0), D/3 }.
        let link = LinkFunction::affine(0.5, 0.25).unwrap();
        let noise = NoiseModel::new(vec![1.0, 1.0], NoiseShape::SignFlip).unwrap();
        let d = 1.7f64;
        let l0 = link.eval(4.0).unwrap();
        let expect = ((2.0f64 / 3.0) / (2.0 * l0)).min(d / 3.0);
        let got = smd_step_size(2.0, &link, &noise, d, 1).unwrap();
        assert!((got - expect).abs() < 1e-15);

        // Large t switches to the D/(sigma sqrt(t)) branch.
        let got = smd_step_size(2.0, &link, &noise, d, 10_000).unwrap();
        assert!((got - d / (3.0 * 100.0)).abs() < 1e-15);
    }

    #[test]
    fn smd_zero_noise_matches_deterministic_schedule() {
        let mut cfg = base_cfg(Algorithm::Smd, 6, 200);
        cfg.noise = Some(NoiseModel::new(vec![0.0], NoiseShape::CoordinatePair).unwrap());
        cfg.seed = 5;
        let rec = run_smd(&cfg).unwrap();
        assert_eq!(rec.checks.noise_violations, 0);

        // Manual mirror descent with eta_t = 1/(2 l(2 ||grad||)).
        let geom = Geometry::entropy_simplex(6);
        let obj = Objective::rank_one_quadratic(6);
        let link = obj.analytic_link(geom.norm_pair).unwrap();
        let mut x = geom.argmin_psi();
        for _ in 0..200 {
            let grad = obj.gradient(&x).unwrap();
            let gn = geom.norm_pair.dual_norm(&grad);
            let eta = 1.0 / (2.0 * link.eval(2.0 * gn).unwrap());
            x = geom.prox_map(&x, &vm::scale(&grad, eta)).unwrap();
        }
        for (a, b) in rec.final_point.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn smd_is_bit_deterministic() {
        let mut cfg = base_cfg(Algorithm::Smd, 10, 500);
        cfg.noise = Some(NoiseModel::new(vec![0.5, 0.5], NoiseShape::CoordinatePair).unwrap());
        cfg.seed = 77;
        let a = run_smd(&cfg).unwrap();
        let b = run_smd(&cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let mut cfg2 = cfg.clone();
        cfg2.seed = 78;
        let c = run_smd(&cfg2).unwrap();
        assert_ne!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&c).unwrap()
        );
    }

    #[test]
    fn smd_requires_noise_model() {
        let cfg = base_cfg(Algorithm::Smd, 4, 10);
        assert!(matches!(run_smd(&cfg), Err(CoreError::Noise(_))));
    }

    #[test]
    fn explicit_eta_caps_per_algorithm() {
        // omd cap 1/(3L), mp cap 1/(2L) with L = 1 here; smd admits no
        // explicit step at all.
        let mut omd = base_cfg(Algorithm::Omd, 5, 10);
        omd.eta_policy = EtaPolicy::Explicit(0.4);
        assert!(matches!(run_omd(&omd), Err(CoreError::StepSize(_))));
        omd.eta_policy = EtaPolicy::Explicit(1.0 / 3.0);
        assert!(run_omd(&omd).is_ok());

        let mut mp = base_cfg(Algorithm::Mp, 5, 10);
        mp.eta_policy = EtaPolicy::Explicit(0.6);
        assert!(matches!(run_mp(&mp), Err(CoreError::StepSize(_))));
        mp.eta_policy = EtaPolicy::Explicit(0.5);
        assert!(run_mp(&mp).is_ok());

        let mut smd = base_cfg(Algorithm::Smd, 5, 10);
        smd.noise = Some(NoiseModel::new(vec![0.1], NoiseShape::SignFlip).unwrap());
        smd.eta_policy = EtaPolicy::Explicit(0.1);
        assert!(matches!(run_smd(&smd), Err(CoreError::StepSize(_))));
    }

    #[test]
    fn smd_on_ball_geometry() {
        let w = vec![0.6, -0.8];
        let cfg = RunConfig {
            algorithm: Algorithm::Smd,
            objective: Objective::logistic_kernel(w, 0.0, 1.0),
            geometry: Geometry::euclidean_ball(1.5, vec![0.5, 0.5]),
            t_max: 2000,
            eta_policy: EtaPolicy::paper_default(),
            seed: 3,
            noise: Some(NoiseModel::new(vec![0.2, 0.3], NoiseShape::CoordinatePair).unwrap()),
            link: None,
        };
        let rec = run_smd(&cfg).unwrap();
        assert_eq!(rec.checks.noise_violations, 0);
        assert!(!rec.terminated_at_optimum);
        // Weighted-average gap should have come down from the initial gap.
        let first = rec.records.first().unwrap().avg_gap;
        let last = rec.records.last().unwrap().avg_gap;
        assert!(last < 0.2 * first, "avg gap {first} -> {last}");
        assert!(rec.records.iter().all(|r| r.f_gap.is_finite() && r.f_gap >= -1e-12));
    }
}
