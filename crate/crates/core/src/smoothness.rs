//! Link functions, the effective-smoothness (G, L) solver, and numeric
//! verifiers for the self-bounding and local-smoothness properties.
//!
//! A link function ℓ bounds the dual norm of Hessian images by a function of
//! the gradient's dual norm: ‖∇²f(x)h‖_* ≤ ℓ(‖∇f(x)‖_*)·‖h‖. Given the
//! initial gap F = f(x₀) − f*, the effective constants are
//!
//!   G = sup { α ≥ 0 | α² ≤ 2·ℓ(2α)·F },   L = ℓ(2G)
//!
//! (accelerated runs use L = ℓ(4G) instead). G is finite whenever ℓ is
//! sub-quadratic.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geometry::{Domain, Geometry, Point};
use crate::oracle::Oracle;
use crate::vecmath as vm;

/// Positivity offset for the power family, which would otherwise vanish at 0.
pub const POWER_EPS: f64 = 1e-12;

/// Absolute tolerance of the G root-finder.
pub const SOLVE_G_TOL: f64 = 1e-10;

/// A non-decreasing positive link function ℓ: R₊ → R₊₊.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum LinkFunction {
    /// ℓ(α) = L.
    Constant { l: f64 },
    /// ℓ(α) = L0 + L1·α.
    Affine { l0: f64, l1: f64 },
    /// ℓ(α) = c·(α/2)^β + 1e−12, β ∈ [0, 2). The offset keeps the range
    /// strictly positive without measurably changing results.
    Power { c: f64, beta: f64 },
    /// Piecewise-linear interpolation of sorted (α, ℓ(α)) breakpoints, flat
    /// to the left, extended with `terminal_slope` to the right.
    /// Sub-quadraticity is asserted, not proven.
    Tabulated {
        breakpoints: Vec<(f64, f64)>,
        terminal_slope: f64,
    },
}

impl LinkFunction {
    pub fn constant(l: f64) -> Result<Self> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(CoreError::Domain("constant link needs L > 0".into()));
        }
        Ok(LinkFunction::Constant { l })
    }

    pub fn affine(l0: f64, l1: f64) -> Result<Self> {
        if !(l0 > 0.0) || !l0.is_finite() || !(l1 >= 0.0) || !l1.is_finite() {
            return Err(CoreError::Domain("affine link needs L0 > 0, L1 >= 0".into()));
        }
        Ok(LinkFunction::Affine { l0, l1 })
    }

    pub fn power(c: f64, beta: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() || !(0.0..2.0).contains(&beta) {
            return Err(CoreError::Domain("power link needs c > 0, beta in [0, 2)".into()));
        }
        Ok(LinkFunction::Power { c, beta })
    }

    pub fn tabulated(breakpoints: Vec<(f64, f64)>, terminal_slope: f64) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(CoreError::Domain("tabulated link needs breakpoints".into()));
        }
        if !(terminal_slope >= 0.0) || !terminal_slope.is_finite() {
            return Err(CoreError::Domain("terminal slope must be finite and >= 0".into()));
        }
        for w in breakpoints.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(CoreError::Domain("breakpoint alphas must be strictly increasing".into()));
            }
            if w[1].1 < w[0].1 {
                return Err(CoreError::Domain("tabulated link must be non-decreasing".into()));
            }
        }
        if breakpoints.iter().any(|&(a, v)| a < 0.0 || !(v > 0.0) || !v.is_finite()) {
            return Err(CoreError::Domain("breakpoints need alpha >= 0 and values > 0".into()));
        }
        Ok(LinkFunction::Tabulated { breakpoints, terminal_slope })
    }

    /// Evaluate ℓ(alpha).
    pub fn eval(&self, alpha: f64) -> Result<f64> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(CoreError::Domain(format!("link argument must be finite and >= 0, got {alpha}")));
        }
        Ok(match self {
            LinkFunction::Constant { l } => *l,
            LinkFunction::Affine { l0, l1 } => l0 + l1 * alpha,
            LinkFunction::Power { c, beta } => c * (alpha / 2.0).powf(*beta) + POWER_EPS,
            LinkFunction::Tabulated { breakpoints, terminal_slope } => {
                let first = breakpoints[0];
                let last = breakpoints[breakpoints.len() - 1];
                if alpha <= first.0 {
                    first.1
                } else if alpha >= last.0 {
                    last.1 + terminal_slope * (alpha - last.0)
                } else {
                    let idx = breakpoints.partition_point(|&(a, _)| a <= alpha);
                    let (a0, v0) = breakpoints[idx - 1];
                    let (a1, v1) = breakpoints[idx];
                    v0 + (v1 - v0) * (alpha - a0) / (a1 - a0)
                }
            }
        })
    }
}

/// Effective smoothness constants derived from the initial gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveSmoothness {
    /// Bound on the gradient dual norm along the trajectory.
    pub g: f64,
    /// Local Lipschitz surrogate L = ℓ(factor·G).
    pub l: f64,
    /// 2 for mirror descent and its optimistic/prox variants, 4 for the
    /// accelerated scheme.
    pub factor: f64,
    /// Initial suboptimality gap F = f(x₀) − f*.
    pub f: f64,
}

/// Solve for G = sup { α | α² ≤ 2ℓ(2α)F } and L = ℓ(factor·G).
///
/// Constant, affine and power families use closed forms (the power family
/// gets a short Newton polish to absorb its positivity offset); tabulated
/// links go through the bracketing bisection in [`solve_g_bisection`].
pub fn solve_effective(link: &LinkFunction, f_init: f64, factor: f64) -> Result<EffectiveSmoothness> {
    if !f_init.is_finite() || f_init < 0.0 {
        return Err(CoreError::Domain(format!("initial gap must be finite and >= 0, got {f_init}")));
    }
    let g = if f_init == 0.0 {
        0.0
    } else {
        match link {
            LinkFunction::Constant { l } => (2.0 * l * f_init).sqrt(),
            LinkFunction::Affine { l0, l1 } => {
                // alpha^2 = 2F(L0 + 2 L1 alpha), positive root.
                2.0 * f_init * l1 + (4.0 * f_init * f_init * l1 * l1 + 2.0 * f_init * l0).sqrt()
            }
            LinkFunction::Power { c, beta } => {
                if *beta == 0.0 {
                    (2.0 * f_init * (c + POWER_EPS)).sqrt()
                } else {
                    // ell(2a) = c a^beta + eps; start at the offset-free root
                    // and polish with Newton (monotone from the left).
                    let mut a = (2.0 * f_init * c).powf(1.0 / (2.0 - beta));
                    for _ in 0..8 {
                        let h = a * a - 2.0 * f_init * (c * a.powf(*beta) + POWER_EPS);
                        let dh = 2.0 * a - 2.0 * f_init * c * beta * a.powf(beta - 1.0);
                        if dh <= 0.0 {
                            break;
                        }
                        let step = h / dh;
                        a -= step;
                        if step.abs() < 1e-16 * a.max(1.0) {
                            break;
                        }
                    }
                    a
                }
            }
            LinkFunction::Tabulated { .. } => solve_g_bisection(link, f_init)?,
        }
    };
    let l = link.eval(factor * g)?;
    Ok(EffectiveSmoothness { g, l, factor, f: f_init })
}

/// Bracketing bisection on h(α) = α² − 2F·ℓ(2α), usable with any link as an
/// independent cross-check of the closed forms.
///
/// Doubles from 1e−12 until h stays positive at 8 consecutive probes (flat
/// tabulated segments can produce isolated positives), then bisects the last
/// sign change. Errors after 10³ doublings, which signals a
/// non-sub-quadratic link.
pub fn solve_g_bisection(link: &LinkFunction, f_init: f64) -> Result<f64> {
    if !f_init.is_finite() || f_init < 0.0 {
        return Err(CoreError::Domain(format!("initial gap must be finite and >= 0, got {f_init}")));
    }
    if f_init == 0.0 {
        return Ok(0.0);
    }
    let h = |a: f64| -> Result<f64> { Ok(a * a - 2.0 * f_init * link.eval(2.0 * a)?) };
    let mut lo = 0.0f64; // h(0) = -2F ell(0) < 0
    let mut alpha = 1e-12f64;
    let mut run_start = None;
    let mut consecutive = 0usize;
    let mut found = false;
    for _ in 0..1000 {
        if h(alpha)? > 0.0 {
            if consecutive == 0 {
                run_start = Some(alpha);
            }
            consecutive += 1;
            if consecutive >= 8 {
                found = true;
                break;
            }
        } else {
            consecutive = 0;
            run_start = None;
            lo = alpha;
        }
        alpha *= 2.0;
        if !alpha.is_finite() {
            break;
        }
    }
    if !found {
        return Err(CoreError::Convergence(
            "G bracketing exceeded 1000 doublings; link does not look sub-quadratic".into(),
        ));
    }
    let mut hi = run_start.unwrap();
    for _ in 0..500 {
        if hi - lo <= 1e-13 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if h(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Per-point margins of the self-bounding inequality
/// ‖∇f(x)‖_*² ≤ 2ℓ(2‖∇f(x)‖_*)(f(x) − f*).
#[derive(Debug, Clone)]
pub struct SelfBoundingReport {
    /// 2ℓ(2‖∇f‖)(f − f*) − ‖∇f‖² per checked point.
    pub margins: Vec<f64>,
    /// Indices whose margin falls below −1e−9·(1 + |f(x)|).
    pub violations: Vec<usize>,
}

/// Evaluate the self-bounding margin at each point. `fstar` must be a valid
/// lower bound on f; violations are reported as data, not errors.
pub fn check_self_bounding(
    obj: &dyn Oracle,
    geom: &Geometry,
    link: &LinkFunction,
    points: &[Point],
    fstar: f64,
) -> Result<SelfBoundingReport> {
    let mut margins = Vec::with_capacity(points.len());
    let mut violations = Vec::new();
    for (i, x) in points.iter().enumerate() {
        if !geom.domain.contains(x.as_slice()) {
            return Err(CoreError::Domain(format!("self-bounding check: point {i} outside domain")));
        }
        let fx = obj.value(x)?;
        let gn = geom.norm_pair.dual_norm(&obj.gradient(x)?);
        let margin = 2.0 * link.eval(2.0 * gn)? * (fx - fstar) - gn * gn;
        if margin < -1e-9 * (1.0 + fx.abs()) {
            violations.push(i);
        }
        margins.push(margin);
    }
    Ok(SelfBoundingReport { margins, violations })
}

/// Outcome of sampling the local-smoothness properties around a point.
#[derive(Debug, Clone, Copy)]
pub struct LocalSmoothReport {
    pub trials: usize,
    pub lipschitz_violations: usize,
    pub quadratic_violations: usize,
    /// Mean of ‖x_i − x‖ / (G/L) over the sampled pair members; reports how
    /// much of the ball the domain intersection actually covered.
    pub coverage: f64,
}

/// Sample pairs inside B(x, G/L) ∩ domain and verify gradient Lipschitzness
/// ‖∇f(x₁)−∇f(x₂)‖_* ≤ L‖x₁−x₂‖ and the quadratic upper bound, both to
/// relative tolerance 1e−8. Requires ‖∇f(x)‖_* ≤ G.
pub fn check_local_smooth(
    obj: &dyn Oracle,
    geom: &Geometry,
    link: &LinkFunction,
    x: &Point,
    g_bound: f64,
    trials: usize,
    seed: u64,
) -> Result<LocalSmoothReport> {
    if !geom.domain.contains(x.as_slice()) {
        return Err(CoreError::Domain("local-smooth check: x outside domain".into()));
    }
    let l = link.eval(2.0 * g_bound)?;
    let radius = if l > 0.0 { g_bound / l } else { 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = geom.dim();
    let mut lipschitz_violations = 0;
    let mut quadratic_violations = 0;
    let mut coverage_sum = 0.0;

    let mut draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let p = random_domain_point(&geom.domain, rng, n);
        let dir = vm::sub(&p, x.as_slice());
        let dist = geom.norm_pair.norm(&dir);
        let t = if dist <= radius || dist == 0.0 {
            rng.gen::<f64>()
        } else {
            rng.gen::<f64>() * radius / dist
        };
        coverage_sum += if radius > 0.0 { t * dist / radius } else { 1.0 };
        vm::combine(1.0, x.as_slice(), t, &dir)
    };

    for _ in 0..trials {
        let u1 = Point::new(draw(&mut rng));
        let u2 = Point::new(draw(&mut rng));
        let d = geom.norm_pair.norm(&vm::sub(u1.as_slice(), u2.as_slice()));
        let g1 = obj.gradient(&u1)?;
        let g2 = obj.gradient(&u2)?;
        let lhs = geom.norm_pair.dual_norm(&vm::sub(&g1, &g2));
        if lhs > l * d * (1.0 + 1e-8) + 1e-12 {
            lipschitz_violations += 1;
        }
        let quad_rhs = obj.value(&u2)? + vm::dot(&g2, &vm::sub(u1.as_slice(), u2.as_slice()))
            + 0.5 * l * d * d;
        let f1 = obj.value(&u1)?;
        if f1 > quad_rhs + 1e-8 * (1.0 + quad_rhs.abs()) {
            quadratic_violations += 1;
        }
    }
    Ok(LocalSmoothReport {
        trials,
        lipschitz_violations,
        quadratic_violations,
        coverage: if trials > 0 { coverage_sum / (2 * trials) as f64 } else { 0.0 },
    })
}

/// Uniform draw from a domain (flat Dirichlet on the simplex, uniform radius
/// fraction in a ball; interior-biased, which is all the checkers need).
pub fn random_domain_point(domain: &Domain, rng: &mut impl Rng, n: usize) -> Vec<f64> {
    match domain {
        Domain::Simplex { .. } => {
            let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|x| x / s).collect()
        }
        Domain::Ball { radius, center, .. } => {
            let dir: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let norm = vm::l2_norm(&dir).max(1e-12);
            let r = radius * rng.gen::<f64>();
            center.iter().zip(&dir).map(|(c, d)| c + r * d / norm).collect()
        }
    }
}
