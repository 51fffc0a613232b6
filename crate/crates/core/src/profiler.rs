//! Empirical link-function estimation: sample (gradient dual norm, induced
//! Hessian norm) pairs over the simplex, fit affine links under both norm
//! pairs, and fit the dimension-ratio exponent g(n) = a·n^{−b} of the slope
//! ratio across dimensions.
//!
//! Induced norms: under the Euclidean pair the spectral norm comes from power
//! iteration on the Hessian-apply oracle (the shipped objectives are convex,
//! so the Hessians are symmetric PSD). Under the ℓ1/ℓ∞ pair the supremum of
//! ‖Hu‖∞ over the simplex is attained at a vertex, so it reduces to n
//! Hessian-apply calls instead of a linear program.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geometry::{Domain, Geometry, NormPair, Point};
use crate::objectives::Objective;
use crate::oracle::Oracle;
use crate::smoothness::random_domain_point;
use crate::vecmath as vm;

/// One profiled point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSample {
    pub grad_norm: f64,
    pub hess_norm: f64,
    pub x: Point,
}

/// Least-squares affine link fit hess_norm ≈ L0 + L1·grad_norm with the slope
/// clamped at zero (intercept refit) and the RMS residual of the final line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineFit {
    pub l0: f64,
    pub l1: f64,
    pub residual: f64,
}

/// Power-law fit of the slope ratio across dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioFit {
    pub a: f64,
    pub b: f64,
    pub dims: Vec<usize>,
    pub ratios: Vec<f64>,
    /// RMS residual of the log-log regression.
    pub residual: f64,
}

/// Induced Hessian norm at x: spectral norm (euclidean) or
/// sup_{u in simplex} ‖Hu‖∞ = max over vertices (one_infinity).
pub fn induced_hess_norm(obj: &dyn Oracle, x: &Point, pair: NormPair) -> Result<f64> {
    match pair {
        NormPair::Euclidean => {
            let n = obj.dim();
            // Deterministic start with a ramp so no shipped Hessian is orthogonal to it.
            let v0: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * (i + 1) as f64).collect();
            power_iteration(obj, x, &v0)
        }
        NormPair::OneInfinity => {
            let n = obj.dim();
            let mut sup = 0.0f64;
            let mut e = vec![0.0; n];
            for j in 0..n {
                e[j] = 1.0;
                sup = sup.max(vm::linf_norm(&obj.hessian_apply(x, &e)?));
                e[j] = 0.0;
            }
            Ok(sup)
        }
    }
}

/// Power iteration on the Hessian-apply oracle from an explicit start vector,
/// capped at 10³ iterations.
///
/// Stops when successive norm estimates agree to 1e−12 relative, or when the
/// Ritz residual ‖Hv − μv‖ certifies the estimate: some eigenvalue lies
/// within the residual of the Rayleigh quotient μ, which covers clustered
/// top eigenvalues where the change criterion stalls without the value being
/// wrong. Errors only if neither criterion is met at the cap.
pub fn power_iteration(obj: &dyn Oracle, x: &Point, v0: &[f64]) -> Result<f64> {
    let norm0 = vm::l2_norm(v0);
    if norm0 == 0.0 {
        return Err(CoreError::Domain("power iteration start vector must be nonzero".into()));
    }
    let mut v = vm::scale(v0, 1.0 / norm0);
    let mut lam_prev = f64::NAN;
    let mut last = (0.0, f64::INFINITY); // (estimate, residual)
    for _ in 0..1000 {
        let w = obj.hessian_apply(x, &v)?;
        let lam = vm::l2_norm(&w);
        if lam == 0.0 {
            return Ok(0.0);
        }
        let mu = vm::dot(&v, &w);
        let residual = vm::l2_norm(&vm::combine(1.0, &w, -mu, &v));
        last = (lam, residual);
        if residual <= 1e-11 * lam.max(1.0)
            || (!lam_prev.is_nan() && (lam - lam_prev).abs() <= 1e-12 * lam.max(1.0))
        {
            return Ok(lam);
        }
        lam_prev = lam;
        v = vm::scale(&w, 1.0 / lam);
    }
    // At the cap: accept while the certified eigenvalue error stays far
    // below any tolerance the fits use.
    let (lam, residual) = last;
    if residual <= 1e-3 * lam.max(1.0) {
        return Ok(lam);
    }
    Err(CoreError::Convergence(format!(
        "power iteration failed to settle within 1000 iterations (residual {residual:.3e})"
    )))
}

/// Draw `n_samples` points uniformly from the simplex (flat Dirichlet) and
/// profile (‖∇f‖_*, induced Hessian norm) under the geometry's norm pair.
pub fn sample_links(
    obj: &dyn Oracle,
    geom: &Geometry,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<LinkSample>> {
    if !matches!(geom.domain, Domain::Simplex { .. }) {
        return Err(CoreError::Domain("link sampling is defined over the simplex".into()));
    }
    let n = geom.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let x = Point::new(random_domain_point(&geom.domain, &mut rng, n));
        let grad_norm = geom.norm_pair.dual_norm(&obj.gradient(&x)?);
        let hess_norm = induced_hess_norm(obj, &x, geom.norm_pair)?;
        out.push(LinkSample { grad_norm, hess_norm, x });
    }
    Ok(out)
}

/// Ordinary least squares of hess_norm on grad_norm. Constant data collapses
/// to a constant link; a negative slope is clamped to zero with the intercept
/// refit.
pub fn fit_affine(samples: &[LinkSample]) -> Result<AffineFit> {
    if samples.len() < 2 {
        return Err(CoreError::Degenerate("affine fit needs at least 2 samples".into()));
    }
    let n = samples.len() as f64;
    let mean_g = samples.iter().map(|s| s.grad_norm).sum::<f64>() / n;
    let mean_h = samples.iter().map(|s| s.hess_norm).sum::<f64>() / n;
    let var_g = samples.iter().map(|s| (s.grad_norm - mean_g).powi(2)).sum::<f64>() / n;
    let var_h = samples.iter().map(|s| (s.hess_norm - mean_h).powi(2)).sum::<f64>() / n;

    let (l0, l1) = if var_g <= 1e-24 * (1.0 + mean_g * mean_g) {
        if var_h <= 1e-18 * (1.0 + mean_h * mean_h) {
            (mean_h, 0.0)
        } else {
            return Err(CoreError::Degenerate(
                "all gradient norms coincide but Hessian norms vary; no affine fit exists".into(),
            ));
        }
    } else {
        let cov = samples
            .iter()
            .map(|s| (s.grad_norm - mean_g) * (s.hess_norm - mean_h))
            .sum::<f64>()
            / n;
        let slope = cov / var_g;
        if slope < 0.0 {
            (mean_h, 0.0)
        } else {
            (mean_h - slope * mean_g, slope)
        }
    };
    let residual = (samples
        .iter()
        .map(|s| (s.hess_norm - l0 - l1 * s.grad_norm).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(AffineFit { l0, l1, residual })
}

/// Least-squares power law y = a·x^{−b} in log-log space.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(CoreError::Degenerate("power-law fit needs >= 2 paired values".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(CoreError::Degenerate("power-law fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let var = lx.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n;
    if var == 0.0 {
        return Err(CoreError::Degenerate("power-law fit needs distinct x values".into()));
    }
    let cov = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / n;
    let slope = cov / var;
    let intercept = my - slope * mx;
    let residual = (lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok((intercept.exp(), -slope, residual))
}

/// Which norm pairs a profiling pass measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSelection {
    Euclidean,
    OneInfinity,
    Both,
}

/// Affine fits per dimension; the ratio is present only when both pairs were
/// profiled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimProfile {
    pub n: usize,
    pub euclidean: Option<AffineFit>,
    pub one_infinity: Option<AffineFit>,
    pub ratio: Option<f64>,
}

/// Profile each dimension with `n_samples` uniform simplex points; both
/// pairs are measured at the same points. Per-dimension RNG streams derive
/// as seed + n.
pub fn profile_dims(
    make_objective: impl Fn(usize) -> Objective,
    dims: &[usize],
    n_samples: usize,
    seed: u64,
    pairs: PairSelection,
) -> Result<Vec<DimProfile>> {
    if dims.is_empty() {
        return Err(CoreError::Degenerate("need at least one dimension".into()));
    }
    let mut out = Vec::with_capacity(dims.len());
    for &n in dims {
        if n < 2 {
            return Err(CoreError::Degenerate("dimensions must be >= 2".into()));
        }
        let obj = make_objective(n);
        let geom_inf = Geometry::entropy_simplex(n);
        let dim_seed = seed.wrapping_add(n as u64);
        let samples_inf = sample_links(&obj, &geom_inf, n_samples, dim_seed)?;
        let fit_inf = if pairs != PairSelection::Euclidean {
            Some(fit_affine(&samples_inf)?)
        } else {
            None
        };
        let fit_two = if pairs != PairSelection::OneInfinity {
            // Re-measure the same points under the Euclidean pair.
            let samples_two: Vec<LinkSample> = samples_inf
                .iter()
                .map(|s| -> Result<LinkSample> {
                    Ok(LinkSample {
                        grad_norm: vm::l2_norm(&obj.gradient(&s.x)?),
                        hess_norm: induced_hess_norm(&obj, &s.x, NormPair::Euclidean)?,
                        x: s.x.clone(),
                    })
                })
                .collect::<Result<_>>()?;
            Some(fit_affine(&samples_two)?)
        } else {
            None
        };
        // Slope ratio; constant-link objectives (zero slopes) compare
        // intercepts instead.
        let ratio = match (&fit_inf, &fit_two) {
            (Some(fi), Some(ft)) => Some(if fi.l1 > 1e-12 && ft.l1 > 1e-12 {
                fi.l1 / ft.l1
            } else {
                fi.l0 / ft.l0
            }),
            _ => None,
        };
        out.push(DimProfile { n, euclidean: fit_two, one_infinity: fit_inf, ratio });
    }
    Ok(out)
}

/// Fit the dimension-ratio exponent g(n) = a·n^{−b} of the slope ratio
/// L̃1/L̂1 across dimensions.
pub fn fit_ratio_exponent(
    make_objective: impl Fn(usize) -> Objective,
    dims: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<RatioFit> {
    let profiles = profile_dims(make_objective, dims, n_samples, seed, PairSelection::Both)?;
    let ratios: Vec<f64> = profiles.iter().map(|p| p.ratio.unwrap()).collect();
    let xs: Vec<f64> = dims.iter().map(|&n| n as f64).collect();
    let (a, b, residual) = fit_power_law(&xs, &ratios)?;
    Ok(RatioFit { a, b, dims: dims.to_vec(), ratios, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn induced_norms_rank_one() {
        for n in [5usize, 20, 50] {
            let obj = Objective::rank_one_quadratic(n);
            let x = Point::new(vec![1.0 / n as f64; n]);
            let two = induced_hess_norm(&obj, &x, NormPair::Euclidean).unwrap();
            assert!((two - (n as f64 - 1.0)).abs() < 1e-9, "n={n}: {two}");
            let inf = induced_hess_norm(&obj, &x, NormPair::OneInfinity).unwrap();
            assert!((inf - 1.0).abs() < 1e-12, "n={n}: {inf}");
        }
    }

    #[test]
    fn induced_norm_zero_hessian() {
        struct Linear;
        impl Oracle for Linear {
            fn dim(&self) -> usize {
                3
            }
            fn value(&self, x: &Point) -> crate::error::Result<f64> {
                Ok(x.coords.iter().sum())
            }
            fn gradient(&self, _x: &Point) -> crate::error::Result<Vec<f64>> {
                Ok(vec![1.0; 3])
            }
            fn hessian_apply(&self, _x: &Point, _h: &[f64]) -> crate::error::Result<Vec<f64>> {
                Ok(vec![0.0; 3])
            }
        }
        let x = Point::new(vec![0.2, 0.3, 0.5]);
        assert_eq!(induced_hess_norm(&Linear, &x, NormPair::Euclidean).unwrap(), 0.0);
        assert_eq!(induced_hess_norm(&Linear, &x, NormPair::OneInfinity).unwrap(), 0.0);
    }

    #[test]
    fn power_iteration_restart_invariance() {
        let obj = Objective::appendix_mix(12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Point::new(random_domain_point(&Domain::Simplex { n: 12 }, &mut rng, 12));
        let mut vals = Vec::new();
        for s in 0..5 {
            let v0: Vec<f64> = (0..12).map(|i| 1.0 + ((i + s * 7) % 5) as f64 * 0.3).collect();
            vals.push(power_iteration(&obj, &x, &v0).unwrap());
        }
        for w in vals.windows(2) {
            assert!((w[0] - w[1]).abs() <= 1e-10 * w[0].max(1.0), "{vals:?}");
        }
    }

    #[test]
    fn sampling_basics() {
        let obj = Objective::rank_one_quadratic(10);
        let geom = Geometry::entropy_simplex(10);
        assert!(sample_links(&obj, &geom, 0, 1).unwrap().is_empty());

        let samples = sample_links(&obj, &geom, 500, 1).unwrap();
        for s in &samples {
            assert!((s.hess_norm - 1.0).abs() < 1e-12);
        }
        let geom2 = Geometry::euclidean_ball(1.0, vec![0.0; 10]);
        assert!(sample_links(&obj, &geom2, 5, 1).is_err());

        // Same seed, same samples.
        let again = sample_links(&obj, &geom, 500, 1).unwrap();
        assert_eq!(samples, again);
    }

    #[test]
    fn fit_affine_examples() {
        let s = |g: f64, h: f64| LinkSample { grad_norm: g, hess_norm: h, x: Point::new(vec![]) };
        let fit = fit_affine(&[s(1.0, 2.0), s(2.0, 4.0)]).unwrap();
        assert!(fit.l0.abs() < 1e-12 && (fit.l1 - 2.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);

        let fit = fit_affine(&[s(1.0, 3.0), s(2.0, 3.0), s(5.0, 3.0)]).unwrap();
        assert!((fit.l0 - 3.0).abs() < 1e-12 && fit.l1 == 0.0);

        // All gradient norms equal and Hessians constant: constant link.
        let fit = fit_affine(&[s(2.0, 7.0), s(2.0, 7.0)]).unwrap();
        assert!((fit.l0 - 7.0).abs() < 1e-12 && fit.l1 == 0.0);
        // ... but inconsistent Hessians cannot be fit.
        assert!(fit_affine(&[s(2.0, 7.0), s(2.0, 8.0)]).is_err());
        assert!(fit_affine(&[s(1.0, 1.0)]).is_err());

        // Decreasing data clamps the slope at zero.
        let fit = fit_affine(&[s(1.0, 4.0), s(2.0, 2.0), s(3.0, 0.5)]).unwrap();
        assert_eq!(fit.l1, 0.0);
    }

    #[test]
    fn logistic_fits_recover_analytic_slopes() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 10;
        for trial in 0..3 {
            let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 3.0 + 0.1).collect();
            let obj = Objective::logistic_kernel(w.clone(), 0.0, 1.0);
            let geom = Geometry::entropy_simplex(n);
            let samples = sample_links(&obj, &geom, 400, 100 + trial).unwrap();
            let fit = fit_affine(&samples).unwrap();
            let slope = vm::linf_norm(&w);
            assert!(
                (fit.l1 - slope).abs() <= 0.05 * slope,
                "fitted {} vs analytic {slope}",
                fit.l1
            );
            // Near-zero intercept for the exactly proportional law.
            let med = median(samples.iter().map(|s| s.grad_norm).collect());
            assert!(fit.l0.abs() <= 0.05 * fit.l1 * med);

            // Euclidean pair.
            let samples2: Vec<LinkSample> = samples
                .iter()
                .map(|s| LinkSample {
                    grad_norm: vm::l2_norm(&obj.gradient(&s.x).unwrap()),
                    hess_norm: induced_hess_norm(&obj, &s.x, NormPair::Euclidean).unwrap(),
                    x: s.x.clone(),
                })
                .collect();
            let fit2 = fit_affine(&samples2).unwrap();
            let slope2 = vm::l2_norm(&w);
            assert!((fit2.l1 - slope2).abs() <= 0.05 * slope2);

            // Slope-ratio range with fit-level tolerance.
            let ratio = fit.l1 / fit2.l1;
            assert!(ratio >= 1.0 / (n as f64).sqrt() - 0.02 && ratio <= 1.02);
        }
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    }

    #[test]
    fn appendix_mix_euclidean_scatter_is_nearly_affine() {
        let obj = Objective::appendix_mix(20);
        let geom = Geometry::entropy_simplex(20);
        let samples: Vec<LinkSample> = sample_links(&obj, &geom, 500, 7)
            .unwrap()
            .into_iter()
            .map(|s| LinkSample {
                grad_norm: vm::l2_norm(&obj.gradient(&s.x).unwrap()),
                hess_norm: induced_hess_norm(&obj, &s.x, NormPair::Euclidean).unwrap(),
                x: s.x,
            })
            .collect();
        let fit = fit_affine(&samples).unwrap();
        let mean_h = samples.iter().map(|s| s.hess_norm).sum::<f64>() / samples.len() as f64;
        assert!(fit.residual / mean_h < 0.2, "residual ratio {}", fit.residual / mean_h);
    }

    #[test]
    fn power_law_exact_recovery() {
        let dims: Vec<f64> = (2..40).map(|n| n as f64).collect();
        let ys: Vec<f64> = dims.iter().map(|n| 1.5 * n.powf(-0.4)).collect();
        let (a, b, res) = fit_power_law(&dims, &ys).unwrap();
        assert!((a - 1.5).abs() < 1e-10 && (b - 0.4).abs() < 1e-10 && res < 1e-12);
    }

    #[test]
    fn single_pair_profiles_leave_other_side_empty() {
        let dims = [4usize, 8];
        let only_inf =
            profile_dims(Objective::rank_one_quadratic, &dims, 30, 1, PairSelection::OneInfinity)
                .unwrap();
        assert!(only_inf.iter().all(|p| p.euclidean.is_none() && p.ratio.is_none()));
        assert!((only_inf[0].one_infinity.unwrap().l0 - 1.0).abs() < 1e-12);

        let only_two =
            profile_dims(Objective::rank_one_quadratic, &dims, 30, 1, PairSelection::Euclidean)
                .unwrap();
        assert!(only_two.iter().all(|p| p.one_infinity.is_none() && p.ratio.is_none()));
        assert!((only_two[1].euclidean.unwrap().l0 - 7.0).abs() < 1e-9);
    }

    #[test]
    fn rank_one_ratio_regression_matches_exact_sequence() {
        let dims: Vec<usize> = (6..=48).step_by(3).collect();
        let fit = fit_ratio_exponent(Objective::rank_one_quadratic, &dims, 50, 5).unwrap();
        for (i, &n) in dims.iter().enumerate() {
            assert!((fit.ratios[i] - 1.0 / (n as f64 - 1.0)).abs() < 1e-9);
        }
        // Oracle: regression on the exact 1/(n-1) sequence.
        let xs: Vec<f64> = dims.iter().map(|&n| n as f64).collect();
        let exact: Vec<f64> = dims.iter().map(|&n| 1.0 / (n as f64 - 1.0)).collect();
        let (a, b, _) = fit_power_law(&xs, &exact).unwrap();
        assert!((fit.a - a).abs() < 1e-9 && (fit.b - b).abs() < 1e-9);
        assert!((fit.b - 1.0).abs() < 0.15);
    }
}
