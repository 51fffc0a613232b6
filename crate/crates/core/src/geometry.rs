//! Norm pairs, domains, distance-generating functions, Bregman divergences and
//! prox-mappings for the two geometries used throughout the crate: the
//! entropic simplex setup (primal ℓ1, dual ℓ∞, negative-entropy ψ) and the
//! Euclidean ball setup (self-dual ℓ2, half squared norm ψ).

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::vecmath as vm;

/// Membership tolerance for [`Domain::contains`].
pub const DOMAIN_TOL: f64 = 1e-12;

/// Per-coordinate floor applied before renormalization in the entropic prox.
const ENTROPY_FLOOR: f64 = 1e-300;

/// A primal norm together with its dual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormPair {
    /// ‖·‖2 primal, ‖·‖2 dual.
    Euclidean,
    /// ‖·‖1 primal, ‖·‖∞ dual.
    OneInfinity,
}

impl NormPair {
    /// Primal norm, used on iterate displacements.
    pub fn norm(&self, v: &[f64]) -> f64 {
        match self {
            NormPair::Euclidean => vm::l2_norm(v),
            NormPair::OneInfinity => vm::l1_norm(v),
        }
    }

    /// Dual norm, used on gradients, Hessian images and noise.
    pub fn dual_norm(&self, v: &[f64]) -> f64 {
        match self {
            NormPair::Euclidean => vm::l2_norm(v),
            NormPair::OneInfinity => vm::linf_norm(v),
        }
    }
}

/// A point in problem coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point { coords }
    }
}

/// Feasible set of an optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Domain {
    /// Probability simplex { x ≥ 0, Σ x_i = 1 } in dimension `n`.
    Simplex { n: usize },
    /// Euclidean ball of the given radius around `center`.
    Ball { n: usize, radius: f64, center: Vec<f64> },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Simplex { n } => *n,
            Domain::Ball { n, .. } => *n,
        }
    }

    /// Membership test, decidable to `DOMAIN_TOL`.
    pub fn contains(&self, x: &[f64]) -> bool {
        if !vm::all_finite(x) || x.len() != self.dim() {
            return false;
        }
        match self {
            Domain::Simplex { .. } => {
                let sum: f64 = x.iter().sum();
                x.iter().all(|&xi| xi >= -DOMAIN_TOL) && (sum - 1.0).abs() <= DOMAIN_TOL
            }
            Domain::Ball { radius, center, .. } => {
                vm::l2_norm(&vm::sub(x, center)) <= radius + DOMAIN_TOL
            }
        }
    }
}

/// Distance-generating function family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiKind {
    /// ψ(x) = ½‖x − center‖2². Paired with the Euclidean norm pair.
    HalfSqEuclidean,
    /// ψ(x) = Σ x_i ln x_i with 0·ln 0 := 0. Paired with the ℓ1/ℓ∞ pair on the simplex.
    NegEntropy,
}

/// A norm pair, a domain, a distance-generating function, and the domain
/// bound D² = max ψ − min ψ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub norm_pair: NormPair,
    pub domain: Domain,
    pub psi_kind: PsiKind,
    pub diameter_sq: f64,
}

impl Geometry {
    /// Negative entropy over the simplex; D² = ln n.
    pub fn entropy_simplex(n: usize) -> Self {
        Geometry {
            norm_pair: NormPair::OneInfinity,
            domain: Domain::Simplex { n },
            psi_kind: PsiKind::NegEntropy,
            diameter_sq: (n as f64).ln(),
        }
    }

    /// Half squared Euclidean norm over a ball; D² = R²/2.
    /// ψ is centered at the ball center so that argmin ψ is the center.
    pub fn euclidean_ball(radius: f64, center: Vec<f64>) -> Self {
        let n = center.len();
        Geometry {
            norm_pair: NormPair::Euclidean,
            domain: Domain::Ball { n, radius, center },
            psi_kind: PsiKind::HalfSqEuclidean,
            diameter_sq: radius * radius / 2.0,
        }
    }

    /// Validated constructor enforcing the ψ ⇔ norm-pair pairing rule.
    pub fn new(norm_pair: NormPair, domain: Domain, psi_kind: PsiKind) -> Result<Self> {
        match (psi_kind, norm_pair, &domain) {
            (PsiKind::NegEntropy, NormPair::OneInfinity, Domain::Simplex { n }) => {
                Ok(Geometry::entropy_simplex(*n))
            }
            (PsiKind::HalfSqEuclidean, NormPair::Euclidean, Domain::Ball { radius, center, .. }) => {
                Ok(Geometry::euclidean_ball(*radius, center.clone()))
            }
            _ => Err(CoreError::Domain(
                "unsupported pairing: neg_entropy goes with one_infinity on the simplex, \
                 half_sq_euclidean with the euclidean pair on a ball"
                    .into(),
            )),
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// D² of the bounded-domain assumption.
    pub fn diameter_sq(&self) -> f64 {
        self.diameter_sq
    }

    pub fn psi(&self, x: &[f64]) -> f64 {
        match self.psi_kind {
            PsiKind::NegEntropy => x
                .iter()
                .map(|&xi| if xi > 0.0 { xi * xi.ln() } else { 0.0 })
                .sum(),
            PsiKind::HalfSqEuclidean => {
                let c = self.ball_center();
                0.5 * x.iter().zip(c).map(|(xi, ci)| (xi - ci) * (xi - ci)).sum::<f64>()
            }
        }
    }

    fn ball_center(&self) -> &[f64] {
        match &self.domain {
            Domain::Ball { center, .. } => center,
            Domain::Simplex { .. } => unreachable!("center requested on simplex domain"),
        }
    }

    fn grad_psi(&self, y: &[f64]) -> Result<Vec<f64>> {
        match self.psi_kind {
            PsiKind::NegEntropy => {
                if y.iter().any(|&yi| yi <= 0.0) {
                    return Err(CoreError::Domain(
                        "neg_entropy gradient needs strictly positive coordinates".into(),
                    ));
                }
                Ok(y.iter().map(|&yi| 1.0 + yi.ln()).collect())
            }
            PsiKind::HalfSqEuclidean => Ok(vm::sub(y, self.ball_center())),
        }
    }

    /// Bregman divergence B(x, y) = ψ(x) − ψ(y) − ⟨∇ψ(y), x − y⟩.
    ///
    /// `y` must lie in the relative interior of the domain (all coordinates
    /// positive under negative entropy).
    pub fn bregman(&self, x: &Point, y: &Point) -> Result<f64> {
        let (xs, ys) = (x.as_slice(), y.as_slice());
        if !self.domain.contains(xs) {
            return Err(CoreError::Domain("bregman: x outside domain".into()));
        }
        if !self.domain.contains(ys) {
            return Err(CoreError::Domain("bregman: y outside domain".into()));
        }
        let grad = self.grad_psi(ys)?;
        let b = self.psi(xs) - self.psi(ys) - vm::dot(&grad, &vm::sub(xs, ys));
        // Roundoff can take an exact zero slightly negative.
        Ok(b.max(0.0))
    }

    /// Prox-mapping P_y(g) = argmin over the domain of ⟨g, x⟩ + B(x, y).
    ///
    /// Closed forms: entropic case re-weights y by exp(−g) and renormalizes
    /// (with a max-shift in the exponent and a 1e−300 floor for stability);
    /// Euclidean case projects y − g onto the ball.
    pub fn prox_map(&self, y: &Point, g: &[f64]) -> Result<Point> {
        let ys = y.as_slice();
        if g.len() != self.dim() || !vm::all_finite(g) {
            return Err(CoreError::Domain("prox_map: g must be finite and of matching dimension".into()));
        }
        if !self.domain.contains(ys) {
            return Err(CoreError::Domain("prox_map: y outside domain".into()));
        }
        match self.psi_kind {
            PsiKind::NegEntropy => {
                if ys.iter().any(|&yi| yi <= 0.0) {
                    return Err(CoreError::Domain(
                        "prox_map: y must lie in the relative interior of the simplex".into(),
                    ));
                }
                if ys.len() == 1 {
                    return Ok(Point::new(vec![1.0]));
                }
                let logits: Vec<f64> = ys.iter().zip(g).map(|(&yi, &gi)| yi.ln() - gi).collect();
                let shift = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let weights: Vec<f64> = logits
                    .iter()
                    .map(|&w| (w - shift).exp().max(ENTROPY_FLOOR))
                    .collect();
                let total: f64 = weights.iter().sum();
                if !total.is_finite() || total <= 0.0 {
                    return Err(CoreError::Numerical(
                        "prox_map: entropic renormalization constant underflowed".into(),
                    ));
                }
                Ok(Point::new(weights.iter().map(|&w| w / total).collect()))
            }
            PsiKind::HalfSqEuclidean => {
                let (radius, center) = match &self.domain {
                    Domain::Ball { radius, center, .. } => (*radius, center),
                    _ => unreachable!(),
                };
                let z = vm::sub(&vm::sub(ys, g), center);
                let dist = vm::l2_norm(&z);
                let scale = if dist > radius && dist > 0.0 { radius / dist } else { 1.0 };
                Ok(Point::new(
                    z.iter().zip(center).map(|(zi, ci)| ci + scale * zi).collect(),
                ))
            }
        }
    }

    /// Starting point x₀ = argmin ψ: the uniform vector on the simplex, the
    /// center of a ball.
    pub fn argmin_psi(&self) -> Point {
        match &self.domain {
            Domain::Simplex { n } => Point::new(vec![1.0 / *n as f64; *n]),
            Domain::Ball { center, .. } => Point::new(center.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        // Normalized exponentials: uniform on the simplex.
        let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|x| x / s).collect()
    }

    fn rand_ball(rng: &mut impl Rng, center: &[f64], radius: f64) -> Vec<f64> {
        // Gaussian direction, radius scaled by u^(1/n) would be uniform; any
        // interior law works for the checks here.
        let dir: Vec<f64> = (0..center.len())
            .map(|_| rng.gen::<f64>() - 0.5)
            .collect();
        let norm = vm::l2_norm(&dir).max(1e-12);
        let r = radius * rng.gen::<f64>() * 0.999;
        center
            .iter()
            .zip(&dir)
            .map(|(c, d)| c + r * d / norm)
            .collect()
    }

    #[test]
    fn bregman_euclidean_closed_form() {
        let geom = Geometry::euclidean_ball(10.0, vec![0.0, 0.0]);
        let b = geom
            .bregman(&Point::new(vec![1.0, 2.0]), &Point::new(vec![0.0, 0.0]))
            .unwrap();
        assert!((b - 2.5).abs() < 1e-14);
    }

    #[test]
    fn bregman_entropy_is_kl() {
        let geom = Geometry::entropy_simplex(3);
        let u = Point::new(vec![1.0 / 3.0; 3]);
        assert_eq!(geom.bregman(&u, &u).unwrap(), 0.0);

        // Direct KL summation oracle on a 2d example.
        let geom2 = Geometry::entropy_simplex(2);
        let x = [0.5f64, 0.5];
        let y = [0.25f64, 0.75];
        let kl: f64 = x.iter().zip(&y).map(|(&xi, &yi)| xi * (xi / yi).ln()).sum();
        let b = geom2
            .bregman(&Point::new(x.to_vec()), &Point::new(y.to_vec()))
            .unwrap();
        assert!((b - kl).abs() < 1e-14);
        assert!((b - 0.14384).abs() < 1e-5);
    }

    #[test]
    fn bregman_rejects_boundary_reference() {
        let geom = Geometry::entropy_simplex(2);
        let x = Point::new(vec![0.5, 0.5]);
        let y = Point::new(vec![0.0, 1.0]);
        assert!(matches!(geom.bregman(&x, &y), Err(CoreError::Domain(_))));
    }

    #[test]
    fn prox_zero_gradient_is_identity() {
        let geoms = [
            Geometry::entropy_simplex(4),
            Geometry::euclidean_ball(3.0, vec![0.0; 4]),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for geom in &geoms {
            let y = match geom.psi_kind {
                PsiKind::NegEntropy => rand_simplex(&mut rng, 4),
                PsiKind::HalfSqEuclidean => rand_ball(&mut rng, &[0.0; 4], 3.0),
            };
            let p = geom.prox_map(&Point::new(y.clone()), &[0.0; 4]).unwrap();
            for (a, b) in p.coords.iter().zip(&y) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn prox_entropy_reweights() {
        let geom = Geometry::entropy_simplex(2);
        let p = geom
            .prox_map(&Point::new(vec![0.5, 0.5]), &[2f64.ln(), 0.0])
            .unwrap();
        assert!((p.coords[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((p.coords[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn prox_ball_interior_step() {
        let geom = Geometry::euclidean_ball(10.0, vec![0.0, 0.0]);
        let p = geom
            .prox_map(&Point::new(vec![1.0, 1.0]), &[0.5, -0.5])
            .unwrap();
        assert!((p.coords[0] - 0.5).abs() < 1e-14);
        assert!((p.coords[1] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn diameter_values() {
        assert!((Geometry::entropy_simplex(3).diameter_sq() - 3f64.ln()).abs() < 1e-15);
        assert!((Geometry::euclidean_ball(2.0, vec![0.0; 3]).diameter_sq() - 2.0).abs() < 1e-15);
        assert_eq!(Geometry::entropy_simplex(1).diameter_sq(), 0.0);
    }

    #[test]
    fn argmin_psi_values() {
        let u = Geometry::entropy_simplex(4).argmin_psi();
        assert_eq!(u.coords, vec![0.25; 4]);
        let c = Geometry::euclidean_ball(1.0, vec![1.0, 0.0]).argmin_psi();
        assert_eq!(c.coords, vec![1.0, 0.0]);
        let two = Geometry::entropy_simplex(2).argmin_psi();
        assert_eq!(two.coords, vec![0.5, 0.5]);
    }

    #[test]
    fn degenerate_domains_are_fixed_points() {
        let geom = Geometry::entropy_simplex(1);
        let p = geom.prox_map(&Point::new(vec![1.0]), &[3.0]).unwrap();
        assert_eq!(p.coords, vec![1.0]);
        let ball = Geometry::euclidean_ball(0.0, vec![2.0, -1.0]);
        let q = ball
            .prox_map(&Point::new(vec![2.0, -1.0]), &[5.0, 5.0])
            .unwrap();
        assert!((q.coords[0] - 2.0).abs() < 1e-12 && (q.coords[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn dual_norm_matches_pairing_definition() {
        // dual_norm(g) = sup { <g,y> : ||y|| <= 1 }. For one_infinity the sup
        // over the l1 ball is attained at a signed coordinate vector; for
        // euclidean at g/||g||.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let g: Vec<f64> = (0..5).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
            let pair = NormPair::OneInfinity;
            let by_coord = (0..5)
                .map(|i| g[i].abs())
                .fold(0.0f64, f64::max);
            assert!((pair.dual_norm(&g) - by_coord).abs() < 1e-14);

            let e = NormPair::Euclidean;
            let n = vm::l2_norm(&g);
            if n > 0.0 {
                let y: Vec<f64> = g.iter().map(|x| x / n).collect();
                assert!((e.dual_norm(&g) - vm::dot(&g, &y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn norms_homogeneous_and_triangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for pair in [NormPair::Euclidean, NormPair::OneInfinity] {
            for _ in 0..200 {
                let a: Vec<f64> = (0..6).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
                let b: Vec<f64> = (0..6).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
                let s = rng.gen::<f64>() * 4.0 - 2.0;
                for norm in [NormPair::norm, NormPair::dual_norm] {
                    let scaled = norm(&pair, &vm::scale(&a, s));
                    assert!((scaled - s.abs() * norm(&pair, &a)).abs() < 1e-12);
                    let tri = norm(&pair, &vm::add(&a, &b));
                    assert!(tri <= norm(&pair, &a) + norm(&pair, &b) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn prox_contraction_and_step_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 4;
        let geoms = [
            Geometry::entropy_simplex(n),
            Geometry::euclidean_ball(1.5, vec![0.0; n]),
        ];
        for geom in &geoms {
            for _ in 0..1000 {
                let y = match geom.psi_kind {
                    PsiKind::NegEntropy => rand_simplex(&mut rng, n),
                    PsiKind::HalfSqEuclidean => rand_ball(&mut rng, &[0.0; 4], 1.5),
                };
                let y = Point::new(y);
                let g1: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
                let g2: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
                let p1 = geom.prox_map(&y, &g1).unwrap();
                let p2 = geom.prox_map(&y, &g2).unwrap();
                let lhs = geom.norm_pair.norm(&vm::sub(&p1.coords, &p2.coords));
                let rhs = geom.norm_pair.dual_norm(&vm::sub(&g1, &g2));
                assert!(lhs <= rhs + 1e-9, "contraction failed: {lhs} > {rhs}");

                let step = geom.norm_pair.norm(&vm::sub(&p1.coords, y.as_slice()));
                let cap = geom.norm_pair.dual_norm(&g1);
                assert!(step <= cap + 1e-9, "step bound failed: {step} > {cap}");
            }
        }
    }

    #[test]
    fn three_point_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 4;
        let geoms = [
            Geometry::entropy_simplex(n),
            Geometry::euclidean_ball(1.5, vec![0.0; n]),
        ];
        for geom in &geoms {
            for _ in 0..500 {
                let (y, x) = match geom.psi_kind {
                    PsiKind::NegEntropy => (rand_simplex(&mut rng, n), rand_simplex(&mut rng, n)),
                    PsiKind::HalfSqEuclidean => (
                        rand_ball(&mut rng, &[0.0; 4], 1.5),
                        rand_ball(&mut rng, &[0.0; 4], 1.5),
                    ),
                };
                let y = Point::new(y);
                let x = Point::new(x);
                let g: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
                let xp = geom.prox_map(&y, &g).unwrap();
                let lhs = vm::dot(&g, &vm::sub(xp.as_slice(), x.as_slice()));
                let rhs = geom.bregman(&x, &y).unwrap()
                    - geom.bregman(&x, &xp).unwrap()
                    - geom.bregman(&xp, &y).unwrap();
                assert!(lhs <= rhs + 1e-8, "three-point failed: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn strong_convexity_of_bregman() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 5;
        let geoms = [
            Geometry::entropy_simplex(n),
            Geometry::euclidean_ball(2.0, vec![0.0; n]),
        ];
        for geom in &geoms {
            for _ in 0..1000 {
                let (x, y) = match geom.psi_kind {
                    PsiKind::NegEntropy => (rand_simplex(&mut rng, n), rand_simplex(&mut rng, n)),
                    PsiKind::HalfSqEuclidean => (
                        rand_ball(&mut rng, &[0.0; 5], 2.0),
                        rand_ball(&mut rng, &[0.0; 5], 2.0),
                    ),
                };
                let b = geom
                    .bregman(&Point::new(x.clone()), &Point::new(y.clone()))
                    .unwrap();
                let d = geom.norm_pair.norm(&vm::sub(&x, &y));
                assert!(b + 1e-12 >= 0.5 * d * d, "strong convexity failed: {b} < {}", 0.5 * d * d);
            }
        }
    }

    #[test]
    fn diameter_bounds_psi_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for geom in [
            Geometry::entropy_simplex(6),
            Geometry::euclidean_ball(2.5, vec![0.5; 6]),
        ] {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for _ in 0..1000 {
                let x = match geom.psi_kind {
                    PsiKind::NegEntropy => rand_simplex(&mut rng, 6),
                    PsiKind::HalfSqEuclidean => rand_ball(&mut rng, &[0.5; 6], 2.5),
                };
                let v = geom.psi(&x);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            assert!(hi - lo <= geom.diameter_sq() + 1e-12);
        }
    }

    #[test]
    fn contains_is_tolerant_but_strict() {
        let simplex = Domain::Simplex { n: 3 };
        assert!(simplex.contains(&[0.2, 0.3, 0.5]));
        assert!(simplex.contains(&[0.2 + 5e-13, 0.3, 0.5 - 5e-13]));
        assert!(!simplex.contains(&[0.2, 0.3, 0.6]));
        assert!(!simplex.contains(&[-1e-6, 0.5, 0.5 + 1e-6]));
        assert!(!simplex.contains(&[0.5, 0.5]));

        let ball = Domain::Ball { n: 2, radius: 1.0, center: vec![0.0, 0.0] };
        assert!(ball.contains(&[1.0, 0.0]));
        assert!(!ball.contains(&[1.0 + 1e-6, 0.0]));
        assert!(!ball.contains(&[f64::NAN, 0.0]));
    }

    #[test]
    fn pairing_rule_enforced() {
        let bad = Geometry::new(
            NormPair::Euclidean,
            Domain::Simplex { n: 3 },
            PsiKind::NegEntropy,
        );
        assert!(bad.is_err());
        let ok = Geometry::new(
            NormPair::OneInfinity,
            Domain::Simplex { n: 3 },
            PsiKind::NegEntropy,
        );
        assert!(ok.is_ok());
    }
}
