//! Shared oracles for the integration suites. Everything here is independent
//! of the library's closed-form code paths: the prox oracle minimizes the
//! prox objective with generic iterative schemes and its own projection.

#![allow(dead_code)]

use mdgs::geometry::{Domain, Geometry, Point, PsiKind};
use rand::Rng;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn l2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

pub fn random_ball(rng: &mut impl Rng, center: &[f64], radius: f64) -> Vec<f64> {
    let dir: Vec<f64> = (0..center.len()).map(|_| rng.gen::<f64>() - 0.5).collect();
    let norm = l2(&dir).max(1e-12);
    let r = radius * rng.gen::<f64>() * 0.999;
    center.iter().zip(&dir).map(|(c, d)| c + r * d / norm).collect()
}

/// Brute-force minimizer of <g, x> + B(x, y) over the domain.
///
/// Simplex/entropy: pairwise mass exchanges, each one-dimensional problem
/// solved by bisection on the increasing derivative. Ball/Euclidean:
/// projected gradient with a locally implemented projection.
pub fn numeric_prox(geom: &Geometry, y: &Point, g: &[f64]) -> Vec<f64> {
    match (&geom.domain, geom.psi_kind) {
        (Domain::Simplex { .. }, PsiKind::NegEntropy) => {
            let n = y.dim();
            let mut x = y.coords.clone();
            for _ in 0..400 {
                let mut largest = 0.0f64;
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
                            continue;
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
                        x[i] += t;
                        x[j] -= t;
                        largest = largest.max(t.abs());
                    }
                }
                if largest < 1e-13 {
                    break;
                }
            }
            x
        }
        (Domain::Ball { radius, center, .. }, PsiKind::HalfSqEuclidean) => {
            let project = |v: Vec<f64>| -> Vec<f64> {
                let d = sub(&v, center);
                let norm = l2(&d);
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
                let grad: Vec<f64> = g
                    .iter()
                    .zip(&x)
                    .zip(&y.coords)
                    .map(|((gi, xi), yi)| gi + xi - yi)
                    .collect();
                x = project(x.iter().zip(&grad).map(|(xi, gi)| xi - 0.5 * gi).collect());
            }
            x
        }
        _ => unreachable!("constructors enforce the pairing rule"),
    }
}
