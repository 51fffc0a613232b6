use crate::error::Result;
use crate::geometry::Point;

/// First/second-order access to an objective: value, gradient, and
/// Hessian-vector products. Implemented by the shipped objective catalog and
/// by ad-hoc test functions.
pub trait Oracle {
    fn dim(&self) -> usize;
    fn value(&self, x: &Point) -> Result<f64>;
    fn gradient(&self, x: &Point) -> Result<Vec<f64>>;
    fn hessian_apply(&self, x: &Point, h: &[f64]) -> Result<Vec<f64>>;
}
