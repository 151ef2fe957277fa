//! Gauss-Legendre rules: fixed tensor products and a globally adaptive
//! bisection scheme with embedded error estimates.

use std::collections::BinaryHeap;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

/// Nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(points: usize) -> Self {
        let degree = NonZeroUsize::new(points.max(1)).expect("positive degree");
        let (nodes, weights) = GaussLegendre::new(degree).into_iter().unzip();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        half * acc
    }

    /// Nodes and weights mapped to `[a, b]` and split into `panels` equal pieces.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut xs = Vec::with_capacity(panels * self.len());
        let mut ws = Vec::with_capacity(panels * self.len());
        for p in 0..panels {
            let lo = a + h * p as f64;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                xs.push(lo + 0.5 * h * (x + 1.0));
                ws.push(0.5 * h * w);
            }
        }
        (xs, ws)
    }
}

/// Tensor-product quadrature over a box using the same composite rule on every axis.
pub fn tensor_integrate<F>(rule: &GaussRule, lower: &[f64], upper: &[f64], panels: usize, mut f: F) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let d = lower.len();
    let axes: Vec<(Vec<f64>, Vec<f64>)> =
        (0..d).map(|i| rule.composite(lower[i], upper[i], panels)).collect();
    let m = axes.first().map_or(0, |a| a.0.len());
    if d == 0 {
        return f(&[]);
    }
    let mut idx = vec![0usize; d];
    let mut point = vec![0.0; d];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for i in 0..d {
            point[i] = axes[i].0[idx[i]];
            w *= axes[i].1[idx[i]];
        }
        total += w * f(&point);
        let mut axis = 0;
        loop {
            idx[axis] += 1;
            if idx[axis] < m {
                break;
            }
            idx[axis] = 0;
            axis += 1;
            if axis == d {
                return total;
            }
        }
    }
}

/// Result of a quadrature together with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub tolerance: f64,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive integration of `f` over `[a, b]`.
///
/// Each segment is integrated with a 10- and a 21-point Gauss rule; their
/// difference is the local error estimate. The segment with the largest
/// estimate is bisected until the total estimate drops below `tol`.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Integral> {
    let coarse = GaussRule::new(10);
    let fine = GaussRule::new(21);
    let mut eval = |a: f64, b: f64| {
        let lo = coarse.integrate(a, b, &mut f);
        let hi = fine.integrate(a, b, &mut f);
        Segment { a, b, value: hi, error: (hi - lo).abs() }
    };
    let mut heap = BinaryHeap::new();
    heap.push(eval(a, b));
    for _ in 0..4000 {
        let total_err: f64 = heap.iter().map(|s| s.error).sum();
        if total_err <= tol {
            break;
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        heap.push(eval(worst.a, mid));
        heap.push(eval(mid, worst.b));
    }
    let total_err: f64 = heap.iter().map(|s| s.error).sum();
    let value = crate::summation::compensated_sum(heap.iter().map(|s| s.value));
    if !(total_err <= tol) || !value.is_finite() {
        return Err(Error::Accuracy { target: tol, achieved: total_err });
    }
    Ok(Integral { value, tolerance: total_err.max(4.0 * f64::EPSILON * value.abs()) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_is_exact_for_low_degree_polynomials() {
        let rule = GaussRule::new(4);
        let v = rule.integrate(0.0, 2.0, |x| x.powi(7));
        assert!((v - 2f64.powi(8) / 8.0).abs() < 1e-12);
    }

    #[test]
    fn tensor_rule_integrates_separable_function() {
        let rule = GaussRule::new(8);
        let v = tensor_integrate(&rule, &[0.0, 0.0], &[1.0, 2.0], 2, |p| p[0].exp() * p[1].cos());
        let exact = (1f64.exp() - 1.0) * 2f64.sin();
        assert!((v - exact).abs() < 1e-13);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let r = adaptive(|x| x.powf(-0.5), 0.0, 1.0, 1e-10).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9, "{r:?}");
        assert!(r.tolerance <= 1e-10);
    }
}
