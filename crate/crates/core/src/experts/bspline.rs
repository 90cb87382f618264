use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Spline φ(x) = Σ c_i B_i(x) over a knot vector, degree `order`
/// (`order = 1` gives hat functions).
#[derive(Clone, Debug, PartialEq)]
pub struct BSplineBasis {
    order: usize,
    knots: Vec<f64>,
    coefficients: Vec<f64>,
}

impl BSplineBasis {
    pub fn new(order: usize, knots: Vec<f64>, coefficients: Vec<f64>) -> Result<Self> {
        if order < 1 {
            return Err(Error::contract("BSplineBasis", "order must be >= 1"));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::contract("BSplineBasis", "knots must be nondecreasing"));
        }
        let n = knots.len().checked_sub(order + 1).filter(|&n| n >= 1);
        match n {
            Some(n) if n == coefficients.len() => {}
            _ => {
                return Err(Error::contract(
                    "BSplineBasis",
                    alloc::format!(
                        "{} knots at order {order} need {} coefficients, got {}",
                        knots.len(),
                        knots.len().saturating_sub(order + 1),
                        coefficients.len()
                    ),
                ))
            }
        }
        if knots[order] >= knots[knots.len() - order - 1] {
            return Err(Error::contract("BSplineBasis", "empty interior domain"));
        }
        Ok(BSplineBasis {
            order,
            knots,
            coefficients,
        })
    }

    /// Uniform knots whose interior domain is `[lo, hi]`, split into
    /// `intervals` spans (`order` extra knots on each side).
    pub fn uniform(order: usize, intervals: usize, lo: f64, hi: f64, coefficients: Vec<f64>) -> Result<Self> {
        if intervals == 0 || !(lo < hi) {
            return Err(Error::contract("BSplineBasis::uniform", "need intervals >= 1 and lo < hi"));
        }
        let h = (hi - lo) / intervals as f64;
        let knots = (0..intervals + 2 * order + 1)
            .map(|i| lo + h * (i as f64 - order as f64))
            .collect();
        Self::new(order, knots, coefficients)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn num_basis(&self) -> usize {
        self.coefficients.len()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[self.order], self.knots[self.knots.len() - self.order - 1])
    }

    /// All B_i(x) via the triangular Cox-de Boor scheme on the active span.
    pub fn basis_values(&self, x: f64) -> Result<Vec<f64>> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(Error::Domain { x, lo, hi });
        }
        let k = self.order;
        let t = &self.knots;
        let n = self.num_basis();
        // span s with t[s] <= x < t[s+1], clamped so x = hi uses the last span
        let mut s = k;
        while s < n - 1 && x >= t[s + 1] {
            s += 1;
        }
        let mut nvals = vec![0.0; k + 1];
        let mut left = vec![0.0; k + 1];
        let mut right = vec![0.0; k + 1];
        nvals[0] = 1.0;
        for j in 1..=k {
            left[j] = x - t[s + 1 - j];
            right[j] = t[s + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { nvals[r] / denom };
                nvals[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            nvals[j] = saved;
        }
        let mut all = vec![0.0; n];
        for (r, v) in nvals.into_iter().enumerate() {
            all[s - k + r] = v;
        }
        Ok(all)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self
            .basis_values(x)?
            .iter()
            .zip(&self.coefficients)
            .map(|(b, c)| b * c)
            .sum())
    }
}

/// Elementwise Σ c_i B_i(x); any point outside the interior domain is an
/// error.
pub fn bspline_eval(basis: &BSplineBasis, x: &Tensor<f64>) -> Result<Tensor<f64>> {
    let data = x.data().iter().map(|&v| basis.eval(v)).collect::<Result<Vec<_>>>()?;
    Tensor::new(x.shape().to_vec(), data)
}
