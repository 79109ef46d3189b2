//! Memory kernels `Phi(t, tau)` of integro-differential equations and the
//! integral bound used by the sliding-mode design.
//!
//! A kernel is only ever evaluated on the triangle `t >= tau`. Kernels that
//! depend on the lag `t - tau` alone are *stationary*; on a uniform grid they
//! are evaluated through the integer lag `(k - i) * h` so that window edges
//! land on grid points deterministically.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector, WeightedNorm};

pub type DenseFn = dyn Fn(f64, f64) -> Mat + Send + Sync;
pub type LagFn = dyn Fn(f64) -> Mat + Send + Sync;

/// One term `coeff * exp(-rate * s)` of an exponential-series kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpTerm {
    pub rate: f64,
    pub coeff: Mat,
}

#[derive(Clone)]
pub enum Kernel {
    Dense { dim: usize, eval: Arc<DenseFn> },
    Convolution { dim: usize, eval: Arc<LagFn> },
    ExponentialSeries { dim: usize, terms: Vec<ExpTerm> },
    Truncated { inner: Box<Kernel>, delay: f64 },
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Dense { dim, .. } => write!(f, "Kernel::Dense(dim={dim})"),
            Kernel::Convolution { dim, .. } => write!(f, "Kernel::Convolution(dim={dim})"),
            Kernel::ExponentialSeries { dim, terms } => f
                .debug_struct("Kernel::ExponentialSeries")
                .field("dim", dim)
                .field("terms", terms)
                .finish(),
            Kernel::Truncated { inner, delay } => f
                .debug_struct("Kernel::Truncated")
                .field("inner", inner)
                .field("delay", delay)
                .finish(),
        }
    }
}

impl Kernel {
    /// The zero kernel: an exponential series with no terms.
    pub fn zero(dim: usize) -> Self {
        Kernel::ExponentialSeries {
            dim,
            terms: Vec::new(),
        }
    }

    pub fn dense<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(f64, f64) -> Mat + Send + Sync + 'static,
    {
        Kernel::Dense {
            dim,
            eval: Arc::new(eval),
        }
    }

    pub fn convolution<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(f64) -> Mat + Send + Sync + 'static,
    {
        Kernel::Convolution {
            dim,
            eval: Arc::new(eval),
        }
    }

    pub fn exponential_series(dim: usize, terms: Vec<ExpTerm>) -> Result<Self> {
        for term in &terms {
            if !(term.rate > 0.0) || !term.rate.is_finite() {
                return Err(Error::KernelKind(format!(
                    "exponential-series decay rates must be positive, got {}",
                    term.rate
                )));
            }
            if term.coeff.nrows() != dim || term.coeff.ncols() != dim {
                return Err(Error::Dimension(format!(
                    "series coefficient is {}x{}, kernel dimension is {dim}",
                    term.coeff.nrows(),
                    term.coeff.ncols()
                )));
            }
        }
        Ok(Kernel::ExponentialSeries { dim, terms })
    }

    pub fn truncated(inner: Kernel, delay: f64) -> Result<Self> {
        if !(delay > 0.0) {
            return Err(Error::KernelKind(format!(
                "truncation delay must be positive, got {delay}"
            )));
        }
        Ok(Kernel::Truncated {
            inner: Box::new(inner),
            delay,
        })
    }

    /// `amplitude * I` on lags `[0, delay)` and zero afterwards: a uniformly
    /// distributed input delay.
    pub fn window(dim: usize, delay: f64, amplitude: f64) -> Result<Self> {
        let value = Mat::identity(dim, dim) * amplitude;
        Kernel::truncated(Kernel::convolution(dim, move |_| value.clone()), delay)
    }

    pub fn dim(&self) -> usize {
        match self {
            Kernel::Dense { dim, .. }
            | Kernel::Convolution { dim, .. }
            | Kernel::ExponentialSeries { dim, .. } => *dim,
            Kernel::Truncated { inner, .. } => inner.dim(),
        }
    }

    pub fn is_stationary(&self) -> bool {
        match self {
            Kernel::Dense { .. } => false,
            Kernel::Convolution { .. } | Kernel::ExponentialSeries { .. } => true,
            Kernel::Truncated { inner, .. } => inner.is_stationary(),
        }
    }

    /// True when the kernel is structurally zero (an empty series).
    pub fn is_trivially_zero(&self) -> bool {
        match self {
            Kernel::ExponentialSeries { terms, .. } => terms.is_empty(),
            Kernel::Truncated { inner, .. } => inner.is_trivially_zero(),
            _ => false,
        }
    }

    /// Support length in time for truncated kernels.
    pub fn delay_bound(&self) -> Option<f64> {
        match self {
            Kernel::Truncated { inner, delay } => Some(match inner.delay_bound() {
                Some(d) => d.min(*delay),
                None => *delay,
            }),
            _ => None,
        }
    }

    pub fn exp_terms(&self) -> Option<&[ExpTerm]> {
        match self {
            Kernel::ExponentialSeries { terms, .. } => Some(terms),
            _ => None,
        }
    }

    /// `Phi(t, tau)`; errors when `t < tau`.
    pub fn eval(&self, t: f64, tau: f64) -> Result<Mat> {
        if t < tau {
            return Err(Error::KernelDomain { t, tau });
        }
        Ok(self.eval_unchecked(t, tau, t - tau))
    }

    /// Evaluation for stationary kernels by lag alone.
    pub fn eval_lag(&self, lag: f64) -> Result<Mat> {
        if lag < 0.0 {
            return Err(Error::KernelDomain { t: lag, tau: 0.0 });
        }
        if !self.is_stationary() {
            return Err(Error::KernelKind(
                "lag evaluation requires a stationary kernel".into(),
            ));
        }
        Ok(self.eval_unchecked(lag, 0.0, lag))
    }

    fn eval_unchecked(&self, t: f64, tau: f64, lag: f64) -> Mat {
        match self {
            Kernel::Dense { eval, .. } => eval(t, tau),
            Kernel::Convolution { eval, .. } => eval(lag),
            Kernel::ExponentialSeries { dim, terms } => {
                let mut out = Mat::zeros(*dim, *dim);
                for term in terms {
                    out += &term.coeff * (-term.rate * lag).exp();
                }
                out
            }
            Kernel::Truncated { inner, delay } => {
                if lag >= *delay {
                    Mat::zeros(inner.dim(), inner.dim())
                } else {
                    inner.eval_unchecked(t, tau, lag)
                }
            }
        }
    }

    /// `Phi(t0 + k h, t0 + i h)` for `i <= k`, using the integer lag for
    /// stationary kernels.
    pub fn eval_grid(&self, t0: f64, h: f64, k: usize, i: usize) -> Mat {
        debug_assert!(i <= k);
        let lag = (k - i) as f64 * h;
        let t = t0 + k as f64 * h;
        let tau = t0 + i as f64 * h;
        self.eval_unchecked(t, tau, lag)
    }

    /// `P`-weighted memory bound: the supremum over grid times `t` of the
    /// left-rectangle quadrature of `int_{t0}^t ||C Phi(t,tau) R||_P dtau`.
    pub fn memory_bound(
        &self,
        c: &Mat,
        r: &Mat,
        p: &Mat,
        t0: f64,
        horizon: f64,
        h: f64,
    ) -> Result<f64> {
        if !(h > 0.0) || !(horizon >= 0.0) {
            return Err(Error::Param(format!(
                "memory bound needs h > 0 and horizon >= 0 (h = {h}, horizon = {horizon})"
            )));
        }
        let n = self.dim();
        if c.ncols() != n || r.nrows() != n {
            return Err(Error::Dimension(format!(
                "C is {}x{}, R is {}x{}, kernel is {n}x{n}",
                c.nrows(),
                c.ncols(),
                r.nrows(),
                r.ncols()
            )));
        }
        let norm = WeightedNorm::new(p)?;
        let steps = (horizon / h).floor() as usize;
        let weight = |phi: &Mat| norm.matrix_norm(&(c * phi * r));
        if self.is_stationary() {
            // terms are nonnegative, so the supremum is the full partial sum
            let support = self.grid_support(h, steps);
            let mut total = 0.0;
            let mut best: f64 = 0.0;
            for j in 0..support {
                total += h * weight(&self.eval_grid(t0, h, j, 0));
                best = best.max(total);
            }
            Ok(best)
        } else {
            let mut best: f64 = 0.0;
            for k in 0..=steps {
                let mut total = 0.0;
                for i in 0..=k {
                    total += h * weight(&self.eval_grid(t0, h, k, i));
                }
                best = best.max(total);
            }
            Ok(best)
        }
    }

    /// Number of grid lags `j = 0..` that can be nonzero, capped at `steps + 1`.
    pub fn grid_support(&self, h: f64, steps: usize) -> usize {
        match self.delay_bound() {
            Some(d) => {
                let mut j = 0usize;
                while j <= steps && (j as f64) * h < d {
                    j += 1;
                }
                j
            }
            None => steps + 1,
        }
    }
}

/// Kernel values prepared for repeated grid quadrature, optionally
/// sandwiched as `L Phi R`.
///
/// Stationary kernels are tabulated once by lag; dense kernels are evaluated
/// on demand.
pub struct GridKernel<'a> {
    kernel: &'a Kernel,
    t0: f64,
    h: f64,
    left: Option<Mat>,
    right: Option<Mat>,
    lags: Option<Vec<Mat>>,
}

impl<'a> GridKernel<'a> {
    pub fn new(kernel: &'a Kernel, t0: f64, h: f64, steps: usize) -> Self {
        Self::projected(kernel, t0, h, steps, None, None)
    }

    /// Weights `left * Phi * right`; `None` stands for the identity.
    pub fn projected(
        kernel: &'a Kernel,
        t0: f64,
        h: f64,
        steps: usize,
        left: Option<Mat>,
        right: Option<Mat>,
    ) -> Self {
        let mut grid = Self {
            kernel,
            t0,
            h,
            left,
            right,
            lags: None,
        };
        if kernel.is_stationary() {
            let support = kernel.grid_support(h, steps);
            grid.lags = Some(
                (0..support)
                    .map(|j| grid.sandwich(kernel.eval_grid(t0, h, j, 0)))
                    .collect(),
            );
        }
        grid
    }

    fn sandwich(&self, phi: Mat) -> Mat {
        let phi = match &self.left {
            Some(l) => l * phi,
            None => phi,
        };
        match &self.right {
            Some(r) => phi * r,
            None => phi,
        }
    }

    pub fn rows(&self) -> usize {
        self.left.as_ref().map_or(self.kernel.dim(), |l| l.nrows())
    }

    /// Smallest history index that can contribute at step `k`.
    pub fn first_index(&self, k: usize) -> usize {
        match &self.lags {
            Some(table) => (k + 1).saturating_sub(table.len()),
            None => 0,
        }
    }

    pub fn weight(&self, k: usize, i: usize) -> std::borrow::Cow<'_, Mat> {
        match &self.lags {
            Some(table) => std::borrow::Cow::Borrowed(&table[k - i]),
            None => {
                std::borrow::Cow::Owned(self.sandwich(self.kernel.eval_grid(self.t0, self.h, k, i)))
            }
        }
    }

    /// `h * sum_{i<=k} W(t_k, t_i) v_i` over a recorded history.
    pub fn rectangle_sum(&self, k: usize, history: &[Vector]) -> Vector {
        let mut acc = Vector::zeros(self.rows());
        for i in self.first_index(k)..=k {
            acc.gemv(self.h, &self.weight(k, i), &history[i], 1.0);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mat_from_rows;
    use approx::assert_relative_eq;

    fn delay_kernel() -> Kernel {
        Kernel::window(3, 1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_kernel_evaluates_to_zero() {
        let k = Kernel::zero(2);
        assert_eq!(k.eval(3.0, 1.0).unwrap(), Mat::zeros(2, 2));
        assert!(k.is_trivially_zero());
    }

    #[test]
    fn window_kernel_edges() {
        let k = delay_kernel();
        assert_eq!(k.eval(2.5, 2.0).unwrap(), Mat::identity(3, 3));
        assert_eq!(k.eval(3.0, 2.0).unwrap(), Mat::zeros(3, 3));
        assert_eq!(k.eval(7.0, 2.0).unwrap(), Mat::zeros(3, 3));
        assert_eq!(k.eval(2.0, 2.0).unwrap(), Mat::identity(3, 3));
    }

    #[test]
    fn exponential_series_at_zero_lag() {
        let k = Kernel::exponential_series(
            2,
            vec![ExpTerm {
                rate: 1.0,
                coeff: Mat::identity(2, 2),
            }],
        )
        .unwrap();
        assert_eq!(k.eval(4.0, 4.0).unwrap(), Mat::identity(2, 2));
        assert_relative_eq!(k.eval_lag(1.0).unwrap()[(0, 0)], (-1.0f64).exp());
    }

    #[test]
    fn rejects_nonpositive_rate() {
        let bad = Kernel::exponential_series(
            1,
            vec![ExpTerm {
                rate: 0.0,
                coeff: Mat::identity(1, 1),
            }],
        );
        assert!(matches!(bad, Err(Error::KernelKind(_))));
    }

    #[test]
    fn domain_error_below_diagonal() {
        assert!(matches!(
            delay_kernel().eval(1.0, 2.0),
            Err(Error::KernelDomain { .. })
        ));
    }

    #[test]
    fn memory_bound_zero_kernel() {
        let c = Mat::identity(1, 1);
        let m = Kernel::zero(1)
            .memory_bound(&c, &c, &c, 0.0, 5.0, 1e-2)
            .unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn memory_bound_delay_example_is_one() {
        // C = (1, 0, -2), R = B~ (CB)^{-1} = (0, 0, -1/2)^T, P = 1.
        let c = mat_from_rows(&[&[1.0, 0.0, -2.0]]);
        let r = mat_from_rows(&[&[0.0], &[0.0], &[-0.5]]);
        let p = Mat::identity(1, 1);
        for &h in &[1e-2, 1e-3] {
            let m = delay_kernel()
                .memory_bound(&c, &r, &p, 0.0, 3.0, h)
                .unwrap();
            assert!((m - 1.0).abs() <= 2.0 * h, "h = {h}: M = {m}");
        }
    }

    #[test]
    fn memory_bound_stabilises_past_delay() {
        let c = mat_from_rows(&[&[1.0, 0.0, -2.0]]);
        let r = mat_from_rows(&[&[0.0], &[0.0], &[-0.5]]);
        let p = Mat::identity(1, 1);
        let k = delay_kernel();
        let m1 = k.memory_bound(&c, &r, &p, 0.0, 1.5, 1e-3).unwrap();
        let m2 = k.memory_bound(&c, &r, &p, 0.0, 4.0, 1e-3).unwrap();
        assert_eq!(m1, m2);
        let m0 = k.memory_bound(&c, &r, &p, 0.0, 0.5, 1e-3).unwrap();
        assert!(m0 < m1);
    }

    #[test]
    fn memory_bound_exponential_converges_first_order() {
        // int_0^inf 2 e^{-3 s} ds = 2/3
        let k = Kernel::exponential_series(
            1,
            vec![ExpTerm {
                rate: 3.0,
                coeff: Mat::from_element(1, 1, 2.0),
            }],
        )
        .unwrap();
        let one = Mat::identity(1, 1);
        let exact = 2.0 / 3.0 * (1.0 - (-3.0f64 * 20.0).exp());
        let e1 = (k.memory_bound(&one, &one, &one, 0.0, 20.0, 1e-2).unwrap() - exact).abs();
        let e2 = (k.memory_bound(&one, &one, &one, 0.0, 20.0, 5e-3).unwrap() - exact).abs();
        assert!(e1 < 2e-2);
        let ratio = e1 / e2;
        assert!((1.8..2.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn memory_bound_dense_matches_stationary() {
        let phi = |lag: f64| Mat::from_element(1, 1, (-lag).exp() * 0.5);
        let conv = Kernel::convolution(1, phi);
        let dense = Kernel::dense(1, move |t, tau| phi(t - tau));
        let one = Mat::identity(1, 1);
        let a = conv.memory_bound(&one, &one, &one, 0.0, 2.0, 1e-2).unwrap();
        let b = dense
            .memory_bound(&one, &one, &one, 0.0, 2.0, 1e-2)
            .unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }
}
