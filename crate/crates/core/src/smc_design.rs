//! Sliding-mode controller design for linear plants with distributed input
//! delay,
//!
//! ```text
//! x' = A x + B (u + gamma) + p + int_{t0}^t Phi(t,tau) B~ (u + gamma)(tau) dtau,   y = C x,
//! ```
//!
//! under the unit-vector feedback `u = -rho (CB)^{-1} y / ||y||_P`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FeedbackLaw, PiecewiseAffineField, SwitchingSurface};
use crate::integrator::AffineIde;
use crate::kernels::Kernel;
use crate::linalg::{
    inverse, max_symmetric_eigenvalue, min_symmetric_eigenvalue, rank, spectral_norm, Mat, Vector,
    WeightedNorm,
};
use crate::signal::Signal;

pub const DEFAULT_MARGIN: f64 = 0.1;

/// `M` this close to 1 is not separable from 1 by the quadrature, and the
/// gain formula diverges there anyway.
pub const MEMORY_BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LinearIdePlant {
    pub a: Mat,
    pub b: Mat,
    pub b_tilde: Mat,
    pub c: Mat,
    pub kernel: Kernel,
    /// Matched perturbation, one signal per input.
    pub gamma: Vec<Signal>,
    /// Unmatched perturbation, one signal per state.
    pub p: Vec<Signal>,
    pub gamma_bar: f64,
    pub p_bar: f64,
}

fn euclidean_bound(signals: &[Signal]) -> f64 {
    signals
        .iter()
        .map(|s| s.sup_bound().powi(2))
        .sum::<f64>()
        .sqrt()
}

impl LinearIdePlant {
    /// Unperturbed plant; checks dimensions and `det(CB) != 0`.
    pub fn new(a: Mat, b: Mat, b_tilde: Mat, c: Mat, kernel: Kernel) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        if !a.is_square()
            || b.nrows() != n
            || b_tilde.shape() != (n, m)
            || c.shape() != (m, n)
            || kernel.dim() != n
        {
            return Err(Error::Dimension(format!(
                "A {:?}, B {:?}, B~ {:?}, C {:?}, kernel {}x{}",
                a.shape(),
                b.shape(),
                b_tilde.shape(),
                c.shape(),
                kernel.dim(),
                kernel.dim()
            )));
        }
        let cb = &c * &b;
        let scale = spectral_norm(&c) * spectral_norm(&b);
        if cb.determinant().abs() <= 1e-12 * scale.powi(m as i32) {
            return Err(Error::Singular(format!("CB = {cb}")));
        }
        Ok(Self {
            a,
            b,
            b_tilde,
            c,
            kernel,
            gamma: vec![Signal::Zero; m],
            p: vec![Signal::Zero; n],
            gamma_bar: 0.0,
            p_bar: 0.0,
        })
    }

    /// Sets `gamma` and the bound `gamma_bar = ||(sup |gamma_j|)_j||`.
    pub fn with_gamma(mut self, gamma: Vec<Signal>) -> Result<Self> {
        if gamma.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "{} gamma signals for {} inputs",
                gamma.len(),
                self.input_dim()
            )));
        }
        self.gamma_bar = euclidean_bound(&gamma);
        self.gamma = gamma;
        Ok(self)
    }

    pub fn with_p(mut self, p: Vec<Signal>) -> Result<Self> {
        if p.len() != self.state_dim() {
            return Err(Error::Dimension(format!(
                "{} p signals for {} states",
                p.len(),
                self.state_dim()
            )));
        }
        self.p_bar = euclidean_bound(&p);
        self.p = p;
        Ok(self)
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Result<Self> {
        if kernel.dim() != self.state_dim() {
            return Err(Error::Dimension("kernel dimension".into()));
        }
        self.kernel = kernel;
        Ok(self)
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn cb(&self) -> Mat {
        &self.c * &self.b
    }

    pub fn gamma_at(&self, t: f64) -> Vector {
        Vector::from_iterator(self.gamma.len(), self.gamma.iter().map(|g| g.eval(t)))
    }

    pub fn p_at(&self, t: f64) -> Vector {
        Vector::from_iterator(self.p.len(), self.p.iter().map(|g| g.eval(t)))
    }

    /// The closed loop as an IDE: `f = A x + B (u + gamma) + p`,
    /// `f~ = B~ (u + gamma)`, output `y = C x`.
    pub fn closed_loop(&self, law: FeedbackLaw) -> AffineIde {
        let a = self.a.clone();
        let b = self.b.clone();
        let gamma = self.gamma.clone();
        let p = self.p.clone();
        let drift = move |t: f64, x: &Vector| {
            let g = Vector::from_iterator(gamma.len(), gamma.iter().map(|s| s.eval(t)));
            let pv = Vector::from_iterator(p.len(), p.iter().map(|s| s.eval(t)));
            &a * x + &b * g + pv
        };
        let b_in = self.b.clone();
        let field = PiecewiseAffineField::new(
            self.state_dim(),
            drift,
            move |_, _| b_in.clone(),
            law,
            SwitchingSurface::linear(self.c.clone()),
        );
        let bt = self.b_tilde.clone();
        let gamma = self.gamma.clone();
        let bt_in = self.b_tilde.clone();
        let mut sys = AffineIde::memoryless(field).with_output(self.c.clone());
        if !self.kernel.is_trivially_zero() {
            sys = sys
                .with_memory_drift(move |t, _| {
                    let g = Vector::from_iterator(gamma.len(), gamma.iter().map(|s| s.eval(t)));
                    &bt * g
                })
                .with_memory_input(move |_, _| bt_in.clone());
        }
        sys
    }
}

/// `Lambda` with `C A = Lambda C`, from the least-squares fit `(CA) C^+`.
pub fn extract_lambda(a: &Mat, c: &Mat) -> Result<Mat> {
    if rank(c, 1e-12) < c.nrows() {
        return Err(Error::Rank(format!(
            "C ({}x{}) is not full row rank",
            c.nrows(),
            c.ncols()
        )));
    }
    let ca = c * a;
    let pinv = c
        .clone()
        .pseudo_inverse(1e-14)
        .map_err(|e| Error::Rank(e.to_string()))?;
    let lambda = &ca * pinv;
    let residual = spectral_norm(&(&ca - &lambda * c));
    if residual > 1e-10 * spectral_norm(&ca) {
        return Err(Error::Infeasible(format!(
            "no Lambda with CA = Lambda C (residual {residual:e})"
        )));
    }
    Ok(lambda)
}

fn is_hurwitz(m: &Mat) -> bool {
    m.complex_eigenvalues().iter().all(|l| l.re < 0.0)
}

/// Solves `L' P + P L = -Q` through the Kronecker form.
pub fn lyapunov(lambda: &Mat, q: &Mat) -> Result<Mat> {
    let m = lambda.nrows();
    let eye = Mat::identity(m, m);
    let lt = lambda.transpose();
    let op = eye.kronecker(&lt) + lt.kronecker(&eye);
    let rhs = Vector::from_column_slice((-q).as_slice());
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Lyapunov operator".into()))?;
    let p = Mat::from_column_slice(m, m, sol.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

/// Checks `P > 0` and `L' P + P L <= 0` (largest eigenvalue at most 1e-10).
pub fn verify_lmi(lambda: &Mat, p: &Mat) -> Result<()> {
    let min_p = min_symmetric_eigenvalue(p);
    if !(min_p > 0.0) {
        return Err(Error::Infeasible(format!(
            "P is not positive definite (min eigenvalue {min_p:e})"
        )));
    }
    let lhs = lambda.transpose() * p + p * lambda;
    let worst = max_symmetric_eigenvalue(&lhs);
    if worst > 1e-10 {
        return Err(Error::Infeasible(format!(
            "Lambda'P + P Lambda has eigenvalue {worst:e} > 0"
        )));
    }
    Ok(())
}

/// `P = I` when `Lambda + Lambda' <= 0`; a Lyapunov solution for Hurwitz
/// `Lambda` with `m <= 2`; otherwise the supplied `P`, if it verifies.
pub fn solve_lmi(lambda: &Mat, user_p: Option<&Mat>) -> Result<Mat> {
    let m = lambda.nrows();
    if max_symmetric_eigenvalue(&(lambda + lambda.transpose())) <= 1e-10 {
        return Ok(Mat::identity(m, m));
    }
    if m <= 2 && is_hurwitz(lambda) {
        let p = lyapunov(lambda, &Mat::identity(m, m))?;
        verify_lmi(lambda, &p)?;
        return Ok(p);
    }
    match user_p {
        Some(p) => {
            verify_lmi(lambda, p)?;
            Ok(p.clone())
        }
        None => Err(Error::Infeasible(format!(
            "Lambda + Lambda' has eigenvalue {:e} > 0 and no verified P is available",
            max_symmetric_eigenvalue(&(lambda + lambda.transpose()))
        ))),
    }
}

/// Closed-form gain
/// `rho = (sqrt||P|| (||CB|| gb + ||C|| pb + M ||CB|| gb) + delta) / (1 - M)`.
pub fn design_gain(plant: &LinearIdePlant, p: &Mat, m_bound: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Param(format!(
            "margin delta must be positive, got {delta}"
        )));
    }
    if !(m_bound < 1.0 - MEMORY_BOUND_SLACK) {
        return Err(Error::Infeasible(format!(
            "memory bound M = {m_bound} is not below 1; supply a gain override"
        )));
    }
    let cb = spectral_norm(&plant.cb());
    let c = spectral_norm(&plant.c);
    let root = spectral_norm(p).sqrt();
    Ok(
        (root * (cb * plant.gamma_bar + c * plant.p_bar + m_bound * cb * plant.gamma_bar) + delta)
            / (1.0 - m_bound),
    )
}

/// `T_max = ||C x0||_P / delta`.
pub fn reaching_time_bound(x0: &Vector, c: &Mat, p: &Mat, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Param(format!(
            "margin delta must be positive, got {delta}"
        )));
    }
    Ok(WeightedNorm::new(p)?.vector_norm(&(c * x0)) / delta)
}

/// `Pi = I - B (CB)^{-1} C`.
pub fn projector(b: &Mat, c: &Mat) -> Result<Mat> {
    let cb_inv = inverse(&(c * b), "CB")?;
    Ok(Mat::identity(b.nrows(), b.nrows()) - b * cb_inv * c)
}

/// Unit-vector law `u = -rho (CB)^{-1} y / ||y||_P`, with `u = 0` selected at
/// `y = 0` during simulation. Its regularization at `y = 0` is the image of
/// the closed unit `P`-ball under `-rho (CB)^{-1}`.
pub fn smc_feedback(rho: f64, cb: &Mat, p: &Mat) -> Result<FeedbackLaw> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Param(format!(
            "gain rho must be positive and finite, got {rho}"
        )));
    }
    Ok(FeedbackLaw::UnitVector {
        rho,
        cb_inv: inverse(cb, "CB")?,
        norm: WeightedNorm::new(p)?,
    })
}

#[derive(Debug, Clone)]
pub struct DesignOptions {
    pub delta: f64,
    pub user_p: Option<Mat>,
    pub rho_override: Option<f64>,
    pub t0: f64,
    /// Horizon of the memory-bound supremum.
    pub horizon: f64,
    pub h: f64,
    pub x0: Option<Vector>,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            delta: DEFAULT_MARGIN,
            user_p: None,
            rho_override: None,
            t0: 0.0,
            horizon: 5.0,
            h: 1e-3,
            x0: None,
        }
    }
}

/// Summary of a design run; matrices are stored row-major for readable JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub lambda: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub memory_bound: f64,
    /// Closed-form gain, when `M < 1`.
    pub rho_formula: Option<f64>,
    pub rho_override: Option<f64>,
    /// The gain used by the controller: override if given, else the formula.
    pub rho: Option<f64>,
    pub delta: f64,
    pub reaching_time_bound: Option<f64>,
    pub feasible: bool,
    pub diagnostics: Vec<String>,
}

pub fn rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Mat {
    let ncols = rows.first().map_or(0, |r| r.len());
    Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

impl DesignResult {
    pub fn p_matrix(&self) -> Mat {
        from_rows(&self.p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Runs the full design pipeline. Structural failures (rank, singular CB)
/// are errors; violated design conditions are reported as infeasible.
pub fn design(plant: &LinearIdePlant, opts: &DesignOptions) -> Result<DesignResult> {
    let m = plant.input_dim();
    let mut diagnostics = Vec::new();
    let mut feasible = true;
    let lambda = match extract_lambda(&plant.a, &plant.c) {
        Ok(l) => l,
        Err(Error::Infeasible(msg)) => {
            diagnostics.push(msg);
            feasible = false;
            Mat::zeros(m, m)
        }
        Err(e) => return Err(e),
    };
    let p = match solve_lmi(&lambda, opts.user_p.as_ref()) {
        Ok(p) => p,
        Err(Error::Infeasible(msg)) => {
            diagnostics.push(msg);
            feasible = false;
            opts.user_p.clone().unwrap_or_else(|| Mat::identity(m, m))
        }
        Err(e) => return Err(e),
    };
    let r = &plant.b_tilde * inverse(&plant.cb(), "CB")?;
    let horizon = match plant.kernel.delay_bound() {
        Some(d) => opts.horizon.max(d + opts.h),
        None => opts.horizon,
    };
    let memory_bound = plant
        .kernel
        .memory_bound(&plant.c, &r, &p, opts.t0, horizon, opts.h)?;
    let rho_formula = match design_gain(plant, &p, memory_bound, opts.delta) {
        Ok(rho) => Some(rho),
        Err(Error::Infeasible(msg)) => {
            diagnostics.push(msg);
            feasible = false;
            None
        }
        Err(e) => return Err(e),
    };
    if let (Some(over), Some(formula)) = (opts.rho_override, rho_formula) {
        if over < formula {
            diagnostics.push(format!(
                "override rho = {over} is below the closed-form gain {formula}"
            ));
            feasible = false;
        }
    }
    let reaching = match &opts.x0 {
        Some(x0) => Some(reaching_time_bound(x0, &plant.c, &p, opts.delta)?),
        None => None,
    };
    Ok(DesignResult {
        lambda: rows(&lambda),
        p: rows(&p),
        memory_bound,
        rho_formula,
        rho_override: opts.rho_override,
        rho: opts.rho_override.or(rho_formula),
        delta: opts.delta,
        reaching_time_bound: reaching,
        feasible,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{mat_from_rows, vector};
    use proptest::prelude::*;

    fn example_a() -> Mat {
        mat_from_rows(&[&[-2.0, 4.0, 2.0], &[0.0, -3.0, 1.0], &[-1.0, 2.0, 1.0]])
    }

    fn example_b() -> Mat {
        mat_from_rows(&[&[0.0], &[0.0], &[1.0]])
    }

    fn example_c() -> Mat {
        mat_from_rows(&[&[1.0, 0.0, -2.0]])
    }

    #[test]
    fn lambda_of_delay_example_is_zero() {
        // C A = (1*(-2) + (-2)(-1), 1*4 + (-2)*2, 1*2 + (-2)*1) = (0, 0, 0)
        let lambda = extract_lambda(&example_a(), &example_c()).unwrap();
        assert!(lambda.amax() < 1e-14);
    }

    #[test]
    fn lambda_cases() {
        let c = mat_from_rows(&[&[1.0, 2.0, 0.0], &[0.0, 1.0, -1.0]]);
        let lambda = extract_lambda(&Mat::identity(3, 3), &c).unwrap();
        assert!((lambda - Mat::identity(2, 2)).amax() < 1e-12);

        let a = mat_from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(
            extract_lambda(&a, &mat_from_rows(&[&[1.0, 0.0]])),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            extract_lambda(
                &Mat::identity(2, 2),
                &mat_from_rows(&[&[1.0, 2.0], &[2.0, 4.0]])
            ),
            Err(Error::Rank(_))
        ));
    }

    #[test]
    fn lmi_cases() {
        assert_eq!(
            solve_lmi(&Mat::zeros(1, 1), None).unwrap(),
            Mat::identity(1, 1)
        );
        assert_eq!(
            solve_lmi(&Mat::from_element(1, 1, -1.0), None).unwrap(),
            Mat::identity(1, 1)
        );
        let skew = mat_from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let p = solve_lmi(&skew, None).unwrap();
        assert_eq!(p, Mat::identity(2, 2));
        assert!(max_symmetric_eigenvalue(&(skew.transpose() * &p + &p * &skew)) <= 1e-10);
    }

    #[test]
    fn lmi_lyapunov_branch() {
        // Hurwitz but with Lambda + Lambda' indefinite
        let lambda = mat_from_rows(&[&[-1.0, 10.0], &[0.0, -1.0]]);
        assert!(max_symmetric_eigenvalue(&(&lambda + lambda.transpose())) > 0.0);
        let p = solve_lmi(&lambda, None).unwrap();
        let lhs = lambda.transpose() * &p + &p * &lambda;
        assert!((lhs + Mat::identity(2, 2)).amax() < 1e-10);
    }

    #[test]
    fn lmi_infeasible_for_unstable_lambda() {
        assert!(matches!(
            solve_lmi(&Mat::from_element(1, 1, 0.5), None),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn gain_arithmetic() {
        let plant = LinearIdePlant::new(
            Mat::zeros(1, 1),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            Kernel::zero(1),
        )
        .unwrap();
        let p = Mat::identity(1, 1);
        assert_eq!(design_gain(&plant, &p, 0.0, 0.3).unwrap(), 0.3);
        let plant = plant.with_gamma(vec![Signal::constant(1.0)]).unwrap();
        // (1 + 0 + 0.5 + 0.5) / 0.5
        assert!((design_gain(&plant, &p, 0.5, 0.5).unwrap() - 4.0).abs() < 1e-12);
        assert!(matches!(
            design_gain(&plant, &p, 1.0, 0.5),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn reaching_bound_arithmetic() {
        let p = Mat::identity(1, 1);
        let c = Mat::identity(1, 1);
        assert_eq!(
            reaching_time_bound(&vector(&[0.0]), &c, &p, 0.5).unwrap(),
            0.0
        );
        assert_eq!(
            reaching_time_bound(&vector(&[2.0]), &c, &p, 0.5).unwrap(),
            4.0
        );
    }

    #[test]
    fn projector_of_delay_example() {
        let pi = projector(&example_b(), &example_c()).unwrap();
        let expected = mat_from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.5, 0.0, 0.0]]);
        assert!((&pi - expected).amax() < 1e-15);
        assert!((&pi * example_b()).amax() < 1e-12);
        assert!((example_c() * &pi).amax() < 1e-12);
        assert!((&pi * &pi - &pi).amax() < 1e-12);
        let eye = projector(&Mat::identity(3, 3), &Mat::identity(3, 3)).unwrap();
        assert!(eye.amax() < 1e-15);
    }

    #[test]
    fn feedback_value() {
        let law = smc_feedback(4.0, &Mat::from_element(1, 1, -2.0), &Mat::identity(1, 1)).unwrap();
        let x = vector(&[]);
        let policy = crate::fields::SelectionPolicy::Pointwise;
        assert_eq!(law.apply(0.0, &x, &vector(&[0.3]), &policy), vector(&[2.0]));
        assert_eq!(law.apply(0.0, &x, &vector(&[0.0]), &policy), vector(&[0.0]));
        assert_eq!(law.magnitude_bound(), Some(2.0));
    }

    #[test]
    fn delay_example_design_needs_override() {
        let kernel = Kernel::window(3, 1.0, 1.0).unwrap();
        let plant = LinearIdePlant::new(example_a(), example_b(), example_b(), example_c(), kernel)
            .unwrap()
            .with_gamma(vec![Signal::cosine(0.5, 2.0)])
            .unwrap();
        let opts = DesignOptions {
            rho_override: Some(4.0),
            x0: Some(vector(&[1.0, 1.0, -1.2])),
            ..DesignOptions::default()
        };
        let result = design(&plant, &opts).unwrap();
        assert!(!result.feasible);
        assert!((result.memory_bound - 1.0).abs() <= 2e-3);
        assert_eq!(result.rho, Some(4.0));
        assert!(result.rho_formula.is_none());
        let json = result.to_json().unwrap();
        let back: DesignResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, result);
    }

    #[test]
    fn feasible_variant_design() {
        let kernel = Kernel::window(3, 1.0, 0.5).unwrap();
        let plant = LinearIdePlant::new(example_a(), example_b(), example_b(), example_c(), kernel)
            .unwrap()
            .with_gamma(vec![Signal::cosine(0.5, 2.0)])
            .unwrap();
        let result = design(&plant, &DesignOptions::default()).unwrap();
        assert!(result.feasible, "{:?}", result.diagnostics);
        assert!((result.memory_bound - 0.5).abs() < 1e-3);
        // (2*0.5 + 0.5*2*0.5 + 0.1) / 0.5 = 3.2 at M = 0.5
        let expected = (1.0 + result.memory_bound * 1.0 + 0.1) / (1.0 - result.memory_bound);
        assert!((result.rho.unwrap() - expected).abs() < 1e-12);
        assert!((expected - 3.2).abs() < 1e-2);
    }

    proptest! {
        #[test]
        fn projector_is_idempotent(entries in proptest::collection::vec(-2.0f64..2.0, 12)) {
            let b = Mat::from_column_slice(4, 1, &entries[0..4]);
            let c = Mat::from_row_slice(1, 4, &entries[4..8]);
            let cb = (&c * &b)[(0, 0)];
            prop_assume!(cb.abs() > 0.1);
            let pi = projector(&b, &c).unwrap();
            let scale = 1.0 + spectral_norm(&pi).powi(2);
            prop_assert!((&pi * &pi - &pi).amax() <= 1e-12 * scale);
            prop_assert!((&pi * &b).amax() <= 1e-12 * scale);
            prop_assert!((&c * &pi).amax() <= 1e-12 * scale);
        }
    }
}
