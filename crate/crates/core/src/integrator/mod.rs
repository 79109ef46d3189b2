//! Explicit Euler time stepping for integro-differential equations
//!
//! ```text
//! x_{k+1} = x_k + h f(t_k, x_k) + h I_k,   I_k = h sum_{i<=k} Phi(t_k, t_i) f~(t_i, x_i)
//! ```
//!
//! together with the augmented-ODE oracle for exponential-series kernels and
//! the post-processing filters used to read off the equivalent control.

mod trajectory;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use trajectory::{fmt_f64, Trajectory};

use crate::error::{Error, Result};
use crate::fields::{DriftFn, InputMapFn, PiecewiseAffineField, SelectionPolicy};
use crate::kernels::{GridKernel, Kernel};
use crate::linalg::{Mat, Vector};
use crate::signal::Signal;

/// How the memory integral is accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HistoryMode {
    /// Direct rectangle sum over the stored history, `O(k)` per step.
    #[default]
    FullHistory,
    /// Per-term recurrence for exponential-series kernels, `O(terms)` per step.
    ExponentialRecurrence,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub t0: f64,
    pub horizon: f64,
    pub h: f64,
    pub x0: Vector,
    pub selection: SelectionPolicy,
    pub history: HistoryMode,
}

impl SimConfig {
    pub fn new(t0: f64, horizon: f64, h: f64, x0: Vector) -> Self {
        Self {
            t0,
            horizon,
            h,
            x0,
            selection: SelectionPolicy::Pointwise,
            history: HistoryMode::FullHistory,
        }
    }

    pub fn with_history(mut self, history: HistoryMode) -> Self {
        self.history = history;
        self
    }

    pub fn with_selection(mut self, selection: SelectionPolicy) -> Self {
        self.selection = selection;
        self
    }

    /// Number of Euler steps, `floor(horizon / h)` up to round-off in the ratio.
    pub fn steps(&self) -> Result<usize> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::Param(format!(
                "step h must be positive, got {}",
                self.h
            )));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::Param(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        let ratio = self.horizon / self.h;
        if ratio > (usize::MAX / 2) as f64 {
            return Err(Error::Param(format!(
                "{ratio:e} steps do not fit in memory"
            )));
        }
        Ok((ratio * (1.0 + 1e-12)).floor() as usize)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.h
    }
}

/// A (possibly closed-loop) IDE `x' = f(t,x,u) + int Phi(t,tau) f~(tau,x(tau),u(tau)) dtau`.
pub trait IdeSystem {
    fn state_dim(&self) -> usize;

    fn input_dim(&self) -> usize {
        0
    }

    fn output_dim(&self) -> usize {
        0
    }

    /// Input applied at `(t, x)`; set-valued points are resolved by `policy`.
    fn input(&self, _t: f64, _x: &Vector, _policy: &SelectionPolicy) -> Vector {
        Vector::zeros(0)
    }

    fn rhs(&self, t: f64, x: &Vector, u: &Vector) -> Vector;

    fn memory_rhs(&self, t: f64, x: &Vector, u: &Vector) -> Vector;

    fn output(&self, _t: f64, _x: &Vector) -> Vector {
        Vector::zeros(0)
    }
}

type StateFn = dyn Fn(f64, &Vector) -> Vector + Send + Sync;

/// Open-loop IDE given by two closures `f(t,x)` and `f~(t,x)`.
#[derive(Clone)]
pub struct FnIde {
    dim: usize,
    f: Arc<StateFn>,
    memory: Arc<StateFn>,
}

impl FnIde {
    pub fn new<F, G>(dim: usize, f: F, memory: G) -> Self
    where
        F: Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
        G: Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
    {
        Self {
            dim,
            f: Arc::new(f),
            memory: Arc::new(memory),
        }
    }
}

impl fmt::Debug for FnIde {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnIde(n={})", self.dim)
    }
}

impl IdeSystem for FnIde {
    fn state_dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, t: f64, x: &Vector, _u: &Vector) -> Vector {
        (self.f)(t, x)
    }

    fn memory_rhs(&self, t: f64, x: &Vector, _u: &Vector) -> Vector {
        (self.memory)(t, x)
    }
}

/// Closed loop of an affine field with an affine memory channel:
/// `f = a + b u`, `f~ = a~ + b~ u~`.
///
/// `u~` is the applied input unless `memory_selection` is set, in which case
/// the memory channel draws its own selection from the regularized feedback
/// (this is how distinct Filippov solutions are produced).
#[derive(Clone)]
pub struct AffineIde {
    pub field: PiecewiseAffineField,
    memory_drift: Option<Arc<DriftFn>>,
    memory_input: Option<Arc<InputMapFn>>,
    pub memory_selection: Option<SelectionPolicy>,
    pub output_map: Option<Mat>,
}

impl fmt::Debug for AffineIde {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AffineIde")
            .field("field", &self.field)
            .field("memory_drift", &self.memory_drift.is_some())
            .field("memory_input", &self.memory_input.is_some())
            .field("memory_selection", &self.memory_selection)
            .finish()
    }
}

impl AffineIde {
    /// No memory channel: `f~ = 0`.
    pub fn memoryless(field: PiecewiseAffineField) -> Self {
        Self {
            field,
            memory_drift: None,
            memory_input: None,
            memory_selection: None,
            output_map: None,
        }
    }

    pub fn with_memory_drift<F>(mut self, drift: F) -> Self
    where
        F: Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
    {
        self.memory_drift = Some(Arc::new(drift));
        self
    }

    pub fn with_memory_input<F>(mut self, input_map: F) -> Self
    where
        F: Fn(f64, &Vector) -> Mat + Send + Sync + 'static,
    {
        self.memory_input = Some(Arc::new(input_map));
        self
    }

    pub fn with_memory_selection(mut self, policy: SelectionPolicy) -> Self {
        self.memory_selection = Some(policy);
        self
    }

    pub fn with_output(mut self, c: Mat) -> Self {
        self.output_map = Some(c);
        self
    }
}

impl IdeSystem for AffineIde {
    fn state_dim(&self) -> usize {
        self.field.dim()
    }

    fn input_dim(&self) -> usize {
        self.field.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.output_map.as_ref().map_or(0, |c| c.nrows())
    }

    fn input(&self, t: f64, x: &Vector, policy: &SelectionPolicy) -> Vector {
        self.field.control(t, x, policy)
    }

    fn rhs(&self, t: f64, x: &Vector, u: &Vector) -> Vector {
        self.field.drift(t, x) + self.field.input_map(t, x) * u
    }

    fn memory_rhs(&self, t: f64, x: &Vector, u: &Vector) -> Vector {
        let mut out = match &self.memory_drift {
            Some(a) => a(t, x),
            None => Vector::zeros(self.field.dim()),
        };
        if let Some(b) = &self.memory_input {
            match &self.memory_selection {
                Some(policy) => out += b(t, x) * self.field.control(t, x, policy),
                None => out += b(t, x) * u,
            }
        }
        out
    }

    fn output(&self, _t: f64, x: &Vector) -> Vector {
        match &self.output_map {
            Some(c) => c * x,
            None => Vector::zeros(0),
        }
    }
}

fn check_dims<S: IdeSystem + ?Sized>(sys: &S, kernel: &Kernel, cfg: &SimConfig) -> Result<()> {
    let n = sys.state_dim();
    if cfg.x0.len() != n {
        return Err(Error::Dimension(format!(
            "x0 has length {}, system has {n} states",
            cfg.x0.len()
        )));
    }
    if kernel.dim() != n {
        return Err(Error::Dimension(format!(
            "kernel is {0}x{0}, system has {n} states",
            kernel.dim()
        )));
    }
    Ok(())
}

fn finite_or_err(x: &Vector, step: usize, t: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step, t })
    }
}

/// Explicit Euler with the rectangle-rule memory sum.
pub fn euler_ide<S: IdeSystem + ?Sized>(
    sys: &S,
    kernel: &Kernel,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    check_dims(sys, kernel, cfg)?;
    let steps = cfg.steps()?;
    let n = sys.state_dim();
    let h = cfg.h;
    let skip_memory = kernel.is_trivially_zero();

    enum Memory<'a> {
        None,
        Full(GridKernel<'a>, Vec<Vector>),
        Recurrence(Vec<(f64, Mat, Vector)>),
    }
    let mut memory = if skip_memory {
        Memory::None
    } else {
        match cfg.history {
            HistoryMode::FullHistory => Memory::Full(
                GridKernel::new(kernel, cfg.t0, h, steps),
                Vec::with_capacity(steps + 1),
            ),
            HistoryMode::ExponentialRecurrence => {
                let terms = kernel.exp_terms().ok_or_else(|| {
                    Error::KernelKind(
                        "exponential recurrence needs an exponential-series kernel".into(),
                    )
                })?;
                Memory::Recurrence(
                    terms
                        .iter()
                        .map(|t| ((-t.rate * h).exp(), t.coeff.clone(), Vector::zeros(n)))
                        .collect(),
                )
            }
        }
    };

    let mut traj = Trajectory::with_capacity(cfg.t0, h, steps + 1);
    let mut x = cfg.x0.clone();
    for k in 0..=steps {
        let t = cfg.time(k);
        let u = sys.input(t, &x, &cfg.selection);
        let y = sys.output(t, &x);
        if k == steps {
            traj.push(x, u, y);
            break;
        }
        let f = sys.rhs(t, &x, &u);
        let integral = match &mut memory {
            Memory::None => Vector::zeros(n),
            Memory::Full(grid, history) => {
                history.push(sys.memory_rhs(t, &x, &u));
                grid.rectangle_sum(k, history)
            }
            Memory::Recurrence(terms) => {
                let ft = sys.memory_rhs(t, &x, &u);
                let mut acc = Vector::zeros(n);
                for (decay, coeff, w) in terms.iter_mut() {
                    *w *= *decay;
                    w.gemv(h, coeff, &ft, 1.0);
                    acc += &*w;
                }
                acc
            }
        };
        let next = &x + (f + integral) * h;
        traj.push(x, u, y);
        finite_or_err(&next, k + 1, cfg.time(k + 1))?;
        x = next;
    }
    Ok(traj)
}

/// Plain Euler on the memoryless system (`Phi = 0`).
pub fn euler_ode<S: IdeSystem + ?Sized>(sys: &S, cfg: &SimConfig) -> Result<Trajectory> {
    euler_ide(sys, &Kernel::zero(sys.state_dim()), cfg)
}

/// Oracle for exponential-series kernels: Euler on the augmented ODE
/// `z_i' = -mu_i z_i + c_i f~`, `x' = f + sum_i z_i`, `z_i(0) = 0`.
pub fn augment_exponential<S: IdeSystem + ?Sized>(
    sys: &S,
    kernel: &Kernel,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    check_dims(sys, kernel, cfg)?;
    let terms = kernel.exp_terms().ok_or_else(|| {
        Error::KernelKind("augmented oracle needs an exponential-series kernel".into())
    })?;
    let steps = cfg.steps()?;
    let n = sys.state_dim();
    let h = cfg.h;
    if let Some(worst) = terms.iter().map(|t| t.rate * h).reduce(f64::max) {
        if worst >= 2.0 {
            return Err(Error::Stability(format!(
                "h * mu_max = {worst} >= 2 in the augmented ODE"
            )));
        }
    }
    let mut z: Vec<Vector> = vec![Vector::zeros(n); terms.len()];
    let mut traj = Trajectory::with_capacity(cfg.t0, h, steps + 1);
    let mut x = cfg.x0.clone();
    for k in 0..=steps {
        let t = cfg.time(k);
        let u = sys.input(t, &x, &cfg.selection);
        let y = sys.output(t, &x);
        if k == steps {
            traj.push(x, u, y);
            break;
        }
        let f = sys.rhs(t, &x, &u);
        let ft = if terms.is_empty() {
            Vector::zeros(n)
        } else {
            sys.memory_rhs(t, &x, &u)
        };
        let mut sum = Vector::zeros(n);
        for (term, zi) in terms.iter().zip(z.iter_mut()) {
            sum += &*zi;
            let dz = &term.coeff * &ft - &*zi * term.rate;
            *zi += dz * h;
        }
        let next = &x + (f + sum) * h;
        traj.push(x, u, y);
        finite_or_err(&next, k + 1, cfg.time(k + 1))?;
        x = next;
    }
    Ok(traj)
}

/// First-order low-pass filter `eps u_eps' = -u_eps + u`, explicit Euler,
/// started from zero.
pub fn low_pass_filter(u: &[Vector], eps: f64, h: f64) -> Result<Vec<Vector>> {
    if !(eps > 0.0) || !(h > 0.0) {
        return Err(Error::Param(format!(
            "filter needs eps > 0 and h > 0 (eps = {eps}, h = {h})"
        )));
    }
    let r = h / eps;
    if r > 1.0 {
        return Err(Error::Stability(format!(
            "filter ratio h/eps = {r} exceeds 1"
        )));
    }
    let mut out = Vec::with_capacity(u.len());
    let Some(first) = u.first() else {
        return Ok(out);
    };
    let mut state = Vector::zeros(first.len());
    for uk in u {
        out.push(state.clone());
        state = &state + (uk - &state) * r;
    }
    Ok(out)
}

/// Sliding indicator
/// `delta_k = CB (u_eps_k + gamma_k) + h sum_{i<=k} C Phi(t_k,t_i) B~ (u_i + gamma_i)`.
///
/// `gamma` holds one signal per input channel.
pub fn sliding_indicator(
    traj: &Trajectory,
    kernel: &Kernel,
    cb: &Mat,
    b_tilde: &Mat,
    c: &Mat,
    gamma: &[Signal],
    u_eps: &[Vector],
) -> Result<Vec<Vector>> {
    let m = cb.ncols();
    if gamma.len() != m || b_tilde.ncols() != m || u_eps.len() != traj.len() {
        return Err(Error::Dimension(format!(
            "indicator: m = {m}, {} gamma signals, B~ has {} columns, {} filtered samples for {} nodes",
            gamma.len(),
            b_tilde.ncols(),
            u_eps.len(),
            traj.len()
        )));
    }
    let steps = traj.len().saturating_sub(1);
    let gamma_at = |t: f64| Vector::from_fn(m, |j, _| gamma[j].eval(t));
    let driven: Vec<Vector> = (0..traj.len())
        .map(|k| &traj.inputs[k] + gamma_at(traj.time(k)))
        .collect();
    let skip = kernel.is_trivially_zero();
    let grid = GridKernel::projected(
        kernel,
        traj.t0(),
        traj.h(),
        steps,
        Some(c.clone()),
        Some(b_tilde.clone()),
    );
    Ok((0..traj.len())
        .map(|k| {
            let local = cb * (&u_eps[k] + gamma_at(traj.time(k)));
            if skip {
                local
            } else {
                local + grid.rectangle_sum(k, &driven)
            }
        })
        .collect())
}
