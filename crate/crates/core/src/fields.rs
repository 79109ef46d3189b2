//! Piecewise-affine discontinuous vector fields `a(t,x) + b(t,x) u(t,x)`,
//! their Filippov regularization, and sliding/switching checks on a smooth
//! switching surface `s(x) = 0`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{inverse, rank, Mat, Vector, WeightedNorm};

pub type DriftFn = dyn Fn(f64, &Vector) -> Vector + Send + Sync;
pub type InputMapFn = dyn Fn(f64, &Vector) -> Mat + Send + Sync;
pub type ControlFn = dyn Fn(f64, &Vector) -> Vector + Send + Sync;

/// Relative half-width of the band around the admissible-set boundary in
/// which a sliding check is reported as ambiguous.
pub const BOUNDARY_BAND: f64 = 1e-6;

/// Scale-aware tolerance for `s(x) = 0`.
pub fn surface_tolerance(x: &Vector) -> f64 {
    1e-8 * (1.0 + x.norm())
}

/// Pointwise sign with `sign(0) = 0`.
pub fn sign(y: f64) -> f64 {
    if y > 0.0 {
        1.0
    } else if y < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// The closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Set-valued sign: `{1}` for positive, `{-1}` for negative, `[-1, 1]` at zero.
pub fn sign_bar(y: f64) -> Interval {
    if y > 0.0 {
        Interval::point(1.0)
    } else if y < 0.0 {
        Interval::point(-1.0)
    } else {
        Interval { lo: -1.0, hi: 1.0 }
    }
}

#[derive(Clone)]
pub struct SwitchingSurface {
    dim: usize,
    value: Arc<dyn Fn(&Vector) -> Vector + Send + Sync>,
    gradient: Arc<dyn Fn(&Vector) -> Mat + Send + Sync>,
}

impl fmt::Debug for SwitchingSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SwitchingSurface(k={})", self.dim)
    }
}

impl SwitchingSurface {
    pub fn new<S, G>(dim: usize, value: S, gradient: G) -> Self
    where
        S: Fn(&Vector) -> Vector + Send + Sync + 'static,
        G: Fn(&Vector) -> Mat + Send + Sync + 'static,
    {
        Self {
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }

    /// `s(x) = C x`.
    pub fn linear(c: Mat) -> Self {
        let grad = c.clone();
        Self::new(c.nrows(), move |x| &c * x, move |_| grad.clone())
    }

    /// `factor * s(x)`, used to check scale invariance of sliding checks.
    pub fn scaled(&self, factor: f64) -> Self {
        let value = self.value.clone();
        let gradient = self.gradient.clone();
        Self::new(
            self.dim,
            move |x| value(x) * factor,
            move |x| gradient(x) * factor,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &Vector) -> Vector {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &Vector) -> Mat {
        (self.gradient)(x)
    }

    pub fn contains(&self, x: &Vector) -> bool {
        self.value(x).norm() <= surface_tolerance(x)
    }

    /// Largest entrywise gap between the declared gradient and central
    /// differences of `s` at `x`.
    pub fn gradient_mismatch(&self, x: &Vector, step: f64) -> f64 {
        let grad = self.gradient(x);
        let mut worst: f64 = 0.0;
        for j in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += step;
            xm[j] -= step;
            let fd = (self.value(&xp) - self.value(&xm)) / (2.0 * step);
            for i in 0..self.dim {
                worst = worst.max((fd[i] - grad[(i, j)]).abs());
            }
        }
        worst
    }

    pub fn is_regular(&self, x: &Vector) -> bool {
        rank(&self.gradient(x), 1e-12) == self.dim
    }
}

/// How a set-valued feedback is resolved to a single value on its
/// discontinuity set during simulation.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum SelectionPolicy {
    /// `sign(0) = 0` for relays, `u = 0` for the unit-vector law at `y = 0`.
    #[default]
    Pointwise,
    /// A fixed element of the regularized set: the sign values used for
    /// relay components on their switching surfaces, or the direction `w`
    /// (with `||w||_P <= 1`) used by the unit-vector law at `y = 0`.
    Fixed(Vector),
}

/// Discontinuous or continuous state feedback.
#[derive(Clone)]
pub enum FeedbackLaw {
    /// `u = nominal(t,x) + L sign(s(x))`, sign taken componentwise.
    Relay {
        nominal: Option<Arc<ControlFn>>,
        gains: Mat,
    },
    /// `u = -rho (CB)^{-1} y / ||y||_P` with `y = s(x)`.
    UnitVector {
        rho: f64,
        cb_inv: Mat,
        norm: WeightedNorm,
    },
    Continuous {
        inputs: usize,
        law: Arc<ControlFn>,
    },
    /// A pointwise law with no known set-valued structure.
    Opaque {
        inputs: usize,
        law: Arc<ControlFn>,
    },
}

impl fmt::Debug for FeedbackLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeedbackLaw::Relay { nominal, gains } => f
                .debug_struct("Relay")
                .field("nominal", &nominal.is_some())
                .field("gains", gains)
                .finish(),
            FeedbackLaw::UnitVector { rho, cb_inv, norm } => f
                .debug_struct("UnitVector")
                .field("rho", rho)
                .field("cb_inv", cb_inv)
                .field("weight", norm.weight())
                .finish(),
            FeedbackLaw::Continuous { inputs, .. } => write!(f, "Continuous(m={inputs})"),
            FeedbackLaw::Opaque { inputs, .. } => write!(f, "Opaque(m={inputs})"),
        }
    }
}

impl FeedbackLaw {
    pub fn relay(gains: Mat) -> Self {
        FeedbackLaw::Relay {
            nominal: None,
            gains,
        }
    }

    pub fn relay_with_nominal<F>(gains: Mat, nominal: F) -> Self
    where
        F: Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
    {
        FeedbackLaw::Relay {
            nominal: Some(Arc::new(nominal)),
            gains,
        }
    }

    pub fn continuous<F>(inputs: usize, law: F) -> Self
    where
        F: Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
    {
        FeedbackLaw::Continuous {
            inputs,
            law: Arc::new(law),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            FeedbackLaw::Relay { gains, .. } => gains.nrows(),
            FeedbackLaw::UnitVector { cb_inv, .. } => cb_inv.nrows(),
            FeedbackLaw::Continuous { inputs, .. } | FeedbackLaw::Opaque { inputs, .. } => *inputs,
        }
    }

    /// Bound `rho ||(CB)^{-1}||_P` on the unit-vector law output.
    pub fn magnitude_bound(&self) -> Option<f64> {
        match self {
            FeedbackLaw::UnitVector { rho, cb_inv, norm } => Some(rho * norm.matrix_norm(cb_inv)),
            _ => None,
        }
    }

    /// Pointwise value of the law, given the surface value `s = s(x)`.
    pub fn apply(&self, t: f64, x: &Vector, s: &Vector, policy: &SelectionPolicy) -> Vector {
        match self {
            FeedbackLaw::Relay { nominal, gains } => {
                let signs = Vector::from_fn(s.len(), |j, _| {
                    if s[j] == 0.0 {
                        match policy {
                            SelectionPolicy::Pointwise => 0.0,
                            SelectionPolicy::Fixed(q) => q[j],
                        }
                    } else {
                        sign(s[j])
                    }
                });
                let relay = gains * signs;
                match nominal {
                    Some(n) => n(t, x) + relay,
                    None => relay,
                }
            }
            FeedbackLaw::UnitVector { rho, cb_inv, norm } => {
                let size = norm.vector_norm(s);
                if size == 0.0 {
                    match policy {
                        SelectionPolicy::Pointwise => Vector::zeros(cb_inv.nrows()),
                        SelectionPolicy::Fixed(w) => cb_inv * w * (-rho),
                    }
                } else {
                    cb_inv * s * (-rho / size)
                }
            }
            FeedbackLaw::Continuous { law, .. } | FeedbackLaw::Opaque { law, .. } => law(t, x),
        }
    }
}

/// Which regularized input set is used: the joint hull `K[u]` (first kind)
/// or the product of componentwise hulls `(K[u_1], ..., K[u_m])` (second kind).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolutionKind {
    #[default]
    First,
    Second,
}

/// Convex input sets produced by regularizing a feedback law.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSet {
    Singleton(Vector),
    /// Axis-aligned box `[lower, upper]`.
    Box {
        lower: Vector,
        upper: Vector,
    },
    /// `center + G v`, `||v||_inf <= 1`.
    Zonotope {
        center: Vector,
        generators: Mat,
    },
    /// `center + G w`, `||w||_P <= 1`.
    Ellipsoid {
        center: Vector,
        map: Mat,
        weight: Mat,
    },
}

impl InputSet {
    pub fn dim(&self) -> usize {
        match self {
            InputSet::Singleton(c) => c.len(),
            InputSet::Box { lower, .. } => lower.len(),
            InputSet::Zonotope { center, .. } | InputSet::Ellipsoid { center, .. } => center.len(),
        }
    }

    /// Minkowski gauge of `u` about the set's center: `< 1` strictly inside,
    /// `1` on the boundary, `> 1` outside, `inf` outside a degenerate set.
    pub fn gauge(&self, u: &Vector) -> f64 {
        const FLAT: f64 = 1e-14;
        match self {
            InputSet::Singleton(c) => {
                if (u - c).norm() <= FLAT * (1.0 + c.norm()) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            InputSet::Box { lower, upper } => {
                let mut g: f64 = 0.0;
                for j in 0..u.len() {
                    let mid = 0.5 * (lower[j] + upper[j]);
                    let half = 0.5 * (upper[j] - lower[j]);
                    let off = (u[j] - mid).abs();
                    if half <= FLAT * (1.0 + mid.abs()) {
                        if off > FLAT * (1.0 + mid.abs()) {
                            return f64::INFINITY;
                        }
                    } else {
                        g = g.max(off / half);
                    }
                }
                g
            }
            InputSet::Zonotope { center, generators } => {
                let d = u - center;
                let Some(v) = least_squares(generators, &d) else {
                    return f64::INFINITY;
                };
                if (generators * &v - &d).norm() > 1e-12 * (1.0 + d.norm()) {
                    return f64::INFINITY;
                }
                v.iter().fold(0.0, |a, x| a.max(x.abs()))
            }
            InputSet::Ellipsoid {
                center,
                map,
                weight,
            } => {
                let d = u - center;
                let Some(w) = least_squares(map, &d) else {
                    return f64::INFINITY;
                };
                if (map * &w - &d).norm() > 1e-12 * (1.0 + d.norm()) {
                    return f64::INFINITY;
                }
                crate::linalg::p_norm(&w, weight)
            }
        }
    }

    pub fn contains(&self, u: &Vector, rel_tol: f64) -> bool {
        self.gauge(u) <= 1.0 + rel_tol
    }

    /// Extreme points for polytopic sets; `None` for ellipsoids.
    pub fn vertices(&self) -> Option<Vec<Vector>> {
        match self {
            InputSet::Singleton(c) => Some(vec![c.clone()]),
            InputSet::Box { lower, upper } => {
                let m = lower.len();
                Some(
                    (0..1usize << m)
                        .map(|mask| {
                            Vector::from_fn(m, |j, _| {
                                if mask >> j & 1 == 1 {
                                    upper[j]
                                } else {
                                    lower[j]
                                }
                            })
                        })
                        .collect(),
                )
            }
            InputSet::Zonotope { center, generators } => {
                let k = generators.ncols();
                Some(
                    (0..1usize << k)
                        .map(|mask| {
                            let v = Vector::from_fn(
                                k,
                                |j, _| if mask >> j & 1 == 1 { 1.0 } else { -1.0 },
                            );
                            center + generators * v
                        })
                        .collect(),
                )
            }
            InputSet::Ellipsoid { .. } => None,
        }
    }
}

fn least_squares(a: &Mat, b: &Vector) -> Option<Vector> {
    if a.ncols() == 0 {
        return Some(Vector::zeros(0));
    }
    a.clone().svd(true, true).solve(b, 1e-14).ok()
}

/// `K[f](t,x) = a(t,x) + b(t,x) U(t,x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilippovSet {
    pub drift: Vector,
    pub input_map: Mat,
    pub inputs: InputSet,
}

impl FilippovSet {
    pub fn is_singleton(&self) -> bool {
        matches!(self.inputs, InputSet::Singleton(_))
    }

    /// Velocity images of the input-set vertices.
    pub fn vertices(&self) -> Option<Vec<Vector>> {
        self.inputs.vertices().map(|vs| {
            vs.iter()
                .map(|u| &self.drift + &self.input_map * u)
                .collect()
        })
    }

    pub fn velocity(&self, u: &Vector) -> Vector {
        &self.drift + &self.input_map * u
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SlidingStatus {
    NoSliding,
    Sliding(Vector),
    Ambiguous,
}

/// Behaviour of a single relay component near its switching hyperplane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentCrossing {
    /// Trajectories cross the surface (no sliding on this component).
    Crosses,
    /// Both sides point towards the surface (sliding on this component).
    Attracts,
    Repels,
    /// Some side has zero normal velocity.
    Tangent,
}

#[derive(Clone)]
pub struct PiecewiseAffineField {
    dim: usize,
    drift: Arc<DriftFn>,
    input_map: Arc<InputMapFn>,
    pub feedback: FeedbackLaw,
    pub surface: SwitchingSurface,
}

impl fmt::Debug for PiecewiseAffineField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PiecewiseAffineField")
            .field("dim", &self.dim)
            .field("feedback", &self.feedback)
            .field("surface", &self.surface)
            .finish()
    }
}

impl PiecewiseAffineField {
    pub fn new<A, B>(
        dim: usize,
        drift: A,
        input_map: B,
        feedback: FeedbackLaw,
        surface: SwitchingSurface,
    ) -> Self
    where
        A: Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
        B: Fn(f64, &Vector) -> Mat + Send + Sync + 'static,
    {
        Self {
            dim,
            drift: Arc::new(drift),
            input_map: Arc::new(input_map),
            feedback,
            surface,
        }
    }

    /// Linear time-invariant `a = A x`, `b = B`.
    pub fn linear(a: Mat, b: Mat, feedback: FeedbackLaw, surface: SwitchingSurface) -> Self {
        let n = a.nrows();
        Self::new(
            n,
            move |_, x| &a * x,
            move |_, _| b.clone(),
            feedback,
            surface,
        )
    }

    pub fn with_surface(&self, surface: SwitchingSurface) -> Self {
        Self {
            surface,
            ..self.clone()
        }
    }

    pub fn with_feedback(&self, feedback: FeedbackLaw) -> Self {
        Self {
            feedback,
            ..self.clone()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input_dim(&self) -> usize {
        self.feedback.input_dim()
    }

    pub fn drift(&self, t: f64, x: &Vector) -> Vector {
        (self.drift)(t, x)
    }

    pub fn input_map(&self, t: f64, x: &Vector) -> Mat {
        (self.input_map)(t, x)
    }

    pub fn control(&self, t: f64, x: &Vector, policy: &SelectionPolicy) -> Vector {
        let s = self.surface.value(x);
        self.feedback.apply(t, x, &s, policy)
    }

    /// Pointwise closed-loop velocity.
    pub fn eval(&self, t: f64, x: &Vector, policy: &SelectionPolicy) -> Vector {
        let u = self.control(t, x, policy);
        self.drift(t, x) + self.input_map(t, x) * u
    }

    /// Regularized admissible input set `U(t,x)`.
    pub fn admissible_inputs(&self, t: f64, x: &Vector, kind: SolutionKind) -> Result<InputSet> {
        let s = self.surface.value(x);
        let tol = surface_tolerance(x);
        match &self.feedback {
            FeedbackLaw::Relay { nominal, gains } => {
                let active: Vec<usize> = (0..s.len()).filter(|&j| s[j].abs() <= tol).collect();
                let fixed =
                    Vector::from_fn(
                        s.len(),
                        |j, _| {
                            if active.contains(&j) {
                                0.0
                            } else {
                                sign(s[j])
                            }
                        },
                    );
                let mut center = gains * fixed;
                if let Some(n) = nominal {
                    center += n(t, x);
                }
                if active.is_empty() {
                    return Ok(InputSet::Singleton(center));
                }
                let generators = gains.select_columns(active.iter());
                Ok(match kind {
                    SolutionKind::First => InputSet::Zonotope { center, generators },
                    SolutionKind::Second => {
                        let half = Vector::from_fn(gains.nrows(), |i, _| {
                            generators.row(i).iter().map(|g| g.abs()).sum::<f64>()
                        });
                        InputSet::Box {
                            lower: &center - &half,
                            upper: &center + &half,
                        }
                    }
                })
            }
            FeedbackLaw::UnitVector { rho, cb_inv, norm } => {
                if s.norm() <= tol {
                    let map = cb_inv * (-rho);
                    let m = cb_inv.nrows();
                    match kind {
                        SolutionKind::First => Ok(InputSet::Ellipsoid {
                            center: Vector::zeros(m),
                            map,
                            weight: norm.weight().clone(),
                        }),
                        SolutionKind::Second => {
                            // componentwise hulls of the ellipsoid: support in +-e_i
                            let (_, inv_sqrt) = crate::linalg::spd_sqrt_pair(norm.weight())?;
                            let shaped = &map * inv_sqrt;
                            let half = Vector::from_fn(m, |i, _| shaped.row(i).norm());
                            Ok(InputSet::Box {
                                lower: -half.clone(),
                                upper: half,
                            })
                        }
                    }
                } else {
                    Ok(InputSet::Singleton(self.feedback.apply(
                        t,
                        x,
                        &s,
                        &SelectionPolicy::Pointwise,
                    )))
                }
            }
            FeedbackLaw::Continuous { law, .. } => Ok(InputSet::Singleton(law(t, x))),
            FeedbackLaw::Opaque { .. } => Err(Error::UnsupportedFeedback(
                "opaque feedback law has no piecewise structure".into(),
            )),
        }
    }

    /// First-kind Filippov set `K[f](t,x) = a + b K[u]`.
    pub fn filippov_set(&self, t: f64, x: &Vector) -> Result<FilippovSet> {
        Ok(FilippovSet {
            drift: self.drift(t, x),
            input_map: self.input_map(t, x),
            inputs: self.admissible_inputs(t, x, SolutionKind::First)?,
        })
    }

    /// `u_eq = -(grad_s b)^{-1} grad_s a` on the surface.
    pub fn equivalent_control(&self, t: f64, x: &Vector) -> Result<Vector> {
        let s = self.surface.value(x);
        let tol = surface_tolerance(x);
        if s.norm() > tol {
            return Err(Error::OffSurface {
                norm: s.norm(),
                tol,
            });
        }
        let grad = self.surface.gradient(x);
        let g = &grad * self.input_map(t, x);
        if !g.is_square() {
            return Err(Error::Dimension(format!(
                "grad_s * b is {}x{}; equivalent control needs a square matrix",
                g.nrows(),
                g.ncols()
            )));
        }
        let g_inv = inverse(&g, "grad_s * b")?;
        Ok(-(g_inv * (grad * self.drift(t, x))))
    }

    pub fn sliding_status(&self, t: f64, x: &Vector, kind: SolutionKind) -> Result<SlidingStatus> {
        let u_eq = self.equivalent_control(t, x)?;
        let set = self.admissible_inputs(t, x, kind)?;
        let gauge = set.gauge(&u_eq);
        Ok(if gauge < 1.0 - BOUNDARY_BAND {
            SlidingStatus::Sliding(self.drift(t, x) + self.input_map(t, x) * u_eq)
        } else if gauge > 1.0 + BOUNDARY_BAND {
            SlidingStatus::NoSliding
        } else {
            SlidingStatus::Ambiguous
        })
    }

    /// Normal velocity of relay component `j` on both sides of `s_j = 0`,
    /// with every other component taken at its pointwise sign.
    pub fn component_crossing(&self, t: f64, x: &Vector, j: usize) -> Result<ComponentCrossing> {
        let FeedbackLaw::Relay { nominal, gains } = &self.feedback else {
            return Err(Error::UnsupportedFeedback(
                "crossing checks are defined for relay laws".into(),
            ));
        };
        let s = self.surface.value(x);
        let grad_j = self.surface.gradient(x).row(j).into_owned();
        let a = self.drift(t, x);
        let b = self.input_map(t, x);
        let side = |sj: f64| -> f64 {
            let signs = Vector::from_fn(s.len(), |i, _| if i == j { sj } else { sign(s[i]) });
            let mut u = gains * signs;
            if let Some(n) = nominal {
                u += n(t, x);
            }
            (&grad_j * (&a + &b * u))[(0, 0)]
        };
        let plus = side(1.0);
        let minus = side(-1.0);
        Ok(if plus == 0.0 || minus == 0.0 {
            ComponentCrossing::Tangent
        } else if plus < 0.0 && minus > 0.0 {
            ComponentCrossing::Attracts
        } else if plus > 0.0 && minus < 0.0 {
            ComponentCrossing::Repels
        } else {
            ComponentCrossing::Crosses
        })
    }
}
