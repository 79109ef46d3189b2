//! Sliding-mode control of the 1-D heat equation
//!
//! ```text
//! x_t = nu x_zz + beta(z) (u + gamma),  x(t,0) = x(t,1) = 0,  y = int xi x dz,
//! ```
//!
//! through its sine-mode truncation `x_i' = -nu lambda_i x_i + b_i (u + gamma)`
//! and the scalar input-output IDE for `y`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::kernels::{ExpTerm, Kernel};
use crate::linalg::{Mat, Vector};
use crate::signal::Signal;
use crate::smc_design::LinearIdePlant;

/// Spatial profiles on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Zero,
    /// The eigenfunction `sqrt(2) sin(i pi z)`.
    Mode {
        index: usize,
    },
    /// `exp(1 / ((lo - z)(hi - z)))` on `(lo, hi)`, zero elsewhere, taken
    /// literally; values that underflow are zero.
    Bump {
        lo: f64,
        hi: f64,
    },
    /// `sin(pi z) + z (1 - z)`.
    SinePlusParabola,
    /// `scale * z (1 - z)`.
    Parabola {
        scale: f64,
    },
}

impl Profile {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Mode { index } => mode(*index, z),
            Profile::Bump { lo, hi } => {
                if z > *lo && z < *hi {
                    (1.0 / ((lo - z) * (hi - z))).exp()
                } else {
                    0.0
                }
            }
            Profile::SinePlusParabola => (PI * z).sin() + z * (1.0 - z),
            Profile::Parabola { scale } => scale * z * (1.0 - z),
        }
    }

    /// Closed-form second derivative, when available.
    pub fn second_derivative(&self, z: f64) -> Option<f64> {
        match self {
            Profile::Zero => Some(0.0),
            Profile::Mode { index } => Some(-eigenvalue(*index) * mode(*index, z)),
            Profile::SinePlusParabola => Some(-PI * PI * (PI * z).sin() - 2.0),
            Profile::Parabola { scale } => Some(-2.0 * scale),
            Profile::Bump { .. } => None,
        }
    }
}

/// `phi_i(z) = sqrt(2) sin(i pi z)`.
pub fn mode(i: usize, z: f64) -> f64 {
    std::f64::consts::SQRT_2 * (i as f64 * PI * z).sin()
}

/// `lambda_i = pi^2 i^2`.
pub fn eigenvalue(i: usize) -> f64 {
    PI * PI * (i * i) as f64
}

/// Composite trapezoid rule for `int_0^1 f` with `res` panels.
pub fn trapezoid<F: Fn(f64) -> f64>(f: F, res: usize) -> f64 {
    let dz = 1.0 / res as f64;
    let mut sum = 0.5 * (f(0.0) + f(1.0));
    for j in 1..res {
        sum += f(j as f64 * dz);
    }
    sum * dz
}

pub fn l2_norm<F: Fn(f64) -> f64>(f: F, res: usize) -> f64 {
    trapezoid(|z| f(z).powi(2), res).sqrt()
}

/// `c_i = int_0^1 f phi_i dz`, `i = 1..=n`.
pub fn modal_project<F: Fn(f64) -> f64>(f: F, n: usize, res: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| trapezoid(|z| f(z) * mode(i, z), res))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatConfig {
    pub nu: f64,
    pub beta: Profile,
    pub xi: Profile,
    pub modes: usize,
    pub gamma: Signal,
    pub x0: Profile,
    /// The shift `lambda` in `xi'' + lambda xi`.
    pub lambda: f64,
    pub resolution: usize,
}

impl Default for HeatConfig {
    fn default() -> Self {
        Self {
            nu: 1.0,
            beta: Profile::Bump { lo: 0.3, hi: 0.6 },
            xi: Profile::SinePlusParabola,
            modes: 60,
            gamma: Signal::constant(0.5),
            x0: Profile::Parabola { scale: 10.0 },
            lambda: PI * PI,
            resolution: 2000,
        }
    }
}

impl HeatConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(Error::Param(format!(
                "conductivity must be positive, got {}",
                self.nu
            )));
        }
        if self.modes == 0 {
            return Err(Error::Param("at least one mode is required".into()));
        }
        if self.resolution < 10 * self.modes {
            return Err(Error::Param(format!(
                "resolution {} does not resolve {} modes (need >= {})",
                self.resolution,
                self.modes,
                10 * self.modes
            )));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Param(format!(
                "shift lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        for (name, p) in [("xi", &self.xi), ("x0", &self.x0)] {
            let ends = p.eval(0.0).abs().max(p.eval(1.0).abs());
            if ends > 1e-12 {
                return Err(Error::Param(format!(
                    "{name} must vanish at z = 0 and z = 1"
                )));
            }
        }
        Ok(())
    }

    /// `xi''(z)`: closed form if known, else differentiated mode by mode.
    fn xi_second_derivative(&self) -> Box<dyn Fn(f64) -> f64 + '_> {
        if self.xi.second_derivative(0.5).is_some() {
            Box::new(|z| self.xi.second_derivative(z).unwrap_or(0.0))
        } else {
            let coeffs = modal_project(|z| self.xi.eval(z), self.modes, self.resolution);
            Box::new(move |z| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| -eigenvalue(k + 1) * c * mode(k + 1, z))
                    .sum()
            })
        }
    }

    /// `xi'' + lambda xi`.
    pub fn shifted_output(&self) -> impl Fn(f64) -> f64 + '_ {
        let d2 = self.xi_second_derivative();
        move |z| d2(z) + self.lambda * self.xi.eval(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatConstants {
    pub cb: f64,
    pub norm_beta: f64,
    pub norm_xi_shift: f64,
}

/// `CB = int xi beta`, `||beta||`, `||xi'' + lambda xi||`.
///
/// `CB` is degenerate when it is negligible relative to `||xi|| ||beta||`.
pub fn heat_constants(cfg: &HeatConfig) -> Result<HeatConstants> {
    cfg.validate()?;
    let res = cfg.resolution;
    let cb = trapezoid(|z| cfg.xi.eval(z) * cfg.beta.eval(z), res);
    let norm_beta = l2_norm(|z| cfg.beta.eval(z), res);
    let norm_xi = l2_norm(|z| cfg.xi.eval(z), res);
    let shift = cfg.shifted_output();
    let norm_xi_shift = l2_norm(shift, res);
    if !(cb.abs() >= 1e-10 * norm_xi * norm_beta) || cb == 0.0 {
        return Err(Error::Degenerate(format!(
            "CB = {cb:e} is negligible against ||xi|| ||beta|| = {:e}",
            norm_xi * norm_beta
        )));
    }
    Ok(HeatConstants {
        cb,
        norm_beta,
        norm_xi_shift,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub holds: bool,
    /// `pi^2 |CB| - ||xi'' + lambda xi|| ||beta||`.
    pub margin: f64,
}

pub fn check_condition(c: &HeatConstants) -> ConditionCheck {
    let margin = PI * PI * c.cb.abs() - c.norm_xi_shift * c.norm_beta;
    ConditionCheck {
        holds: margin > 0.0,
        margin,
    }
}

/// `rho` from the heat design formula, bumped by `1e-9` relative to make the
/// inequality strict.
pub fn heat_gain(c: &HeatConstants, nu: f64, gamma_bar: f64, delta: f64) -> Result<f64> {
    let cb = c.cb.abs();
    let denom = PI * PI * cb - c.norm_beta * c.norm_xi_shift;
    if !(denom > 0.0) {
        return Err(Error::Condition(format!(
            "pi^2 |CB| - ||beta|| ||xi'' + lambda xi|| = {denom:e} <= 0"
        )));
    }
    let num = cb
        * (PI * PI * gamma_bar * cb
            + (nu * delta * PI * PI + gamma_bar * c.norm_beta) * c.norm_xi_shift);
    Ok(num / denom * (1.0 + 1e-9))
}

/// `(||q|| + ||gamma||) ||beta|| / (nu pi^2)`.
pub fn l2_bound(q_sup: f64, gamma_sup: f64, norm_beta: f64, nu: f64) -> f64 {
    (q_sup + gamma_sup) * norm_beta / (nu * PI * PI)
}

/// Modal data of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatModes {
    pub rates: Vec<f64>,
    pub b: Vec<f64>,
    pub xi: Vec<f64>,
    pub x0: Vec<f64>,
    /// `<xi'' + lambda xi, phi_i>`.
    pub shift: Vec<f64>,
}

pub fn heat_modes(cfg: &HeatConfig) -> Result<HeatModes> {
    cfg.validate()?;
    let (n, res) = (cfg.modes, cfg.resolution);
    let shift = cfg.shifted_output();
    Ok(HeatModes {
        rates: (1..=n).map(|i| cfg.nu * eigenvalue(i)).collect(),
        b: modal_project(|z| cfg.beta.eval(z), n, res),
        xi: modal_project(|z| cfg.xi.eval(z), n, res),
        x0: modal_project(|z| cfg.x0.eval(z), n, res),
        shift: modal_project(shift, n, res),
    })
}

/// The input-output IDE `y' = -nu lambda y + p + CB (u + gamma) + int Phi (u + gamma)`.
#[derive(Debug, Clone)]
pub struct HeatIo {
    pub kernel: Kernel,
    pub p: Signal,
    /// `-nu lambda`.
    pub drift: f64,
    pub cb: f64,
    pub y0: f64,
}

/// `Phi(s) = nu sum_i b_i <xi'' + lambda xi, phi_i> e^{-nu lambda_i s}` and
/// `p(s) = nu sum_i x0_i <xi'' + lambda xi, phi_i> e^{-nu lambda_i s}`.
/// Terms with a zero coefficient are dropped.
pub fn heat_io_kernel(cfg: &HeatConfig, t0: f64) -> Result<HeatIo> {
    let modes = heat_modes(cfg)?;
    let consts = heat_constants(cfg)?;
    let mut terms = Vec::new();
    let mut p_terms = Vec::new();
    for i in 0..cfg.modes {
        let c = cfg.nu * modes.b[i] * modes.shift[i];
        if c != 0.0 {
            terms.push(ExpTerm {
                rate: modes.rates[i],
                coeff: Mat::from_element(1, 1, c),
            });
        }
        let q = cfg.nu * modes.x0[i] * modes.shift[i];
        if q != 0.0 {
            p_terms.push((modes.rates[i], q));
        }
    }
    let y0 = trapezoid(|z| cfg.xi.eval(z) * cfg.x0.eval(z), cfg.resolution);
    Ok(HeatIo {
        kernel: Kernel::exponential_series(1, terms)?,
        p: if p_terms.is_empty() {
            Signal::Zero
        } else {
            Signal::ExponentialSeries { t0, terms: p_terms }
        },
        drift: -cfg.nu * cfg.lambda,
        cb: consts.cb,
        y0,
    })
}

/// The reduced plant as a scalar linear IDE (`A = -nu lambda`, `B = CB`,
/// `B~ = C = 1`), with `p_bar` the grid maximum of `|p|` over the horizon.
pub fn heat_plant(
    cfg: &HeatConfig,
    t0: f64,
    horizon: f64,
    h: f64,
) -> Result<(LinearIdePlant, HeatIo)> {
    let io = heat_io_kernel(cfg, t0)?;
    let one = Mat::identity(1, 1);
    let mut plant = LinearIdePlant::new(
        Mat::from_element(1, 1, io.drift),
        Mat::from_element(1, 1, io.cb),
        one.clone(),
        one,
        io.kernel.clone(),
    )?
    .with_gamma(vec![cfg.gamma.clone()])?
    .with_p(vec![io.p.clone()])?;
    let steps = (horizon / h).floor() as usize;
    plant.p_bar = (0..=steps)
        .map(|k| io.p.eval(t0 + k as f64 * h).abs())
        .fold(0.0, f64::max);
    Ok((plant, io))
}

/// Input applied to the heat equation.
#[derive(Debug, Clone, PartialEq)]
pub enum HeatControl {
    /// `u = q(t) sign(y)` with `sign(0) = 0`.
    Sign(Signal),
    /// Open-loop `u(t)`.
    OpenLoop(Signal),
}

impl HeatControl {
    fn eval(&self, t: f64, y: f64) -> f64 {
        match self {
            HeatControl::Sign(q) => q.eval(t) * crate::fields::sign(y),
            HeatControl::OpenLoop(u) => u.eval(t),
        }
    }
}

/// Time stepping of the modal ODEs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModalStepper {
    /// `x_i += h (-mu_i x_i + b_i w)`; needs `h mu_N < 2`.
    ExplicitEuler,
    /// Exact for inputs held constant over a step:
    /// `x_i = e^{-mu_i h} x_i + (1 - e^{-mu_i h}) / mu_i * b_i w`.
    #[default]
    Exponential,
}

/// Simulates the modal truncation. The trajectory carries the modal states,
/// the applied input, the output `y = sum xi_i x_i` and an `l2` channel.
pub fn simulate_heat(
    cfg: &HeatConfig,
    control: &HeatControl,
    t0: f64,
    h: f64,
    horizon: f64,
    stepper: ModalStepper,
) -> Result<Trajectory> {
    let modes = heat_modes(cfg)?;
    let n = cfg.modes;
    let steps = crate::integrator::SimConfig::new(t0, horizon, h, Vector::zeros(n)).steps()?;
    let worst = modes.rates[n - 1] * h;
    if stepper == ModalStepper::ExplicitEuler && worst >= 2.0 {
        return Err(Error::Stability(format!(
            "h nu lambda_N = {worst} >= 2; reduce h or use the exponential stepper"
        )));
    }
    let (decay, gain): (Vec<f64>, Vec<f64>) = match stepper {
        ModalStepper::ExplicitEuler => modes.rates.iter().map(|mu| (1.0 - h * mu, h)).unzip(),
        ModalStepper::Exponential => modes
            .rates
            .iter()
            .map(|mu| {
                let e = (-mu * h).exp();
                (e, -(-mu * h).exp_m1() / mu)
            })
            .unzip(),
    };
    let xi = Vector::from_vec(modes.xi.clone());
    let mut x = Vector::from_vec(modes.x0.clone());
    let mut traj = Trajectory::with_capacity(t0, h, steps + 1);
    let mut l2 = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = t0 + k as f64 * h;
        let y = xi.dot(&x);
        let u = control.eval(t, y);
        l2.push(x.norm());
        let w = u + cfg.gamma.eval(t);
        let next = Vector::from_fn(n, |i, _| decay[i] * x[i] + gain[i] * modes.b[i] * w);
        traj.push(x, Vector::from_element(1, u), Vector::from_element(1, y));
        if k == steps {
            break;
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: k + 1,
                t: t + h,
            });
        }
        x = next;
    }
    traj.set_aux("l2", l2)?;
    Ok(traj)
}

/// Writes `t, z, x(t, z)` rows for every `every`-th node on `nz + 1` points.
pub fn write_reconstruction<W: Write>(
    traj: &Trajectory,
    nz: usize,
    every: usize,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "z", "x"])?;
    let n = traj.state_dim();
    let every = every.max(1);
    for k in (0..traj.len()).step_by(every) {
        for j in 0..=nz {
            let z = j as f64 / nz as f64;
            let value: f64 = (0..n).map(|i| traj.states[k][i] * mode(i + 1, z)).sum();
            w.write_record([
                crate::integrator::fmt_f64(traj.time(k)),
                crate::integrator::fmt_f64(z),
                crate::integrator::fmt_f64(value),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eigen_config() -> HeatConfig {
        HeatConfig {
            beta: Profile::Mode { index: 1 },
            xi: Profile::Mode { index: 1 },
            modes: 8,
            resolution: 2000,
            ..HeatConfig::default()
        }
    }

    #[test]
    fn projection_of_first_mode() {
        let c = modal_project(|z| mode(1, z), 10, 2000);
        assert!((c[0] - 1.0).abs() < 1e-8);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn projection_of_parabola() {
        // int z(1-z) sqrt2 sin(i pi z) = 4 sqrt2 / (pi i)^3 for odd i
        let c = modal_project(|z| z * (1.0 - z), 9, 2000);
        for (k, v) in c.iter().enumerate() {
            let i = (k + 1) as f64;
            let exact = if (k + 1) % 2 == 1 {
                4.0 * std::f64::consts::SQRT_2 / (PI * i).powi(3)
            } else {
                0.0
            };
            assert!((v - exact).abs() < 1e-7, "mode {i}: {v} vs {exact}");
        }
    }

    #[test]
    fn eigenfunction_constants() {
        let c = heat_constants(&eigen_config()).unwrap();
        assert!((c.cb - 1.0).abs() < 1e-9);
        assert!(c.norm_xi_shift < 1e-12);
        let check = check_condition(&c);
        assert!(check.holds);
        assert!((check.margin - PI * PI * c.cb).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_shapes_are_degenerate() {
        let cfg = HeatConfig {
            beta: Profile::Mode { index: 2 },
            ..eigen_config()
        };
        assert!(matches!(heat_constants(&cfg), Err(Error::Degenerate(_))));
    }

    #[test]
    fn shift_norm_of_default_output() {
        // xi'' + pi^2 xi = pi^2 z(1-z) - 2, with L2 norm sqrt(pi^4/30 - 2 pi^2/3 + 4)
        let cfg = HeatConfig::default();
        let exact = (PI.powi(4) / 30.0 - 2.0 * PI * PI / 3.0 + 4.0).sqrt();
        let c = heat_constants(&cfg).unwrap();
        assert!(
            (c.norm_xi_shift - exact).abs() < 1e-5,
            "{} vs {exact}",
            c.norm_xi_shift
        );
        assert!((exact - 0.8168).abs() < 1e-3);
    }

    #[test]
    fn condition_may_fail_without_shift() {
        let cfg = HeatConfig {
            lambda: 0.0,
            ..HeatConfig::default()
        };
        let c = heat_constants(&cfg).unwrap();
        let check = check_condition(&c);
        assert_eq!(check.holds, check.margin > 0.0);
        // int (pi^2 sin(pi z) + 2)^2 = pi^4/2 + 8 pi + 4
        let exact = (PI.powi(4) / 2.0 + 8.0 * PI + 4.0).sqrt();
        assert!((c.norm_xi_shift - exact).abs() < 1e-4);
    }

    #[test]
    fn gain_limits() {
        let c = HeatConstants {
            cb: 0.33,
            norm_beta: 0.55,
            norm_xi_shift: 0.8,
        };
        assert!(heat_gain(&c, 1.0, 0.0, 1e-12).unwrap() < 1e-9);
        let zero_shift = HeatConstants {
            norm_xi_shift: 0.0,
            ..c
        };
        let rho = heat_gain(&zero_shift, 1.0, 0.5, 0.1).unwrap();
        assert!((rho - 0.5 * 0.33).abs() < 1e-9);
        let bad = HeatConstants {
            norm_xi_shift: 10.0,
            ..c
        };
        assert!(matches!(
            heat_gain(&bad, 1.0, 0.5, 0.1),
            Err(Error::Condition(_))
        ));
    }

    #[test]
    fn eigenfunction_kernel_vanishes() {
        let io = heat_io_kernel(&eigen_config(), 0.0).unwrap();
        assert!(io.kernel.is_trivially_zero());
        assert_eq!(io.p, Signal::Zero);
    }

    #[test]
    fn default_kernel_under_envelope() {
        let cfg = HeatConfig::default();
        let io = heat_io_kernel(&cfg, 0.0).unwrap();
        let c = heat_constants(&cfg).unwrap();
        for s in [0.0, 1e-3, 0.01, 0.1, 0.5] {
            let phi = io.kernel.eval_lag(s).unwrap()[(0, 0)].abs();
            let envelope = cfg.nu * (-cfg.nu * PI * PI * s).exp() * c.norm_beta * c.norm_xi_shift;
            assert!(
                phi <= envelope * (1.0 + 1e-6),
                "s = {s}: {phi} > {envelope}"
            );
        }
    }

    #[test]
    fn free_decay_of_first_mode() {
        let cfg = HeatConfig {
            x0: Profile::Mode { index: 1 },
            gamma: Signal::Zero,
            ..eigen_config()
        };
        let traj = simulate_heat(
            &cfg,
            &HeatControl::OpenLoop(Signal::Zero),
            0.0,
            1e-3,
            0.5,
            ModalStepper::Exponential,
        )
        .unwrap();
        let last = traj.states.last().unwrap();
        assert!((last[0] - (-PI * PI * 0.5).exp()).abs() < 1e-8);
        assert!(last.iter().skip(1).all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn euler_modes_dissipate() {
        let cfg = HeatConfig {
            gamma: Signal::Zero,
            modes: 10,
            resolution: 200,
            ..HeatConfig::default()
        };
        let traj = simulate_heat(
            &cfg,
            &HeatControl::OpenLoop(Signal::Zero),
            0.0,
            1e-3,
            0.2,
            ModalStepper::ExplicitEuler,
        )
        .unwrap();
        for i in 0..10 {
            let c = traj.state_component(i);
            assert!(c.windows(2).all(|w| w[1].abs() <= w[0].abs()));
        }
    }

    #[test]
    fn euler_stability_guard() {
        let cfg = HeatConfig::default();
        assert!(matches!(
            simulate_heat(
                &cfg,
                &HeatControl::OpenLoop(Signal::Zero),
                0.0,
                1e-3,
                0.1,
                ModalStepper::ExplicitEuler
            ),
            Err(Error::Stability(_))
        ));
    }

    #[test]
    fn endpoint_compatibility_is_checked() {
        let cfg = HeatConfig {
            x0: Profile::Bump { lo: -0.5, hi: 0.5 },
            ..HeatConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
