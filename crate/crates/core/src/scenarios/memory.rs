//! Relay IDEs whose memory channel sees a different selection of the
//! regularized feedback than the instantaneous channel.

use super::{sup, Check, Run, Scenario};
use crate::config::Params;
use crate::error::Result;
use crate::fields::{
    FeedbackLaw, PiecewiseAffineField, SelectionPolicy, SolutionKind, SwitchingSurface,
};
use crate::integrator::{euler_ide, AffineIde, SimConfig};
use crate::kernels::Kernel;
use crate::linalg::{mat_from_rows, vector, Mat, Vector};

pub(super) fn scenarios() -> Vec<Scenario> {
    vec![
        Scenario {
            name: "nonunique-ex5",
            summary: "x1' = u, x2' = int sin(t+tau) u dtau, u = -sign(x1): one Utkin solution, many Filippov ones",
            defaults: nonunique_defaults,
            simulate: nonunique_simulate,
            evaluate: nonunique_evaluate,
        },
        Scenario {
            name: "two-kind-ex7",
            summary: "x1' = u1, x2' = int u2 dtau, u1 = u2 = -sign(x1): first-kind set inside the second-kind box",
            defaults: two_kind_defaults,
            simulate: two_kind_simulate,
            evaluate: two_kind_evaluate,
        },
    ]
}

// nonunique-ex5

fn nonunique_defaults() -> Params {
    Params::new()
        .with("sim.h", 2.5e-4)
        .with("sim.horizon", 3.0)
        .with("law.q", 1.0)
        .with("check.tol", 1e-3)
}

/// Closed form of `x2` for the constant memory input `q`:
/// `int_0^t int_0^s sin(s + tau) q dtau ds = q (sin t - sin(2t) / 2)`.
pub fn nonunique_closed_form(q: f64, t: f64) -> f64 {
    q * (t.sin() - 0.5 * (2.0 * t).sin())
}

fn nonunique_system(memory: Option<f64>) -> AffineIde {
    let field = PiecewiseAffineField::linear(
        Mat::zeros(2, 2),
        mat_from_rows(&[&[1.0], &[0.0]]),
        FeedbackLaw::relay(Mat::from_element(1, 1, -1.0)),
        SwitchingSurface::linear(mat_from_rows(&[&[1.0, 0.0]])),
    );
    let b_tilde = mat_from_rows(&[&[0.0], &[1.0]]);
    let sys = AffineIde::memoryless(field)
        .with_memory_input(move |_, _| b_tilde.clone())
        .with_output(Mat::identity(2, 2));
    match memory {
        // the relay value is -sigma, so sigma = -q selects u = q
        Some(q) => sys.with_memory_selection(SelectionPolicy::Fixed(vector(&[-q]))),
        None => sys,
    }
}

fn nonunique_kernel() -> Kernel {
    Kernel::dense(2, |t, tau| Mat::identity(2, 2) * (t + tau).sin())
}

fn nonunique_simulate(params: &Params) -> Result<Run> {
    let cfg = SimConfig::new(
        0.0,
        params.f64("sim.horizon")?,
        params.f64("sim.h")?,
        Vector::zeros(2),
    );
    let q = params.f64("law.q")?;
    let kernel = nonunique_kernel();
    let mut run = Run::default();
    run.push("utkin", euler_ide(&nonunique_system(None), &kernel, &cfg)?);
    run.push(
        "filippov_plus",
        euler_ide(&nonunique_system(Some(q)), &kernel, &cfg)?,
    );
    run.push(
        "filippov_minus",
        euler_ide(&nonunique_system(Some(-q)), &kernel, &cfg)?,
    );
    Ok(run)
}

fn nonunique_evaluate(params: &Params, run: &mut Run) -> Result<Vec<Check>> {
    let q = params.f64("law.q")?;
    let tol = params.f64("check.tol")?;
    let utkin = run.trajectory("utkin")?;
    let plus = run.trajectory("filippov_plus")?;
    let minus = run.trajectory("filippov_minus")?;
    let mut checks = vec![Check::at_most(
        "utkin_zero",
        sup(utkin.states.iter().map(|x| x.amax())),
        0.0,
    )
    .with_detail("the first-kind solution with u_eq = 0 is identically zero")];
    checks.push(Check::at_most(
        "filippov_x1_zero",
        sup(plus
            .state_component(0)
            .into_iter()
            .chain(minus.state_component(0))),
        0.0,
    ));
    let gap = sup(plus
        .states
        .iter()
        .zip(&minus.states)
        .map(|(a, b)| a[1] - b[1]));
    let exact = sup((0..plus.len()).map(|k| 2.0 * nonunique_closed_form(q, plus.time(k))));
    checks.push(
        Check::at_most("selection_gap", (gap - exact).abs(), tol).with_detail(format!(
            "sup |x2+ - x2-| = {gap:.6e}, closed form {exact:.6e}"
        )),
    );
    let curve =
        sup((0..plus.len()).map(|k| plus.states[k][1] - nonunique_closed_form(q, plus.time(k))));
    checks.push(Check::at_most("filippov_curve", curve, tol));
    Ok(checks)
}

// two-kind-ex7

fn two_kind_defaults() -> Params {
    Params::new()
        .with("sim.h", 1e-3)
        .with("sim.horizon", 2.0)
        .with("law.q", 0.5)
}

/// Both inputs driven by the one relay `-sign(x1)`: the joint hull is the
/// segment `{(v, v)}`.
fn joint_field() -> PiecewiseAffineField {
    PiecewiseAffineField::linear(
        Mat::zeros(2, 2),
        mat_from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]),
        FeedbackLaw::relay(mat_from_rows(&[&[-1.0], &[-1.0]])),
        SwitchingSurface::linear(mat_from_rows(&[&[1.0, 0.0]])),
    )
}

/// The same inputs as independent actuators: one relay per input, each
/// switching on `x1`.
fn independent_field() -> PiecewiseAffineField {
    PiecewiseAffineField::linear(
        Mat::zeros(2, 2),
        mat_from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]),
        FeedbackLaw::relay(-Mat::identity(2, 2)),
        SwitchingSurface::linear(mat_from_rows(&[&[1.0, 0.0], &[1.0, 0.0]])),
    )
}

fn two_kind_system(field: PiecewiseAffineField, memory: Option<Vector>) -> AffineIde {
    let b_tilde = mat_from_rows(&[&[0.0, 0.0], &[0.0, 1.0]]);
    let sys = AffineIde::memoryless(field)
        .with_memory_input(move |_, _| b_tilde.clone())
        .with_output(Mat::identity(2, 2));
    match memory {
        Some(sigma) => sys.with_memory_selection(SelectionPolicy::Fixed(sigma)),
        None => sys,
    }
}

fn identity_kernel() -> Kernel {
    Kernel::convolution(2, |_| Mat::identity(2, 2))
}

fn two_kind_simulate(params: &Params) -> Result<Run> {
    let cfg = SimConfig::new(
        0.0,
        params.f64("sim.horizon")?,
        params.f64("sim.h")?,
        Vector::zeros(2),
    );
    let q = params.f64("law.q")?;
    let mut run = Run::default();
    run.push(
        "first_kind",
        euler_ide(
            &two_kind_system(joint_field(), None),
            &identity_kernel(),
            &cfg,
        )?,
    );
    // u = (0, q): the first actuator holds x1 = 0, the second one acts freely
    let sys = two_kind_system(independent_field(), Some(vector(&[0.0, -q])));
    run.push("second_kind", euler_ide(&sys, &identity_kernel(), &cfg)?);
    Ok(run)
}

fn two_kind_evaluate(params: &Params, run: &mut Run) -> Result<Vec<Check>> {
    let q = params.f64("law.q")?;
    let field = joint_field();
    let origin = Vector::zeros(2);
    let first = field.admissible_inputs(0.0, &origin, SolutionKind::First)?;
    let second = field.admissible_inputs(0.0, &origin, SolutionKind::Second)?;
    let mut checks = Vec::new();

    let inclusion = first
        .vertices()
        .unwrap_or_default()
        .iter()
        .map(|v| second.gauge(v))
        .fold(0.0, f64::max);
    checks.push(Check::at_most("first_in_second", inclusion, 1.0 + 1e-12));
    let corner = first.gauge(&vector(&[1.0, -1.0]));
    checks.push(
        Check::at_least("second_exceeds_first", corner, 1.0 + 1e-6)
            .with_detail("(1, -1) is not a joint value"),
    );
    let selection = vector(&[0.0, q]);
    checks.push(Check::at_most(
        "selection_admissible",
        second.gauge(&selection),
        1.0,
    ));
    if q != 0.0 {
        checks.push(Check::at_least(
            "selection_not_joint",
            first.gauge(&selection),
            1.0 + 1e-6,
        ));
    }

    let first_run = run.trajectory("first_kind")?;
    checks.push(Check::at_most(
        "first_kind_zero",
        sup(first_run.states.iter().map(|x| x.amax())),
        0.0,
    ));
    let second_run = run.trajectory("second_kind")?;
    checks.push(Check::at_most(
        "second_kind_x1_zero",
        sup(second_run.state_component(0)),
        0.0,
    ));
    let h = second_run.h();
    let horizon = second_run.time(second_run.len() - 1);
    let gap = sup((0..second_run.len()).map(|k| {
        let t = second_run.time(k);
        second_run.states[k][1] - 0.5 * q * t * t
    }));
    checks.push(
        Check::at_most(
            "second_kind_x2",
            gap,
            0.5 * q.abs() * horizon * h * (1.0 + 1e-9),
        )
        .with_detail("x2 against q t^2 / 2"),
    );
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::super::run_scenario;
    use super::*;

    #[test]
    fn closed_form_solves_the_double_integral() {
        // trapezoid double integral on a fine grid
        let t = 1.3;
        let n = 2000;
        let ds = t / n as f64;
        let mut total = 0.0;
        for i in 0..=n {
            let s = i as f64 * ds;
            let inner: f64 = (0..=n)
                .map(|j| {
                    let tau = j as f64 * s / n as f64;
                    let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                    w * (s + tau).sin()
                })
                .sum::<f64>()
                * s
                / n as f64;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            total += w * inner * ds;
        }
        assert!((total - nonunique_closed_form(1.0, t)).abs() < 1e-6);
    }

    #[test]
    fn two_kind_passes() {
        let out = run_scenario::<&str>("two-kind-ex7", &[]).unwrap();
        assert!(out.report.passed, "{}", out.report.to_text());
    }

    #[test]
    fn nonunique_passes_on_a_short_horizon() {
        let out = run_scenario("nonunique-ex5", &["sim.horizon=1.0"]).unwrap();
        assert!(out.report.passed, "{}", out.report.to_text());
    }
}
