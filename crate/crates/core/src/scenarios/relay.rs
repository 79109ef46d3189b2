//! Memoryless relay systems: the scalar relay, the classical relay SMC with
//! nominal compensation, and the two-input rotation relay.

use super::{indexed_vector, sup, Check, Run, Scenario};
use crate::config::Params;
use crate::equiv_control::{detect_reaching, reaching_threshold};
use crate::error::Result;
use crate::fields::{
    sign, FeedbackLaw, PiecewiseAffineField, SlidingStatus, SolutionKind, SwitchingSurface,
};
use crate::integrator::{euler_ode, low_pass_filter, AffineIde, SimConfig, Trajectory};
use crate::linalg::{inverse, mat_from_rows, vector, Mat, Vector};
use crate::smc_design::projector;

pub(super) fn scenarios() -> Vec<Scenario> {
    vec![
        Scenario {
            name: "relay-scalar",
            summary: "x' = u + a sin(w t), u = -k sign(x): finite-time reaching and sliding at 0",
            defaults: scalar_defaults,
            simulate: scalar_simulate,
            evaluate: scalar_evaluate,
        },
        Scenario {
            name: "relay-linear-ex2",
            summary:
                "relay SMC with nominal compensation; sliding motion follows (A - B(CB)^-1 CA) x",
            defaults: linear_defaults,
            simulate: linear_simulate,
            evaluate: linear_evaluate,
        },
        Scenario {
            name: "switching-ex3",
            summary: "two-input rotation relay: axes are crossed, sliding only at sigma = 0",
            defaults: rotation_defaults,
            simulate: rotation_simulate,
            evaluate: rotation_evaluate,
        },
    ]
}

fn sim_config(params: &Params, x0: Vector) -> Result<SimConfig> {
    Ok(SimConfig::new(
        0.0,
        params.f64("sim.horizon")?,
        params.f64("sim.h")?,
        x0,
    ))
}

fn reach_index(traj: &Trajectory, c: &Mat) -> Result<Option<usize>> {
    let p = Mat::identity(c.nrows(), c.nrows());
    detect_reaching(traj, &p, reaching_threshold(traj, c))
}

/// First node `check.band_delay` after reaching, clamped to the last node.
fn settled(traj: &Trajectory, kr: usize, params: &Params) -> Result<usize> {
    let delay = (params.f64("check.band_delay")? / traj.h()).round() as usize;
    Ok((kr + delay).min(traj.len() - 1))
}

// relay-scalar

fn scalar_defaults() -> Params {
    Params::new()
        .with("sim.h", 1e-3)
        .with("sim.horizon", 3.0)
        .with("sim.x0", 1.0)
        .with("plant.amplitude", 0.5)
        .with("plant.frequency", 3.0)
        .with("law.gain", 1.0)
        .with("check.band", 2.0)
        .with("check.band_delay", 0.05)
        .with("check.filter_eps", 0.02)
        .with("check.ueq_tol", 0.07)
}

fn scalar_field(params: &Params) -> Result<PiecewiseAffineField> {
    let (amp, freq, gain) = (
        params.f64("plant.amplitude")?,
        params.f64("plant.frequency")?,
        params.f64("law.gain")?,
    );
    Ok(PiecewiseAffineField::new(
        1,
        move |t, _| vector(&[amp * (freq * t).sin()]),
        |_, _| Mat::identity(1, 1),
        FeedbackLaw::relay(Mat::from_element(1, 1, -gain)),
        SwitchingSurface::linear(Mat::identity(1, 1)),
    ))
}

fn scalar_simulate(params: &Params) -> Result<Run> {
    let sys = AffineIde::memoryless(scalar_field(params)?).with_output(Mat::identity(1, 1));
    let traj = euler_ode(&sys, &sim_config(params, vector(&[params.f64("sim.x0")?]))?)?;
    let mut run = Run::default();
    run.push("closed_loop", traj);
    Ok(run)
}

fn scalar_evaluate(params: &Params, run: &mut Run) -> Result<Vec<Check>> {
    let field = scalar_field(params)?;
    let (amp, freq, gain) = (
        params.f64("plant.amplitude")?,
        params.f64("plant.frequency")?,
        params.f64("law.gain")?,
    );
    let eps = params.f64("check.filter_eps")?;
    let traj = run.trajectory_mut("closed_loop")?;
    let h = traj.h();
    let x = traj.state_component(0);
    let margin = gain - amp.abs();
    let mut checks = Vec::new();

    let Some(kr) = reach_index(traj, &Mat::identity(1, 1))? else {
        return Ok(vec![Check::failed("reaching", "x never settles at 0")]);
    };
    let t_reach = traj.time(kr);
    let bound = if margin > 0.0 {
        x[0].abs() / margin
    } else {
        f64::INFINITY
    };
    checks.push(Check::at_most("reaching_time", t_reach, bound + 2.0 * h));

    // d|x|/dt <= -(k - a) while x keeps its sign
    let rate = (0..kr)
        .filter(|&k| x[k] != 0.0 && sign(x[k + 1]) == sign(x[k]))
        .map(|k| (x[k + 1].abs() - x[k].abs()) / h)
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::at_most("decay_rate", rate, -margin + 1e-9));

    let band = params.f64("check.band")? * h * (gain + amp.abs());
    checks.push(Check::at_most(
        "sliding_band",
        sup(x[settled(traj, kr, params)?..].iter().copied()),
        band,
    ));

    let mut outside = 0usize;
    let origin = vector(&[0.0]);
    for k in (kr..traj.len()).step_by(50) {
        match field.sliding_status(traj.time(k), &origin, SolutionKind::First)? {
            SlidingStatus::Sliding(f0) if f0.amax() <= 1e-12 => {}
            _ => outside += 1,
        }
    }
    checks.push(
        Check::at_most("filippov_sliding", outside as f64, 0.0)
            .with_detail("nodes without a sliding solution at x = 0"),
    );

    let u_eps = low_pass_filter(&traj.inputs, eps, h)?;
    traj.set_aux_vectors("u_eps", &u_eps)?;
    let settle = t_reach + 5.0 * eps;
    let err = sup((0..traj.len())
        .filter(|&k| traj.time(k) >= settle)
        .map(|k| u_eps[k][0] + amp * (freq * traj.time(k)).sin()));
    // filter ripple scales with the relay amplitude
    checks.push(
        Check::at_most(
            "equivalent_control",
            err,
            params.f64("check.ueq_tol")? * (gain + amp.abs()),
        )
        .with_detail("filtered input against -a sin(w t)"),
    );
    Ok(checks)
}

// relay-linear-ex2

fn linear_matrices() -> (Mat, Mat, Mat) {
    (
        mat_from_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[-1.0, -2.0, -3.0]]),
        mat_from_rows(&[&[0.0], &[0.0], &[1.0]]),
        mat_from_rows(&[&[1.0, 1.0, 1.0]]),
    )
}

fn linear_defaults() -> Params {
    Params::new()
        .with("sim.h", 1e-3)
        .with("sim.horizon", 3.0)
        .with("sim.x0_1", 1.0)
        .with("sim.x0_2", -0.5)
        .with("sim.x0_3", 0.8)
        .with("law.rho", 1.0)
        .with("check.band", 2.0)
        .with("check.band_delay", 0.05)
        .with("check.match_window", 1.0)
        .with("check.match_factor", 100.0)
}

/// `u = -(CB)^{-1} C A x + L sign(C x)` with `L = -rho (CB)^{-1} R`.
fn relay_field(a: &Mat, b: &Mat, c: &Mat, rho: f64, r: &Mat) -> Result<PiecewiseAffineField> {
    let cb_inv = inverse(&(c * b), "CB")?;
    let k = &cb_inv * c * a;
    let law = FeedbackLaw::relay_with_nominal(&cb_inv * r * rho, move |_, x| -(&k * x));
    Ok(PiecewiseAffineField::linear(
        a.clone(),
        b.clone(),
        law,
        SwitchingSurface::linear(c.clone()),
    ))
}

fn linear_field(params: &Params) -> Result<PiecewiseAffineField> {
    let (a, b, c) = linear_matrices();
    relay_field(
        &a,
        &b,
        &c,
        params.f64("law.rho")?,
        &Mat::from_element(1, 1, -1.0),
    )
}

fn linear_simulate(params: &Params) -> Result<Run> {
    let (_, _, c) = linear_matrices();
    let sys = AffineIde::memoryless(linear_field(params)?).with_output(c);
    let traj = euler_ode(
        &sys,
        &sim_config(params, indexed_vector(params, "sim.x0", 3)?)?,
    )?;
    let mut run = Run::default();
    run.push("closed_loop", traj);
    Ok(run)
}

/// Sliding-status check at the projection of `x` onto `C x = 0` along `B`.
fn sliding_at(
    field: &PiecewiseAffineField,
    b: &Mat,
    c: &Mat,
    a0: &Mat,
    t: f64,
    x: &Vector,
) -> Result<Check> {
    let on = projector(b, c)? * x;
    Ok(match field.sliding_status(t, &on, SolutionKind::First)? {
        SlidingStatus::Sliding(f0) => {
            let gap = (f0 - a0 * &on).amax();
            Check::at_most("sliding_velocity", gap, 1e-9 * (1.0 + on.norm()))
                .with_detail("|f0 - (A - B(CB)^-1 CA) x| at the reaching point")
        }
        other => Check::failed(
            "sliding_velocity",
            format!("status {other:?} at the reaching point"),
        ),
    })
}

fn reduced_matrix(a: &Mat, b: &Mat, c: &Mat) -> Result<Mat> {
    Ok(a - b * inverse(&(c * b), "CB")? * c * a)
}

fn linear_evaluate(params: &Params, run: &mut Run) -> Result<Vec<Check>> {
    let (a, b, c) = linear_matrices();
    let field = linear_field(params)?;
    let rho = params.f64("law.rho")?;
    let traj = run.trajectory("closed_loop")?;
    let h = traj.h();
    let a0 = reduced_matrix(&a, &b, &c)?;
    let mut checks = Vec::new();
    let Some(kr) = reach_index(traj, &c)? else {
        return Ok(vec![Check::failed("reaching", "Cx never settles at 0")]);
    };
    let sigma0 = (&c * &traj.states[0])[0].abs();
    checks.push(Check::at_most(
        "reaching_time",
        traj.time(kr),
        sigma0 / rho + 2.0 * h,
    ));
    let band = params.f64("check.band")? * h * rho;
    checks.push(Check::at_most(
        "sliding_band",
        sup(traj.outputs[settled(traj, kr, params)?..]
            .iter()
            .map(|y| y[0])),
        band,
    ));
    checks.push(sliding_at(
        &field,
        &b,
        &c,
        &a0,
        traj.time(kr),
        &traj.states[kr],
    )?);

    // sliding dynamics against plain Euler on the reduced linear system
    let window = params.f64("check.match_window")?;
    let n = ((window / h) * (1.0 + 1e-12)).floor() as usize;
    if kr + n >= traj.len() {
        checks.push(Check::failed(
            "sliding_dynamics",
            "horizon too short after reaching",
        ));
    } else {
        let mut z = traj.states[kr].clone();
        let mut gap: f64 = 0.0;
        for k in kr..=kr + n {
            gap = gap.max((&traj.states[k] - &z).amax());
            z = &z + &a0 * &z * h;
        }
        checks.push(Check::at_most(
            "sliding_dynamics",
            gap,
            params.f64("check.match_factor")? * h,
        ));
    }
    Ok(checks)
}

// switching-ex3

fn rotation_matrices() -> (Mat, Mat, Mat, Mat) {
    (
        mat_from_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[-1.0, -1.0, -1.0]]),
        mat_from_rows(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]),
        mat_from_rows(&[&[1.0, 1.0, 0.0], &[0.0, 1.0, 1.0]]),
        mat_from_rows(&[&[-1.0, 2.0], &[-2.0, -1.0]]),
    )
}

fn rotation_defaults() -> Params {
    Params::new()
        .with("sim.h", 1e-3)
        .with("sim.horizon", 2.0)
        .with("sim.x0_1", 1.0)
        .with("sim.x0_2", 0.5)
        .with("sim.x0_3", -0.7)
        .with("law.rho", 1.0)
        .with("check.band", 2.0)
        .with("check.band_delay", 0.05)
        .with("check.reach_slack", 0.05)
}

fn rotation_field(params: &Params) -> Result<PiecewiseAffineField> {
    let (a, b, c, r) = rotation_matrices();
    relay_field(&a, &b, &c, params.f64("law.rho")?, &r)
}

fn rotation_simulate(params: &Params) -> Result<Run> {
    let (_, _, c, _) = rotation_matrices();
    let sys = AffineIde::memoryless(rotation_field(params)?).with_output(c);
    let traj = euler_ode(
        &sys,
        &sim_config(params, indexed_vector(params, "sim.x0", 3)?)?,
    )?;
    let mut run = Run::default();
    run.push("closed_loop", traj);
    Ok(run)
}

fn rotation_evaluate(params: &Params, run: &mut Run) -> Result<Vec<Check>> {
    let (a, b, c, r) = rotation_matrices();
    let field = rotation_field(params)?;
    let rho = params.f64("law.rho")?;
    let traj = run.trajectory("closed_loop")?;
    let h = traj.h();
    let a0 = reduced_matrix(&a, &b, &c)?;
    let mut checks = Vec::new();
    let Some(kr) = reach_index(traj, &c)? else {
        return Ok(vec![Check::failed("reaching", "sigma never settles at 0")]);
    };
    let sigma = &traj.outputs;
    let l1 = |k: usize| sigma[k].iter().map(|v| v.abs()).sum::<f64>();

    // the symmetric part of R is -I, so ||sigma||_1 drops at rate 2 rho
    let bound = l1(0) / (2.0 * rho);
    let slack = params.f64("check.reach_slack")?;
    checks.push(Check::at_most(
        "reaching_time",
        traj.time(kr),
        bound * (1.0 + slack) + 2.0 * h,
    ));
    let same_orthant =
        |k: usize| (0..2).all(|j| sign(sigma[k][j]) == sign(sigma[k + 1][j]) && sigma[k][j] != 0.0);
    let rate = (0..kr)
        .filter(|&k| same_orthant(k))
        .map(|k| (l1(k + 1) - l1(k)) / h)
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::at_most("l1_decay_rate", rate, -2.0 * rho + 1e-9));

    let r_inf = (0..2)
        .map(|i| r.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let band = params.f64("check.band")? * h * rho * r_inf;
    checks.push(Check::at_most(
        "sliding_band",
        sup(sigma[settled(traj, kr, params)?..].iter().map(|s| s.amax())),
        band,
    ));

    // away from the origin every axis is crossed, never slid along
    let (mut events, mut bad) = (0usize, 0usize);
    for k in 0..kr {
        for j in 0..2 {
            let other = sigma[k][1 - j].abs();
            if sign(sigma[k][j]) != sign(sigma[k + 1][j]) && other > 10.0 * band {
                events += 1;
                let crossing = field.component_crossing(traj.time(k), &traj.states[k], j)?;
                if crossing != crate::fields::ComponentCrossing::Crosses {
                    bad += 1;
                }
            }
        }
    }
    checks.push(
        Check::at_least("axis_crossings", events as f64, 1.0)
            .with_detail("sign changes away from the origin"),
    );
    checks.push(
        Check::at_most("axis_sliding", bad as f64, 0.0)
            .with_detail("crossings that attract or repel"),
    );
    checks.push(sliding_at(
        &field,
        &b,
        &c,
        &a0,
        traj.time(kr),
        &traj.states[kr],
    )?);
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::super::run_scenario;

    #[test]
    fn relay_scalar_passes() {
        let out = run_scenario::<&str>("relay-scalar", &[]).unwrap();
        assert!(out.report.passed, "{}", out.report.to_text());
    }

    #[test]
    fn relay_linear_passes() {
        let out = run_scenario::<&str>("relay-linear-ex2", &[]).unwrap();
        assert!(out.report.passed, "{}", out.report.to_text());
    }

    #[test]
    fn rotation_relay_passes() {
        let out = run_scenario::<&str>("switching-ex3", &[]).unwrap();
        assert!(out.report.passed, "{}", out.report.to_text());
    }

    #[test]
    fn weak_relay_fails_reaching() {
        // gain below the perturbation amplitude: no finite-time reaching guarantee
        let out = run_scenario("relay-scalar", &["law.gain=0.3", "sim.horizon=1.0"]).unwrap();
        assert!(!out.report.passed);
    }
}
