//! The heat-equation example: full modal simulation and the reduced
//! input-output IDE.

use std::f64::consts::PI;

use super::{ls_slope, sup, Check, Run, Scenario};
use crate::config::Params;
use crate::equiv_control::detect_reaching;
use crate::error::{Error, Result};
use crate::fields::FeedbackLaw;
use crate::heat::{
    check_condition, heat_constants, heat_gain, heat_plant, l2_bound, simulate_heat, HeatConfig,
    HeatConstants, HeatControl, ModalStepper, Profile,
};
use crate::integrator::{euler_ide, HistoryMode, SimConfig, Trajectory};
use crate::linalg::{vector, Mat};
use crate::signal::Signal;
use crate::smc_design::{design, DesignOptions, DesignResult};

pub(super) fn scenarios() -> Vec<Scenario> {
    vec![
        Scenario {
            name: "heat-paper",
            summary: "heat equation, 60 sine modes, u = q sign(y) with q = -rho / CB",
            defaults: modal_defaults,
            simulate: modal_simulate,
            evaluate: modal_evaluate,
        },
        Scenario {
            name: "heat-ide-reduced",
            summary: "scalar input-output IDE of the heat loop against the modal simulation",
            defaults: reduced_defaults,
            simulate: reduced_simulate,
            evaluate: reduced_evaluate,
        },
    ]
}

fn heat_defaults() -> Params {
    Params::new()
        .with("heat.nu", 1.0)
        .with("heat.modes", 60i64)
        .with("heat.resolution", 2000i64)
        .with("heat.lambda", PI * PI)
        .with("heat.gamma", 0.5)
        .with("heat.x0_scale", 10.0)
        .with("heat.bump_lo", 0.3)
        .with("heat.bump_hi", 0.6)
        .with("law.rho", 1.0)
        .with("sim.h", 1e-3)
        .with("sim.horizon", 2.0)
        .with("sim.stepper", "exponential")
        .with("check.band", 20.0)
}

fn modal_defaults() -> Params {
    heat_defaults()
        .with("design.delta", 0.01)
        .with("check.decay_rate", 0.5)
        .with("check.decay_window", 0.5)
        .with("check.reported_tol", 0.05)
}

fn reduced_defaults() -> Params {
    let mut p = heat_defaults()
        .with("check.reach_gap", 0.05)
        .with("check.order_lo", 1.5)
        .with("check.order_hi", 2.5);
    p.set_override("sim.horizon=1.0").expect("declared key");
    p
}

pub fn heat_config(params: &Params) -> Result<HeatConfig> {
    Ok(HeatConfig {
        nu: params.f64("heat.nu")?,
        beta: Profile::Bump {
            lo: params.f64("heat.bump_lo")?,
            hi: params.f64("heat.bump_hi")?,
        },
        xi: Profile::SinePlusParabola,
        modes: params.usize("heat.modes")?,
        gamma: Signal::constant(params.f64("heat.gamma")?),
        x0: Profile::Parabola {
            scale: params.f64("heat.x0_scale")?,
        },
        lambda: params.f64("heat.lambda")?,
        resolution: params.usize("heat.resolution")?,
    })
}

fn stepper(params: &Params) -> Result<ModalStepper> {
    match params.text("sim.stepper")? {
        "exponential" => Ok(ModalStepper::Exponential),
        "euler" => Ok(ModalStepper::ExplicitEuler),
        other => Err(Error::Config(format!(
            "sim.stepper must be `exponential` or `euler`, got `{other}`"
        ))),
    }
}

/// `q = -rho / CB`.
fn gain(params: &Params, consts: &HeatConstants) -> Result<f64> {
    Ok(-params.f64("law.rho")? / consts.cb)
}

fn modal_run(params: &Params, control: &HeatControl, h: f64) -> Result<Trajectory> {
    let cfg = heat_config(params)?;
    simulate_heat(
        &cfg,
        control,
        0.0,
        h,
        params.f64("sim.horizon")?,
        stepper(params)?,
    )
}

/// First node after which `|y|` stays within `band` for the rest of the run.
fn settled_index(traj: &Trajectory, band: f64) -> Result<Option<usize>> {
    let start = detect_reaching(traj, &Mat::identity(1, 1), band)?;
    Ok(start.filter(|&k| traj.outputs[k..].iter().all(|y| y[0].abs() <= band)))
}

/// Design on the reduced plant `y' = drift y + CB (u + gamma) + memory`.
pub fn io_design(params: &Params) -> Result<DesignResult> {
    let cfg = heat_config(params)?;
    let h = params.f64("sim.h")?;
    let horizon = params.f64("sim.horizon")?;
    let (plant, io) = heat_plant(&cfg, 0.0, horizon, h)?;
    let opts = DesignOptions {
        delta: params.f64("design.delta")?,
        h,
        horizon,
        x0: Some(vector(&[io.y0])),
        ..DesignOptions::default()
    };
    design(&plant, &opts)
}

// heat-paper

fn modal_simulate(params: &Params) -> Result<Run> {
    let cfg = heat_config(params)?;
    let consts = heat_constants(&cfg)?;
    let q = gain(params, &consts)?;
    let mut run = Run::default();
    run.push(
        "modal",
        modal_run(
            params,
            &HeatControl::Sign(Signal::constant(q)),
            params.f64("sim.h")?,
        )?,
    );
    run.reconstruction = Some("modal".into());
    Ok(run)
}

fn modal_evaluate(params: &Params, run: &mut Run) -> Result<Vec<Check>> {
    let cfg = heat_config(params)?;
    let consts = heat_constants(&cfg)?;
    let condition = check_condition(&consts);
    let q = gain(params, &consts)?;
    let tol = params.f64("check.reported_tol")?;
    let mut checks = vec![
        Check::relative("cb_reported", consts.cb, 0.33, tol).informational(),
        Check::relative("norm_beta_reported", consts.norm_beta, 0.55, tol).informational(),
        Check::relative("norm_shift_reported", consts.norm_xi_shift, 0.8, tol).informational(),
        Check::at_least("condition_margin", condition.margin, f64::MIN_POSITIVE),
    ];
    let rho = params.f64("law.rho")?;
    match heat_gain(
        &consts,
        cfg.nu,
        cfg.gamma.sup_bound(),
        params.f64("design.delta")?,
    ) {
        Ok(required) => checks.push(
            Check::at_least("gain_formula", rho, required)
                .informational()
                .with_detail(format!("closed-form gain {required:.6e}")),
        ),
        Err(e) => checks.push(Check::failed("gain_formula", e.to_string()).informational()),
    }

    let traj = run.trajectory("modal")?;
    let h = traj.h();
    let band = params.f64("check.band")? * h;
    let Some(kr) = settled_index(traj, band)? else {
        checks.push(Check::failed(
            "reaching",
            format!("|y| does not settle within {band:e}"),
        ));
        return Ok(checks);
    };
    checks.push(
        Check::at_most("reaching_time", traj.time(kr), traj.time(traj.len() - 1))
            .with_detail("y stays in the band afterwards"),
    );

    let l2 = traj
        .aux("l2")
        .ok_or_else(|| Error::Config("modal trajectory lacks the l2 channel".into()))?;
    let window = params.f64("check.decay_window")?;
    let idx: Vec<usize> = (kr..traj.len())
        .filter(|&k| traj.time(k) <= traj.time(kr) + window && l2[k] > 0.0)
        .collect();
    let times: Vec<f64> = idx.iter().map(|&k| traj.time(k)).collect();
    let logs: Vec<f64> = idx.iter().map(|&k| l2[k].ln()).collect();
    match ls_slope(&times, &logs) {
        Some(slope) => checks.push(Check::at_most(
            "l2_decay",
            slope,
            -params.f64("check.decay_rate")? * cfg.nu,
        )),
        None => checks.push(Check::failed("l2_decay", "too few samples after reaching")),
    }
    let bound = l2_bound(q.abs(), cfg.gamma.sup_bound(), consts.norm_beta, cfg.nu);
    checks.push(Check::at_most(
        "l2_limit",
        *l2.last().unwrap_or(&f64::INFINITY),
        bound,
    ));
    Ok(checks)
}

// heat-ide-reduced

fn reduced_ide(params: &Params, control: Option<f64>, h: f64) -> Result<Trajectory> {
    let cfg = heat_config(params)?;
    let horizon = params.f64("sim.horizon")?;
    let (plant, io) = heat_plant(&cfg, 0.0, horizon, h)?;
    let law = match control {
        Some(q) => FeedbackLaw::relay(Mat::from_element(1, 1, q)),
        None => FeedbackLaw::continuous(1, |_, _| vector(&[0.0])),
    };
    let sim = SimConfig::new(0.0, horizon, h, vector(&[io.y0]))
        .with_history(HistoryMode::ExponentialRecurrence);
    euler_ide(&plant.closed_loop(law), &plant.kernel, &sim)
}

fn reduced_simulate(params: &Params) -> Result<Run> {
    let cfg = heat_config(params)?;
    let consts = heat_constants(&cfg)?;
    let q = gain(params, &consts)?;
    let h = params.f64("sim.h")?;
    let mut run = Run::default();
    run.push("reduced_ide", reduced_ide(params, Some(q), h)?);
    run.push(
        "modal",
        modal_run(params, &HeatControl::Sign(Signal::constant(q)), h)?,
    );
    run.push("open_ide", reduced_ide(params, None, h)?);
    run.push("open_ide_half", reduced_ide(params, None, 0.5 * h)?);
    run.push(
        "open_modal",
        modal_run(params, &HeatControl::OpenLoop(Signal::Zero), 0.5 * h)?,
    );
    Ok(run)
}

/// `sup_k |y_ide(t_k) - y_ref(t_k)|` on the nodes of `ide`, with `reference`
/// sampled on a grid refined by an integer factor.
fn output_gap(ide: &Trajectory, reference: &Trajectory) -> f64 {
    let ratio = (ide.h() / reference.h()).round().max(1.0) as usize;
    sup((0..ide.len())
        .filter(|k| k * ratio < reference.len())
        .map(|k| ide.outputs[k][0] - reference.outputs[k * ratio][0]))
}

fn reduced_evaluate(params: &Params, run: &mut Run) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let ide = run.trajectory("reduced_ide")?;
    let modal = run.trajectory("modal")?;
    let band = params.f64("check.band")? * ide.h();
    let reach_ide = settled_index(ide, band)?;
    let reach_modal = settled_index(modal, band)?;
    match (reach_ide, reach_modal) {
        (Some(a), Some(b)) => {
            checks.push(Check::at_most(
                "reduced_reaching",
                ide.time(a),
                ide.time(ide.len() - 1),
            ));
            checks.push(Check::at_most(
                "reaching_agreement",
                (ide.time(a) - modal.time(b)).abs(),
                params.f64("check.reach_gap")?,
            ));
        }
        _ => checks.push(Check::failed(
            "reduced_reaching",
            "one of the loops does not settle",
        )),
    }

    let reference = run.trajectory("open_modal")?;
    let coarse = output_gap(run.trajectory("open_ide")?, reference);
    let fine = output_gap(run.trajectory("open_ide_half")?, reference);
    checks.push(
        Check::at_most("open_loop_gap", coarse, 1e-6)
            .informational()
            .with_detail("IDE against modal output at h"),
    );
    checks.push(Check::within(
        "open_loop_order",
        coarse / fine,
        params.f64("check.order_lo")?,
        params.f64("check.order_hi")?,
    ));
    Ok(checks)
}
