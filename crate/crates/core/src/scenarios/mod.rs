//! Registry of runnable examples with machine-checkable expected outcomes.
//!
//! A scenario is split into `simulate` (params to trajectories) and
//! `evaluate` (params and trajectories to checks), so stored CSVs can be
//! re-checked without re-running the simulation.

mod delay;
mod heat;
mod memory;
mod relay;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{Params, RunFile};
use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::smc_design::DesignResult;

/// One named, machine-checkable assertion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured quantity, when there is one.
    pub value: Option<f64>,
    /// Human-readable acceptance region, e.g. `<= 2.0e-2`.
    pub bound: String,
    /// Informational checks are reported but do not decide the outcome.
    pub gating: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, value: Option<f64>, bound: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            value,
            bound,
            gating: true,
            detail: String::new(),
        }
    }

    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self::new(name, value <= limit, Some(value), format!("<= {limit:.6e}"))
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self::new(name, value >= limit, Some(value), format!(">= {limit:.6e}"))
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self::new(
            name,
            (lo..=hi).contains(&value),
            Some(value),
            format!("in [{lo:.6e}, {hi:.6e}]"),
        )
    }

    pub fn relative(name: &str, value: f64, target: f64, rel: f64) -> Self {
        let ok = (value - target).abs() <= rel * target.abs();
        Self::new(
            name,
            ok,
            Some(value),
            format!("within {:.1}% of {target}", rel * 100.0),
        )
    }

    pub fn flag(name: &str, passed: bool, expectation: &str) -> Self {
        Self::new(name, passed, None, expectation.to_string())
    }

    pub fn informational(mut self) -> Self {
        self.gating = false;
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// A gating failure carrying the reason a check could not be evaluated.
    pub fn failed(name: &str, reason: impl Into<String>) -> Self {
        Self::new(name, false, None, "evaluable".into()).with_detail(reason)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub trajectories: Vec<String>,
    pub notes: Vec<String>,
    /// Wall-clock seconds for simulation and evaluation.
    pub elapsed: f64,
}

impl Report {
    pub fn new(scenario: &str, checks: Vec<Check>, run: &Run, elapsed: f64) -> Self {
        Self {
            scenario: scenario.to_string(),
            passed: checks.iter().filter(|c| c.gating).all(|c| c.passed),
            checks,
            trajectories: run.trajectories.iter().map(|(n, _)| n.clone()).collect(),
            notes: run.notes.clone(),
            elapsed,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(
            out,
            "scenario {}: {verdict} ({:.2} s)",
            self.scenario, self.elapsed
        );
        for c in &self.checks {
            let status = match (c.passed, c.gating) {
                (true, _) => "PASS",
                (false, true) => "FAIL",
                (false, false) => "info",
            };
            let value = c
                .value
                .map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
            let _ = write!(
                out,
                "  [{status}] {:<28} value {value:<14} expected {}",
                c.name, c.bound
            );
            if !c.detail.is_empty() {
                let _ = write!(out, " ({})", c.detail);
            }
            out.push('\n');
        }
        for note in &self.notes {
            let _ = writeln!(out, "  note: {note}");
        }
        out
    }
}

/// What a simulation produced.
#[derive(Debug, Clone, Default)]
pub struct Run {
    pub trajectories: Vec<(String, Trajectory)>,
    pub design: Option<DesignResult>,
    /// Trajectory whose modal states can be mapped back to `x(t, z)`.
    pub reconstruction: Option<String>,
    pub notes: Vec<String>,
}

impl Run {
    pub fn trajectory(&self, name: &str) -> Result<&Trajectory> {
        self.trajectories
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Config(format!("trajectory `{name}` is missing")))
    }

    pub fn trajectory_mut(&mut self, name: &str) -> Result<&mut Trajectory> {
        self.trajectories
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Config(format!("trajectory `{name}` is missing")))
    }

    fn push(&mut self, name: &str, traj: Trajectory) {
        self.trajectories.push((name.to_string(), traj));
    }
}

type SimulateFn = fn(&Params) -> Result<Run>;
type EvaluateFn = fn(&Params, &mut Run) -> Result<Vec<Check>>;

#[derive(Clone, Copy)]
pub struct Scenario {
    pub name: &'static str,
    pub summary: &'static str,
    defaults: fn() -> Params,
    simulate: SimulateFn,
    evaluate: EvaluateFn,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Scenario({})", self.name)
    }
}

impl Scenario {
    pub fn defaults(&self) -> Params {
        (self.defaults)()
    }
}

pub fn registry() -> Vec<Scenario> {
    let mut all = Vec::new();
    all.extend(relay::scenarios());
    all.extend(memory::scenarios());
    all.extend(delay::scenarios());
    all.extend(heat::scenarios());
    all
}

pub fn names() -> Vec<&'static str> {
    registry().iter().map(|s| s.name).collect()
}

pub fn find(name: &str) -> Result<Scenario> {
    registry()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownScenario(name.to_string()))
}

/// Parameters of `name` with a run file's sections and `key=value`
/// overrides applied, in that order.
pub fn resolve_params<S: AsRef<str>>(
    name: &str,
    file: Option<&RunFile>,
    overrides: &[S],
) -> Result<Params> {
    let mut params = find(name)?.defaults();
    if let Some(file) = file {
        params.merge_toml(&file.sections, &[])?;
    }
    params.apply_overrides(overrides)?;
    Ok(params)
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub params: Params,
    pub run: Run,
    pub report: Report,
}

pub fn run_scenario<S: AsRef<str>>(name: &str, overrides: &[S]) -> Result<Outcome> {
    let params = resolve_params(name, None, overrides)?;
    run_with_params(name, params)
}

pub fn run_with_params(name: &str, params: Params) -> Result<Outcome> {
    let scenario = find(name)?;
    let start = Instant::now();
    let mut run = (scenario.simulate)(&params)?;
    let checks = (scenario.evaluate)(&params, &mut run)?;
    let report = Report::new(name, checks, &run, start.elapsed().as_secs_f64());
    Ok(Outcome {
        params,
        run,
        report,
    })
}

/// Which artifacts are written next to the report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emit {
    pub trajectory: bool,
    pub design: bool,
    pub indicator: bool,
    pub reconstruction: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Self {
            trajectory: true,
            design: true,
            indicator: true,
            reconstruction: false,
        }
    }
}

pub const PARAMS_FILE: &str = "params.toml";
pub const REPORT_TEXT: &str = "report.txt";
pub const REPORT_JSON: &str = "report.json";
pub const DESIGN_FILE: &str = "design.json";
pub const RECONSTRUCTION_FILE: &str = "reconstruction.csv";

/// Aux channel prefixes that make up the sliding indicator export.
const INDICATOR_PREFIXES: [&str; 2] = ["u_eps_", "delta_"];

impl Outcome {
    /// Writes all artifacts into `dir` (created if needed) and returns the
    /// written paths.
    pub fn write_to(&self, dir: &Path, emit: Emit) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: &str, body: &str| -> Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, body)?;
            written.push(path);
            Ok(())
        };
        let params = format!(
            "scenario = {:?}\n\n{}",
            self.report.scenario,
            self.params.to_toml()
        );
        put(PARAMS_FILE, &params)?;
        put(REPORT_TEXT, &self.report.to_text())?;
        put(REPORT_JSON, &serde_json::to_string_pretty(&self.report)?)?;
        if emit.design {
            if let Some(design) = &self.run.design {
                put(DESIGN_FILE, &design.to_json()?)?;
            }
        }
        for (name, traj) in &self.run.trajectories {
            if emit.trajectory {
                let path = dir.join(format!("{name}.csv"));
                traj.save_csv(&path)?;
                written.push(path);
            }
            if emit.indicator {
                if let Some(path) = write_indicator(dir, name, traj)? {
                    written.push(path);
                }
            }
        }
        if emit.reconstruction {
            if let Some(name) = &self.run.reconstruction {
                let traj = self.run.trajectory(name)?;
                let path = dir.join(RECONSTRUCTION_FILE);
                let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
                crate::heat::write_reconstruction(traj, 100, 10, file)?;
                written.push(path);
            }
        }
        Ok(written)
    }
}

fn write_indicator(dir: &Path, name: &str, traj: &Trajectory) -> Result<Option<PathBuf>> {
    let channels: Vec<&(String, Vec<f64>)> = traj
        .aux
        .iter()
        .filter(|(n, _)| INDICATOR_PREFIXES.iter().any(|p| n.starts_with(p)))
        .collect();
    if channels.is_empty() {
        return Ok(None);
    }
    let path = dir.join(format!("{name}_indicator.csv"));
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["t".to_string()];
    header.extend(channels.iter().map(|(n, _)| n.clone()));
    w.write_record(&header)?;
    for k in 0..traj.len() {
        let mut row = vec![crate::integrator::fmt_f64(traj.time(k))];
        row.extend(
            channels
                .iter()
                .map(|(_, v)| crate::integrator::fmt_f64(v[k])),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(Some(path))
}

/// Re-evaluates the checks of a stored run from its parameters, trajectory
/// CSVs and design summary.
pub fn check_stored(dir: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(dir.join(PARAMS_FILE))?;
    let file = RunFile::parse(&text)?;
    let name = file
        .scenario
        .clone()
        .ok_or_else(|| Error::Config(format!("{} has no `scenario` entry", PARAMS_FILE)))?;
    let params = resolve_params::<&str>(&name, Some(&file), &[])?;
    let stored: Report = serde_json::from_str(&std::fs::read_to_string(dir.join(REPORT_JSON))?)?;
    let scenario = find(&name)?;
    let start = Instant::now();
    let mut run = Run::default();
    for traj in &stored.trajectories {
        let path = dir.join(format!("{traj}.csv"));
        if !path.exists() {
            return Err(Error::Config(format!(
                "{} is missing; rerun with trajectory output enabled",
                path.display()
            )));
        }
        run.push(traj, Trajectory::load_csv(&path)?);
    }
    let design_path = dir.join(DESIGN_FILE);
    if design_path.exists() {
        run.design = Some(serde_json::from_str(&std::fs::read_to_string(
            design_path,
        )?)?);
    }
    run.notes = stored.notes.clone();
    let checks = (scenario.evaluate)(&params, &mut run)?;
    Ok(Report::new(
        &name,
        checks,
        &run,
        start.elapsed().as_secs_f64(),
    ))
}

/// Scenarios whose plant the `design` command accepts.
pub const DESIGN_PLANTS: [&str; 3] = ["delay-ide-4.1", "delay-ide-4.1-feasible", "heat-paper"];

/// Controller design for the plant of a named scenario, under that
/// scenario's parameters. For the heat example this is the scalar
/// input-output plant.
pub fn design_named(name: &str, params: &Params) -> Result<DesignResult> {
    match name {
        "delay-ide-4.1" | "delay-ide-4.1-feasible" => {
            delay::run_design(&delay::build_plant(params)?, params)
        }
        "heat-paper" => heat::io_design(params),
        _ => Err(Error::UnknownScenario(format!(
            "{name} has no design plant; choose one of {}",
            DESIGN_PLANTS.join(", ")
        ))),
    }
}

// helpers shared by the scenario families

fn sup(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Least-squares slope of `values` against `times`.
pub fn ls_slope(times: &[f64], values: &[f64]) -> Option<f64> {
    let n = times.len().min(values.len());
    if n < 2 {
        return None;
    }
    let mt = times[..n].iter().sum::<f64>() / n as f64;
    let mv = values[..n].iter().sum::<f64>() / n as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..n {
        num += (times[k] - mt) * (values[k] - mv);
        den += (times[k] - mt).powi(2);
    }
    (den > 0.0).then(|| num / den)
}

/// `x0_1, x0_2, ...` entries of a section as a vector.
fn indexed_vector(params: &Params, prefix: &str, n: usize) -> Result<crate::linalg::Vector> {
    let values = (1..=n)
        .map(|j| params.f64(&format!("{prefix}_{j}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(crate::linalg::Vector::from_vec(values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_findable() {
        let names = names();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        for n in names {
            assert_eq!(find(n).unwrap().name, n);
        }
        assert!(matches!(find("nope"), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn overrides_are_checked_against_defaults() {
        assert!(run_scenario("relay-scalar", &["sim.nothing=1"]).is_err());
    }

    #[test]
    fn slope_of_line() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let v: Vec<f64> = t.iter().map(|x| 2.0 - 0.5 * x).collect();
        assert!((ls_slope(&t, &v).unwrap() + 0.5).abs() < 1e-15);
        assert!(ls_slope(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn report_verdict_ignores_informational() {
        let run = Run::default();
        let checks = vec![
            Check::at_most("a", 1.0, 2.0),
            Check::at_most("b", 3.0, 2.0).informational(),
        ];
        let report = Report::new("x", checks, &run, 0.0);
        assert!(report.passed);
        assert!(report.to_text().contains("[info] b"));
    }

    #[test]
    fn design_plants_resolve() {
        for name in DESIGN_PLANTS {
            let params = find(name).unwrap().defaults();
            let result = design_named(name, &params).unwrap();
            assert!(result.memory_bound.is_finite(), "{name}");
        }
        let params = find("relay-scalar").unwrap().defaults();
        assert!(matches!(
            design_named("relay-scalar", &params),
            Err(Error::UnknownScenario(_))
        ));
    }
}
