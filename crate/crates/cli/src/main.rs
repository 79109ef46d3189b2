use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use idesmc_core::config::{PlantSpec, RunFile};
use idesmc_core::scenarios::{self, Emit, Outcome, Report, DESIGN_PLANTS};
use idesmc_core::smc_design::{design, DesignOptions, DesignResult};
use idesmc_core::Error;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "idesmc",
    version,
    about = "Simulate and design sliding-mode control of integro-differential equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios and write trajectories, design summary and check report
    Run(RunArgs),
    /// Design a controller for a named or inline plant and print the result
    Design(DesignArgs),
    /// Re-evaluate the checks of a stored run directory
    Check {
        /// Directory written by `run`
        dir: PathBuf,
    },
    /// List the available scenarios
    List,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario names; may be omitted when the config file names one
    scenarios: Vec<String>,
    /// TOML run file: optional `scenario` and `output`, then one table per
    /// parameter section
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output root; each scenario writes into `<out>/<scenario>`
    #[arg(short, long, env = "IDESMC_OUT", default_value = "out")]
    out: PathBuf,
    /// Parameter override `section.key=value`, repeatable
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Skip the trajectory CSV files
    #[arg(long)]
    no_trajectory: bool,
    /// Skip design.json
    #[arg(long)]
    no_design: bool,
    /// Skip the sliding-indicator CSV files
    #[arg(long)]
    no_indicator: bool,
    /// Also write the sampled spatial field (heat scenarios)
    #[arg(long)]
    reconstruction: bool,
    /// Run several scenarios on separate threads
    #[arg(long)]
    parallel: bool,
    /// Print only the summary line of each report
    #[arg(short, long)]
    quiet: bool,
}

#[derive(Args)]
struct DesignArgs {
    /// Plant of a named scenario
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    plant: Option<String>,
    /// TOML file with an inline plant: a, b, c, x0, optional b_tilde and
    /// gamma_bar, and a [kernel] table
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Parameter override for a named plant, repeatable
    #[arg(
        short = 's',
        long = "set",
        value_name = "KEY=VALUE",
        requires = "plant"
    )]
    overrides: Vec<String>,
    /// Reaching margin delta (inline plants)
    #[arg(long, default_value_t = idesmc_core::smc_design::DEFAULT_MARGIN)]
    delta: f64,
    /// Gain override; the design still reports feasibility (inline plants)
    #[arg(long)]
    rho: Option<f64>,
    /// Horizon of the memory bound (inline plants)
    #[arg(long, default_value_t = 5.0)]
    horizon: f64,
    /// Grid step of the memory bound (inline plants)
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// Print only the JSON record
    #[arg(long)]
    json: bool,
}

/// Errors in what the user asked for, as opposed to failures of a run.
fn is_usage(e: &Error) -> bool {
    matches!(
        e,
        Error::UnknownScenario(_) | Error::Param(_) | Error::Config(_) | Error::Io(_)
    )
}

fn fail(context: &str, e: &Error) -> ExitCode {
    eprintln!("error: {context}: {e}");
    ExitCode::from(if is_usage(e) { EXIT_USAGE } else { EXIT_FAIL })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for s in scenarios::registry() {
                println!("{:<24} {}", s.name, s.summary);
            }
            ExitCode::SUCCESS
        }
        Command::Run(args) => run(args),
        Command::Design(args) => run_design(args),
        Command::Check { dir } => match scenarios::check_stored(&dir) {
            Ok(report) => {
                print!("{}", report.to_text());
                exit_for(&[report])
            }
            Err(e) => fail(&dir.display().to_string(), &e),
        },
    }
}

fn exit_for(reports: &[Report]) -> ExitCode {
    if reports.iter().all(|r| r.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn run(args: RunArgs) -> ExitCode {
    let file = match &args.config {
        Some(path) => match std::fs::read_to_string(path)
            .map_err(Error::from)
            .and_then(|text| RunFile::parse(&text))
        {
            Ok(f) => Some(f),
            Err(e) => return fail(&path.display().to_string(), &e),
        },
        None => None,
    };
    let mut names = args.scenarios.clone();
    if names.is_empty() {
        match file.as_ref().and_then(|f| f.scenario.clone()) {
            Some(name) => names.push(name),
            None => {
                eprintln!("error: no scenario given; pass a name or a config with `scenario = ...` (see `idesmc list`)");
                return ExitCode::from(EXIT_USAGE);
            }
        }
    }
    // a run file's `output` applies only when --out was left at its default
    let out = match file.as_ref().and_then(|f| f.output.clone()) {
        Some(o) if args.out == Path::new("out") => PathBuf::from(o),
        _ => args.out.clone(),
    };

    // resolve everything up front so a typo fails before any simulation
    let mut jobs = Vec::new();
    for name in &names {
        match scenarios::resolve_params(name, file.as_ref(), &args.overrides) {
            Ok(p) => jobs.push((name.clone(), p)),
            Err(e) => return fail(name, &e),
        }
    }
    let emit = Emit {
        trajectory: !args.no_trajectory,
        design: !args.no_design,
        indicator: !args.no_indicator,
        reconstruction: args.reconstruction,
    };
    let execute = |(name, params): (String, _)| -> (String, idesmc_core::Result<Outcome>) {
        let outcome = scenarios::run_with_params(&name, params).and_then(|o| {
            o.write_to(&out.join(&name), emit)?;
            Ok(o)
        });
        (name, outcome)
    };
    let results: Vec<_> = if args.parallel && jobs.len() > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .into_iter()
                .map(|job| scope.spawn(|| execute(job)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("scenario thread panicked"))
                .collect()
        })
    } else {
        jobs.into_iter().map(execute).collect()
    };

    let mut reports = Vec::new();
    let mut code = None;
    for (name, result) in results {
        match result {
            Ok(outcome) => {
                if args.quiet {
                    println!(
                        "{}",
                        outcome.report.to_text().lines().next().unwrap_or_default()
                    );
                } else {
                    print!("{}", outcome.report.to_text());
                    println!("  -> {}", out.join(&name).display());
                }
                reports.push(outcome.report);
            }
            Err(e) => {
                let exit = fail(&name, &e);
                code.get_or_insert(exit);
            }
        }
    }
    code.unwrap_or_else(|| exit_for(&reports))
}

fn run_design(args: DesignArgs) -> ExitCode {
    let (label, result) = match (&args.plant, &args.config) {
        (Some(name), _) => {
            if !DESIGN_PLANTS.contains(&name.as_str()) {
                eprintln!(
                    "error: no design plant `{name}`; choose one of {}",
                    DESIGN_PLANTS.join(", ")
                );
                return ExitCode::from(EXIT_USAGE);
            }
            let result = scenarios::resolve_params(name, None, &args.overrides)
                .and_then(|p| scenarios::design_named(name, &p));
            (name.clone(), result)
        }
        (None, Some(path)) => {
            let result = std::fs::read_to_string(path)
                .map_err(Error::from)
                .and_then(|text| PlantSpec::from_toml(&text))
                .and_then(|spec| {
                    let opts = DesignOptions {
                        delta: args.delta,
                        rho_override: args.rho,
                        horizon: args.horizon,
                        h: args.step,
                        x0: Some(spec.x0()),
                        ..DesignOptions::default()
                    };
                    design(&spec.build()?, &opts)
                });
            (path.display().to_string(), result)
        }
        (None, None) => unreachable!("clap requires --plant or --config"),
    };
    let result = match result {
        Ok(r) => r,
        Err(e) => return fail(&label, &e),
    };
    if !args.json {
        print_design(&label, &result);
    }
    match result.to_json() {
        Ok(json) => println!("{json}"),
        Err(e) => return fail(&label, &e),
    }
    if result.feasible {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn print_design(label: &str, r: &DesignResult) {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6e}"));
    println!("plant               {label}");
    println!("memory bound M      {:.6e}", r.memory_bound);
    println!("rho (formula)       {}", opt(r.rho_formula));
    println!("rho (override)      {}", opt(r.rho_override));
    println!("rho (used)          {}", opt(r.rho));
    println!("delta               {:.6e}", r.delta);
    println!("reaching bound      {}", opt(r.reaching_time_bound));
    println!("feasible            {}", r.feasible);
    for d in &r.diagnostics {
        println!("  note: {d}");
    }
}
