use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn idesmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idesmc"))
        .args(args)
        .env_remove("IDESMC_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn list_names_every_scenario() {
    let out = idesmc(&["list"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for name in [
        "relay-scalar",
        "relay-linear-ex2",
        "switching-ex3",
        "nonunique-ex5",
        "two-kind-ex7",
        "delay-ide-4.1",
        "delay-ide-4.1-feasible",
        "heat-paper",
        "heat-ide-reduced",
    ] {
        assert!(text.contains(name), "{name} missing from:\n{text}");
    }
}

#[test]
fn run_writes_artifacts_and_check_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_str().unwrap();
    let out = idesmc(&["run", "relay-scalar", "--out", root]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let run_dir = dir.path().join("relay-scalar");
    for file in [
        "params.toml",
        "report.txt",
        "report.json",
        "closed_loop.csv",
        "closed_loop_indicator.csv",
    ] {
        assert!(run_dir.join(file).exists(), "{file} not written");
    }
    let header = fs::read_to_string(run_dir.join("closed_loop.csv")).unwrap();
    assert!(header.starts_with("t,x_1,y_1,u_1"));

    let checked = idesmc(&["check", run_dir.to_str().unwrap()]);
    assert_eq!(code(&checked), 0, "{}", stdout(&checked));
    let first = fs::read_to_string(run_dir.join("report.txt")).unwrap();
    // elapsed time differs; the check lines must not
    let lines = |s: &str| s.lines().skip(1).map(str::to_owned).collect::<Vec<_>>();
    assert_eq!(lines(&first), lines(&stdout(&checked)));
}

#[test]
fn repeated_runs_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = idesmc(&[
            "run",
            "switching-ex3",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
    }
    let read = |d: &Path| fs::read(d.join("switching-ex3/closed_loop.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn failing_checks_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // gain below the disturbance amplitude: no sliding
    let out = idesmc(&[
        "run",
        "relay-scalar",
        "--out",
        dir.path().to_str().unwrap(),
        "-s",
        "law.gain=0.3",
    ]);
    assert_eq!(code(&out), 1, "{}", stdout(&out));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_str().unwrap();
    let unknown_key = idesmc(&["run", "relay-scalar", "--out", root, "-s", "law.gian=2"]);
    assert_eq!(code(&unknown_key), 2);
    let stderr = String::from_utf8_lossy(&unknown_key.stderr);
    assert!(
        stderr.contains("law.gain"),
        "known keys not listed: {stderr}"
    );

    let wrong_type = idesmc(&["run", "relay-scalar", "--out", root, "-s", "law.gain=fast"]);
    assert_eq!(code(&wrong_type), 2);
    assert_eq!(
        code(&idesmc(&["run", "no-such-scenario", "--out", root])),
        2
    );
    assert_eq!(code(&idesmc(&["run", "--out", root])), 2);
    assert_eq!(code(&idesmc(&["frobnicate"])), 2);
    assert_eq!(code(&idesmc(&["design", "--plant", "relay-scalar"])), 2);
    assert_eq!(code(&idesmc(&["check", root])), 2);
}

#[test]
fn config_file_supplies_scenario_output_and_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-config");
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        format!(
            "scenario = \"relay-scalar\"\noutput = {:?}\n\n[law]\ngain = 2.0\n\n[sim]\nhorizon = 1.5\n",
            target.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = idesmc(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let params = fs::read_to_string(target.join("relay-scalar/params.toml")).unwrap();
    assert!(params.contains("gain = 2.0"), "{params}");
    assert!(params.contains("horizon = 1.5"), "{params}");
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_idesmc"))
        .args(["run", "two-kind-ex7", "--no-indicator", "-q"])
        .env("IDESMC_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let run_dir = dir.path().join("two-kind-ex7");
    assert!(run_dir.join("first_kind.csv").exists());
    assert!(!run_dir.join("first_kind_indicator.csv").exists());
}

#[test]
fn parallel_runs_report_every_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = idesmc(&[
        "run",
        "relay-scalar",
        "relay-linear-ex2",
        "switching-ex3",
        "--parallel",
        "-q",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 3, "{text}");
    assert!(text.lines().all(|l| l.contains("PASS")));
}

#[test]
fn design_reports_bound_gain_and_feasibility() {
    let feasible = idesmc(&["design", "--plant", "delay-ide-4.1-feasible"]);
    assert_eq!(code(&feasible), 0);
    let text = stdout(&feasible);
    assert!(text.contains("memory bound M      5.000000e-1"), "{text}");
    assert!(text.contains("rho (formula)       3.200000e0"), "{text}");
    assert!(text.contains("feasible            true"));

    // M = 1: no formula gain, the override is used and the design is flagged
    let unit_memory = idesmc(&["design", "--plant", "delay-ide-4.1"]);
    assert_eq!(code(&unit_memory), 1);
    let text = stdout(&unit_memory);
    assert!(text.contains("rho (used)          4.000000e0"), "{text}");
    assert!(text.contains("feasible            false"));

    let heat = idesmc(&["design", "--plant", "heat-paper", "--json"]);
    let text = stdout(&heat);
    assert!(text.trim_start().starts_with('{'), "{text}");
    assert!(text.contains("\"memory_bound\""));
}

#[test]
fn design_accepts_an_inline_plant() {
    let dir = tempfile::tempdir().unwrap();
    let plant = dir.path().join("plant.toml");
    fs::write(
        &plant,
        "a = [[-1.0, 0.0], [0.0, -2.0]]\n\
         b = [[0.0], [1.0]]\n\
         c = [[0.0, 1.0]]\n\
         x0 = [1.0, 1.0]\n\
         gamma_bar = 0.2\n\
         [kernel]\n\
         kind = \"exponential_series\"\n\
         terms = [{ rate = 2.0, coeff = [[0.0, 0.0], [0.0, 0.5]] }]\n",
    )
    .unwrap();
    let out = idesmc(&[
        "design",
        "--config",
        plant.to_str().unwrap(),
        "--delta",
        "0.2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    // M = int_0^inf 0.5 e^{-2s} ds = 0.25 up to the finite horizon
    assert!(text.contains("memory bound M      2.5"), "{text}");
    assert!(text.contains("feasible            true"));

    fs::write(&plant, "a = [[1.0]]\n").unwrap();
    let bad = idesmc(&["design", "--config", plant.to_str().unwrap()]);
    assert_eq!(code(&bad), 2);
}
