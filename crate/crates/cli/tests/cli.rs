//! End-to-end runs of the `ctp-lab` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ctp-lab"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("CTP_LAB_THREADS", t),
        None => cmd.env_remove("CTP_LAB_THREADS"),
    };
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .next()
        .unwrap()
        .to_string()
}

fn summary_value(dir: &Path, key: &str) -> f64 {
    let text = fs::read_to_string(dir.join("summary.csv")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("{key} missing"))
        .parse()
        .unwrap()
}

const BASE: &str = "m = 1\nomega0 = 1\nnu = 0.1\nt_i = 0\nt_f = 6\nn = 600\nx0 = 1\nv0 = 0\n";

/// `(scenario, extra config, [(file, header)])`.
type Golden = (&'static str, &'static str, Vec<(&'static str, &'static str)>);

fn golden() -> Vec<Golden> {
    vec![
        (
            "green",
            "t_i = 0\nt_f = 20\nn = 64\neps = 0.5\n",
            vec![
                ("green_blocks.csv", "t,tprime,Dn,Df,Di"),
                ("green_analytic.csv", "t,tprime,sigma,sigmaprime,re,im,re_exact,im_exact"),
            ],
        ),
        ("damped", "", vec![("damped.csv", "t,x_plus,x_minus,x_exact"), ("balance.csv", "t,p_r,E,r_p,r_E")]),
        (
            "bath",
            "bath = 1, 0.8, 0.1\nbath = 2, 1.3, 0.05\n",
            vec![("kernel.csv", "tau,kappa"), ("comparison.csv", "t,x_full,x_eff,diff"), ("energy.csv", "t,E")],
        ),
        (
            "perturb",
            "g = 0.01\norder = 2\nt0 = 2\n",
            vec![("perturb.csv", "t,x_0,x_1,x_2,x_rk4"), ("residuals.csv", "iterate,residual")],
        ),
        ("noether", "", vec![("balance.csv", "t,p_r,E,r_p,r_E")]),
        ("causality", "assembly = retarded\nt0 = 3\n", vec![("response.csv", "t,x")]),
        ("ancilla", "", vec![("ancilla.csv", "t,x_plus,x_minus,x_rk4")]),
        ("hamiltonian", "", vec![("positions.csv", "t,x"), ("momenta.csv", "t_mid,p")]),
    ]
}

#[test]
fn every_scenario_writes_documented_schema() {
    let tmp = TempDir::new().unwrap();
    for (scenario, extra, files) in golden() {
        let out = tmp.path().join(scenario);
        let cfg = write_config(
            tmp.path(),
            &format!("{scenario}.cfg"),
            &format!("{BASE}{extra}output = {}\n", out.display()),
        );
        let o = run(&[scenario, "--config", cfg.to_str().unwrap()], None);
        assert!(o.status.success(), "{scenario}: {}", stderr(&o));
        assert_eq!(header(&out.join("summary.csv")), "quantity,value");
        for (file, head) in files {
            assert_eq!(header(&out.join(file)), head, "{scenario}/{file}");
        }
    }
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    for (scenario, extra, files) in golden() {
        let mut outputs = Vec::new();
        for k in 0..2 {
            let out = tmp.path().join(format!("{scenario}_{k}"));
            let cfg = write_config(
                tmp.path(),
                &format!("{scenario}_{k}.cfg"),
                &format!("{BASE}{extra}output = {}\n", out.display()),
            );
            let o = run(&[scenario, "--config", cfg.to_str().unwrap()], None);
            assert!(o.status.success(), "{}", stderr(&o));
            outputs.push(out);
        }
        for (file, _) in files.iter().chain(std::iter::once(&("summary.csv", ""))) {
            let a = fs::read(outputs[0].join(file)).unwrap();
            let b = fs::read(outputs[1].join(file)).unwrap();
            assert!(a == b, "{scenario}/{file} differs between runs");
        }
    }
}

#[test]
fn floats_round_trip_with_seventeen_digits() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let cfg = write_config(tmp.path(), "c.cfg", &format!("{BASE}output = {}\n", out.display()));
    assert!(run(&["damped", "--config", cfg.to_str().unwrap()], None).status.success());
    let text = fs::read_to_string(out.join("damped.csv")).unwrap();
    let row = text.lines().nth(7).unwrap();
    for cell in row.split(',') {
        let mantissa = cell.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.len(), 18, "{cell}");
        let v: f64 = cell.parse().unwrap();
        assert_eq!(format!("{v:.16e}"), cell);
    }
}

#[test]
fn green_example_matches_analytic_scale() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("g");
    let cfg = write_config(
        tmp.path(),
        "g.cfg",
        &format!("m = 1\nomega0 = 1\nt_i = 0\nt_f = 20\nn = 64\neps = 0.5\noutput = {}\n", out.display()),
    );
    let o = run(&["green", "--config", cfg.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = fs::read_to_string(out.join("green_blocks.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 63 * 63);
    let rows = fs::read_to_string(out.join("green_analytic.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 4 * 63 * 63);
    assert!(summary_value(&out, "max_relative_error").is_finite());
}

#[test]
fn causality_retarded_has_no_precursor() {
    let tmp = TempDir::new().unwrap();
    for (assembly, quiet, loud) in [("retarded", "pre_impulse_max", "post_impulse_max"), ("advanced", "post_impulse_max", "pre_impulse_max")] {
        let out = tmp.path().join(assembly);
        let cfg = write_config(
            tmp.path(),
            &format!("{assembly}.cfg"),
            &format!("{BASE}assembly = {assembly}\nt0 = 2.5\noutput = {}\n", out.display()),
        );
        let o = run(&["causality", "--config", cfg.to_str().unwrap()], None);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(summary_value(&out, quiet) <= 1e-10 * summary_value(&out, loud));
    }
}

#[test]
fn malformed_line_exits_one_with_line_number() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.cfg", "m = 1\n# fine\nomega0 1.0\n");
    let o = run(&["damped", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("input: line 3:"), "{err}");
}

#[test]
fn unknown_key_and_missing_file_exit_one() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "k.cfg", "m = 1\nfrobnicate = 2\n");
    let o = run(&["damped", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown key `frobnicate`"), "{}", stderr(&o));

    let missing = tmp.path().join("absent.cfg");
    let o = run(&["damped", "--config", missing.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("input:"));

    let o = run(&["levitate", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("input:"));

    let o = run(&["damped", "--config", cfg.to_str().unwrap(), "--set", "nope=1"], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_model_parameters_exit_one() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    for extra in ["m = -1\n", "n = 1\n", "bath = 1, 1, 0.1\ntau_e = -1\n"] {
        let scenario = if extra.contains("bath") { "bath" } else { "damped" };
        let cfg = write_config(tmp.path(), "c.cfg", &format!("{BASE}{extra}output = {}\n", out.display()));
        let o = run(&[scenario, "--config", cfg.to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(1), "{extra}: {}", stderr(&o));
    }
}

#[test]
fn numerical_failure_exits_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let cfg = write_config(
        tmp.path(),
        "c.cfg",
        &format!("{BASE}g = 50\nj0 = 5\norder = 8\nt0 = 2\noutput = {}\n", out.display()),
    );
    let o = run(&["perturb", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("numerical:"), "{}", stderr(&o));
}

#[test]
fn overrides_take_precedence() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let cfg = write_config(tmp.path(), "c.cfg", &format!("{BASE}output = {}\n", out.display()));
    let o = run(&["hamiltonian", "--config", cfg.to_str().unwrap(), "--set", "n=100", "--set", "t_f=1"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = fs::read_to_string(out.join("positions.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 101);
}

#[test]
fn sweep_writes_one_directory_per_value_and_summary() {
    let tmp = TempDir::new().unwrap();
    let mut summaries = Vec::new();
    for threads in ["1", "4"] {
        let out = tmp.path().join(format!("sweep_{threads}"));
        let cfg = write_config(
            tmp.path(),
            &format!("s{threads}.cfg"),
            &format!("m = 1\nomega0 = 1\nt_i = 0\nt_f = 20\nn = 64\noutput = {}\n", out.display()),
        );
        let o = run(
            &["green", "--config", cfg.to_str().unwrap(), "--sweep", "eps=2,1,0.5,0.25"],
            Some(threads),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        for k in 0..4 {
            assert!(out.join(format!("eps_{k:03}")).join("green_blocks.csv").exists());
        }
        let text = fs::read_to_string(out.join("sweep_summary.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "run,eps,max_relative_error,block_pattern_residual,endpoint_scalar_im");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("eps_000,2,"));
        summaries.push(text);
    }
    assert_eq!(summaries[0], summaries[1]);
}

#[test]
fn empty_or_bad_sweep_exits_one() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let cfg = write_config(tmp.path(), "c.cfg", &format!("{BASE}output = {}\n", out.display()));
    for spec in ["eps=", "assembly=retarded", "eps=1,abc"] {
        let o = run(&["damped", "--config", cfg.to_str().unwrap(), "--sweep", spec], None);
        assert_eq!(o.status.code(), Some(1), "{spec}: {}", stderr(&o));
    }
    let o = run(&["damped", "--config", cfg.to_str().unwrap(), "--sweep", "nu=0.1"], Some("zero"));
    assert_eq!(o.status.code(), Some(1));
}
