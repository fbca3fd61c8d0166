use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_fsa-search");

fn tiny_experiment(dir: &Path, solver: &str) -> PathBuf {
    fs::write(
        dir.join("tiny.toml"),
        "version = 1\nkind = \"tiny\"\n[tiny]\nobs_noise = 0.1\n",
    )
    .unwrap();
    let cfg = dir.join("run.toml");
    fs::write(
        &cfg,
        format!(
            "version = 1\ndomain = \"tiny.toml\"\nsolver = \"{solver}\"\nseeds = [1]\n\
             [gdice]\niterations = 4\nsamples = 8\nelites = 2\nhorizon = 6\nn_eval_traj = 5\n\
             [epscko]\nn_nodes = 2\niterations = 4\nsamples = 8\nelites = 2\nhorizon = 6\n\
             [sweep]\nfactors = [2, 3]\n\
             [evaluation]\nn_traj = 20\n"
        ),
    )
    .unwrap();
    cfg
}

fn run(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("FSA_SEARCH_OUT");
    if let Some(dir) = env_out {
        cmd.env("FSA_SEARCH_OUT", dir);
    }
    cmd.output().unwrap()
}

fn csv_files(dir: &Path) -> Vec<String> {
    match fs::read_dir(dir) {
        Ok(entries) => entries
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".csv"))
            .collect(),
        Err(_) => Vec::new(),
    }
}

#[test]
fn solve_writes_trace_summary_and_policy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_experiment(tmp.path(), "gdice");
    let out = tmp.path().join("out");
    let res = run(
        &[
            "solve",
            "--config",
            cfg.to_str().unwrap(),
            "--seed-list",
            "4,5",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = fs::read_to_string(out.join("solve_summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("solver,scheme,d,seed,value,stderr,n_traj"));
    let seeds: Vec<&str> = lines.map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(seeds, vec!["4", "5"]);
    assert!(out.join("solve_trace.csv").exists());
    assert!(out.join("policy_gdice_none_d2_seed4.json").exists());
}

#[test]
fn output_directory_comes_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_experiment(tmp.path(), "gdice");
    let out = tmp.path().join("from-env");
    let res = run(
        &["compare-accel", "--config", cfg.to_str().unwrap(), "--jobs", "1"],
        Some(&out),
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = fs::read_to_string(out.join("compare_accel_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 5);
}

#[test]
fn sweep_covers_factors_and_continuous_solver() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_experiment(tmp.path(), "gdice");
    let out = tmp.path().join("out");
    let res = run(
        &[
            "sweep-discretization",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = fs::read_to_string(out.join("sweep_discretization_summary.csv")).unwrap();
    let ds: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(ds, vec!["2", "3", "continuous"]);
}

#[test]
fn evaluate_values_a_saved_policy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_experiment(tmp.path(), "epscko");
    let out = tmp.path().join("out");
    let res = run(
        &[
            "solve",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let policy = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "json"))
        .unwrap();
    let eval_out = tmp.path().join("eval");
    let res = run(
        &[
            "evaluate",
            "--policy",
            policy.to_str().unwrap(),
            "--domain",
            tmp.path().join("tiny.toml").to_str().unwrap(),
            "--n-traj",
            "30",
            "--seed-list",
            "1,2",
            "--out",
            eval_out.to_str().unwrap(),
        ],
        None,
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(eval_out.join("evaluate.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("seed,value,stderr,n_traj"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn missing_domain_file_fails_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "version = 1\ndomain = \"nowhere.toml\"\n").unwrap();
    let out = tmp.path().join("out");
    let res = run(
        &[
            "solve",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("nowhere.toml"));
    assert!(csv_files(&out).is_empty());
}

#[test]
fn unknown_config_key_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_experiment(tmp.path(), "gdice");
    let text = fs::read_to_string(&cfg).unwrap() + "\n[output]\ntimming = true\n";
    fs::write(&cfg, text).unwrap();
    let res = run(
        &["solve", "--config", cfg.to_str().unwrap()],
        Some(&tmp.path().join("out")),
    );
    assert!(!res.status.success());
    assert!(csv_files(&tmp.path().join("out")).is_empty());
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in [
        "solve_tiny.toml",
        "solve_nuclear.toml",
        "compare_accel_grid.toml",
        "sweep_nuclear.toml",
    ] {
        fsa_search::harness::Experiment::load(&dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn tiny_solve_matches_the_enumerated_optimum() {
    use fsa_search::domains::{tiny, TinyOracleDomain};
    use fsa_search::fsa::exhaustive_policy_search;

    let d = TinyOracleDomain::default();
    let (_, optimum) =
        exhaustive_policy_search(&d, 2, 2, |p| d.exact_value(&p[0].to_stochastic(), tiny::HORIZON)).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/solve_tiny.toml");
    let res = run(
        &["solve", "--config", cfg.to_str().unwrap(), "--seed-list", "2"],
        Some(tmp.path()),
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let trace = fs::read_to_string(tmp.path().join("solve_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 150);
    let summary = fs::read_to_string(tmp.path().join("solve_summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    let (value, stderr): (f64, f64) = (row[4].parse().unwrap(), row[5].parse().unwrap());
    assert!(
        (value - optimum).abs() <= 0.02 * optimum + 3.0 * stderr,
        "{value} vs {optimum}"
    );
}
