//! The experiment drivers behind the command-line subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use crate::epscko::{epscko_search, EpsckoConfig, SearchTrace};
use crate::error::Result;
use crate::fsa::{gdice_search, DeterministicFsa, GdiceConfig};
use crate::sim::{evaluate, Evaluation};
use crate::with_domain;

use super::config::{AnyDomain, Experiment, SchemeSpec, SolverKind};
use super::output::{CellKey, Resolution, SummaryRow, SummaryWriter, TraceWriter};
use super::policy_io::JointPolicy;

/// Outcome of one solver run.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub key: CellKey,
    pub trace: SearchTrace,
    pub policy: JointPolicy,
    /// Value of `policy` from independent rollouts.
    pub value: Evaluation,
}

impl CellResult {
    pub fn summary(&self) -> SummaryRow {
        SummaryRow {
            key: self.key.clone(),
            value: self.value.mean,
            stderr: self.value.stderr,
            n_traj: self.value.n,
        }
    }
}

/// Monte Carlo value of a stored joint policy over `horizon` steps.
pub fn evaluate_policy(
    policy: &JointPolicy,
    domain: &AnyDomain,
    horizon: u64,
    n_traj: usize,
    seed: u64,
) -> Result<Evaluation> {
    with_domain!(domain, d => {
        policy.check_compatible(d)?;
        match policy {
            JointPolicy::Fsa { robots } => evaluate(d, robots, n_traj, horizon, seed),
            JointPolicy::SkFsa { robots, .. } => evaluate(d, robots, n_traj, horizon, seed),
        }
    })
}

fn fsa_policy(best: &[DeterministicFsa]) -> JointPolicy {
    JointPolicy::Fsa {
        robots: best.iter().map(DeterministicFsa::to_stochastic).collect(),
    }
}

/// One G-DICE run, valued by `n_traj` fresh rollouts seeded with `seed`.
pub fn run_gdice_cell(
    domain: &AnyDomain,
    config: &GdiceConfig,
    scheme: &str,
    seed: u64,
    n_traj: usize,
) -> Result<CellResult> {
    let result = with_domain!(domain, d => gdice_search(d, config, seed))?;
    let policy = fsa_policy(&result.best_policy);
    let value = evaluate_policy(&policy, domain, config.horizon, n_traj, seed)?;
    Ok(CellResult {
        key: CellKey {
            solver: "gdice".into(),
            scheme: scheme.into(),
            d: Resolution::Factor(config.factor),
            seed,
        },
        trace: result.trace,
        policy,
        value,
    })
}

fn epscko_label(config: &EpsckoConfig) -> String {
    if config.alpha_ei > 0.0 {
        format!("entropy-injection({})", config.alpha_ei)
    } else {
        "none".into()
    }
}

/// One EPSCKO run, valued by `n_traj` fresh rollouts seeded with `seed`.
pub fn run_epscko_cell(domain: &AnyDomain, config: &EpsckoConfig, seed: u64, n_traj: usize) -> Result<CellResult> {
    let result = with_domain!(domain, d => epscko_search(d, config, seed))?;
    let policy = JointPolicy::SkFsa {
        lambda: config.lambda,
        robots: result.policy,
    };
    let value = evaluate_policy(&policy, domain, config.horizon, n_traj, seed)?;
    Ok(CellResult {
        key: CellKey {
            solver: "epscko".into(),
            scheme: epscko_label(config),
            d: Resolution::Continuous,
            seed,
        },
        trace: result.trace,
        policy,
        value,
    })
}

/// Runs the configured solver once per seed.
pub fn solve(exp: &Experiment, seeds: &[u64]) -> Result<Vec<CellResult>> {
    let cfg = &exp.config;
    seeds
        .iter()
        .map(|&seed| match cfg.solver {
            SolverKind::Gdice => run_gdice_cell(
                &exp.domain,
                &cfg.gdice,
                &cfg.gdice.acceleration.label(),
                seed,
                cfg.evaluation.n_traj,
            ),
            SolverKind::Epscko => run_epscko_cell(&exp.domain, &cfg.epscko, seed, cfg.evaluation.n_traj),
        })
        .collect()
}

/// G-DICE under every scheme of the sweep, once per seed.
pub fn compare_accel(exp: &Experiment, seeds: &[u64]) -> Result<Vec<CellResult>> {
    let cfg = &exp.config;
    let mut out = Vec::new();
    for SchemeSpec {
        label,
        alpha,
        acceleration,
    } in &cfg.sweep.schemes
    {
        let gd = GdiceConfig {
            alpha: *alpha,
            acceleration: *acceleration,
            ..cfg.gdice.clone()
        };
        for &seed in seeds {
            out.push(run_gdice_cell(&exp.domain, &gd, label, seed, cfg.evaluation.n_traj)?);
        }
    }
    Ok(out)
}

/// G-DICE at every discretization factor of the sweep, then EPSCKO.
pub fn sweep_discretization(exp: &Experiment, seeds: &[u64]) -> Result<Vec<CellResult>> {
    let cfg = &exp.config;
    let mut out = Vec::new();
    for &factor in &cfg.sweep.factors {
        let gd = GdiceConfig {
            factor,
            ..cfg.gdice.clone()
        };
        for &seed in seeds {
            out.push(run_gdice_cell(
                &exp.domain,
                &gd,
                &gd.acceleration.label(),
                seed,
                cfg.evaluation.n_traj,
            )?);
        }
    }
    if cfg.sweep.continuous {
        for &seed in seeds {
            out.push(run_epscko_cell(&exp.domain, &cfg.epscko, seed, cfg.evaluation.n_traj)?);
        }
    }
    Ok(out)
}

fn policy_file_name(key: &CellKey) -> String {
    let scheme: String = key
        .scheme
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("policy_{}_{}_d{}_seed{}.json", key.solver, scheme, key.d, key.seed)
}

/// Files written by [`write_outputs`].
#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub trace: PathBuf,
    pub summary: PathBuf,
    pub policies: Vec<PathBuf>,
}

/// Writes `<prefix>_trace.csv`, `<prefix>_summary.csv` and one policy file
/// per cell into `dir`.
pub fn write_outputs(dir: &Path, prefix: &str, results: &[CellResult], timing: bool) -> Result<OutputFiles> {
    let mut trace = TraceWriter::new(Vec::new(), timing)?;
    let mut summary = SummaryWriter::new(Vec::new())?;
    for r in results {
        trace.write_trace(&r.key, &r.trace)?;
        summary.write(&r.summary())?;
    }
    let trace_bytes = trace.finish()?;
    let summary_bytes = summary.finish()?;

    fs::create_dir_all(dir)?;
    let files = OutputFiles {
        trace: dir.join(format!("{prefix}_trace.csv")),
        summary: dir.join(format!("{prefix}_summary.csv")),
        policies: results.iter().map(|r| dir.join(policy_file_name(&r.key))).collect(),
    };
    fs::write(&files.trace, trace_bytes)?;
    fs::write(&files.summary, summary_bytes)?;
    for (r, path) in results.iter().zip(&files.policies) {
        r.policy.save(path)?;
    }
    Ok(files)
}

/// Median of the values, `NaN` when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Human-readable table of median final values per (solver, scheme, d).
pub fn render_summary(results: &[CellResult]) -> String {
    let mut groups: Vec<(String, String, String, Vec<f64>)> = Vec::new();
    for r in results {
        let d = r.key.d.to_string();
        match groups
            .iter_mut()
            .find(|g| g.0 == r.key.solver && g.1 == r.key.scheme && g.2 == d)
        {
            Some(g) => g.3.push(r.value.mean),
            None => groups.push((r.key.solver.clone(), r.key.scheme.clone(), d, vec![r.value.mean])),
        }
    }
    let mut text = format!(
        "{:<8} {:<36} {:>10} {:>6} {:>12}\n",
        "solver", "scheme", "d", "runs", "median"
    );
    for (solver, scheme, d, values) in groups {
        text += &format!(
            "{solver:<8} {scheme:<36} {d:>10} {:>6} {:>12.6}\n",
            values.len(),
            median(&values)
        );
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn policy_names_are_filesystem_safe() {
        let key = CellKey {
            solver: "gdice".into(),
            scheme: "dynamic-smoothing(0.5,15)".into(),
            d: Resolution::Factor(4),
            seed: 3,
        };
        assert_eq!(
            policy_file_name(&key),
            "policy_gdice_dynamic-smoothing_0.5_15__d4_seed3.json"
        );
    }
}
