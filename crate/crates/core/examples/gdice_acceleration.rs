//! Two acceleration schemes on the movable-obstacle grid, short runs.

use fsa_search::distributions::AccelerationScheme;
use fsa_search::domains::{grid, GridBenchmark, GridBenchmarkConfig};
use fsa_search::fsa::{gdice_search, GdiceConfig};

fn main() -> fsa_search::Result<()> {
    let domain = GridBenchmark::new(GridBenchmarkConfig::default())?;
    let schemes = [
        ("baseline", AccelerationScheme::None),
        (
            "entropy-injection",
            AccelerationScheme::MaxEntropyInjection {
                alpha_ei: 0.03,
                tau_h: 0.1,
            },
        ),
    ];
    for (label, acceleration) in schemes {
        let config = GdiceConfig {
            n_nodes: 5,
            iterations: 30,
            alpha: 0.5,
            horizon: grid::HORIZON,
            n_eval_traj: 50,
            acceleration,
            ..Default::default()
        };
        let result = gdice_search(&domain, &config, 1)?;
        let injections = result.trace.rows.iter().filter(|r| r.injected).count();
        let curve: Vec<String> = result
            .trace
            .rows
            .iter()
            .step_by(5)
            .map(|r| format!("{:.3}", r.best_value))
            .collect();
        println!(
            "{label:<18} best {:.4}, injections {injections}, curve {}",
            result.best_value,
            curve.join(" ")
        );
    }
    Ok(())
}
