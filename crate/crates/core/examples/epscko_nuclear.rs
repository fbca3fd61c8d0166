//! Continuous-observation policy search on the waste-collection domain.
//!
//! Usage: `cargo run --release --example epscko_nuclear [iterations] [out.json]`

use fsa_search::domains::NuclearDomain;
use fsa_search::epscko::{epscko_search, EpsckoConfig};
use fsa_search::harness::{evaluate_policy, AnyDomain, JointPolicy};

fn main() -> fsa_search::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    let out = args.next();

    let domain = NuclearDomain::default();
    let config = EpsckoConfig {
        iterations,
        alpha: 0.5,
        ..Default::default()
    };
    let result = epscko_search(&domain, &config, 1)?;
    for row in result.trace.rows.iter().step_by(5) {
        println!(
            "iteration {:>3}: best {:.3}, converged {}, injected {}",
            row.iteration, row.best_value, row.converged, row.injected
        );
    }

    let policy = JointPolicy::SkFsa {
        lambda: config.lambda,
        robots: result.policy,
    };
    let value = evaluate_policy(&policy, &AnyDomain::Nuclear(domain), config.horizon, 1000, 1)?;
    println!("returned controller: {:.4} +/- {:.4}", value.mean, value.stderr);
    println!("kernel queue lengths: {:?}", result.queue_lengths);
    if let Some(path) = out {
        policy.save(path.as_ref())?;
        println!("saved {path}");
    }
    Ok(())
}
