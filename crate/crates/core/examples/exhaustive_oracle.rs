//! Cross-entropy search against brute-force enumeration on the tiny domain.

use fsa_search::domains::{tiny, TinyOracleDomain};
use fsa_search::fsa::{exhaustive_policy_search, gdice_search, DeterministicFsa, GdiceConfig};

fn main() -> fsa_search::Result<()> {
    let domain = TinyOracleDomain::default();
    let exact = |p: &[DeterministicFsa]| domain.exact_value(&p[0].to_stochastic(), tiny::HORIZON);

    for n_nodes in [1, 2] {
        let (best, value) = exhaustive_policy_search(&domain, n_nodes, 2, exact)?;
        println!(
            "{n_nodes} node(s): optimum {value:.6}, actions {:?}, transitions {:?}",
            best[0].actions(),
            best[0].transitions()
        );
    }

    let config = GdiceConfig {
        n_nodes: 2,
        iterations: 150,
        horizon: tiny::HORIZON,
        ..Default::default()
    };
    for seed in 1..=3 {
        let result = gdice_search(&domain, &config, seed)?;
        println!(
            "seed {seed}: estimated {:.4}, exact {:.6}",
            result.best_value,
            exact(&result.best_policy)?
        );
    }
    Ok(())
}
