//! Simulating hand-written controllers on the waste-collection domain.

use fsa_search::domains::{NuclearDomain, NuclearMa};
use fsa_search::fsa::{DeterministicFsa, ObservationGrid};
use fsa_search::sim::{evaluate, rollout, Domain};

fn main() -> fsa_search::Result<()> {
    let domain = NuclearDomain::default();
    let grid = ObservationGrid::new(domain.obs_bounds().to_vec(), 1)?;
    let cycles: [(&str, Vec<usize>); 2] = [
        ("waste, correct, collect, base", vec![1, 2, 3, 0]),
        ("waste, correct, collect x2, base", vec![1, 2, 3, 3, 0]),
    ];
    for (label, actions) in cycles {
        let n = actions.len();
        // one observation bin: every node simply advances to the next
        let next: Vec<usize> = (0..n).map(|q| (q + 1) % n).collect();
        let fsa = DeterministicFsa::new(4, grid.clone(), actions, next)?;
        let joint = vec![fsa.to_stochastic(); domain.num_robots()];

        let record = rollout(&domain, &joint, 40, 7)?;
        let first: Vec<&str> = record.epochs[0]
            .iter()
            .take(6)
            .map(|e| NuclearMa::from_index(e.ma).map(NuclearMa::name).unwrap_or("?"))
            .collect();
        println!("{label}");
        println!("  robot 0 starts with: {}", first.join(" -> "));
        println!(
            "  one rollout: {} rewards, return {:.4}",
            record.rewards.len(),
            record.discounted_return
        );
        let v = evaluate(&domain, &joint, 1000, 40, 1)?;
        println!("  value over 1000 rollouts: {:.4} +/- {:.4}", v.mean, v.stderr);
    }
    Ok(())
}
