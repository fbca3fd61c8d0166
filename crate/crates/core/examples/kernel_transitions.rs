//! Fitting a kernel logistic regression node transition from queued bundles.

use fsa_search::skfsa::{train_weighted_klr, FifoKernelQueue, ObservationBundle, TransitionSample};

fn main() -> fsa_search::Result<()> {
    let mut queue = FifoKernelQueue::new(3)?;
    // low readings lead to node 0, high ones to node 1; the newest bundle
    // flips the rule near the middle
    let bundles = [
        vec![(0.1, 0), (0.2, 0), (0.8, 1), (0.9, 1)],
        vec![(0.15, 0), (0.85, 1)],
        vec![(0.45, 1), (0.55, 1)],
    ];
    for (it, samples) in bundles.iter().enumerate() {
        queue.push(ObservationBundle {
            iteration: it as u64,
            samples: samples
                .iter()
                .map(|&(o, next)| TransitionSample {
                    node: 0,
                    observation: vec![o],
                    next_node: next,
                })
                .collect(),
        });
    }

    for alpha in [0.1, 0.9] {
        let f = train_weighted_klr(&queue, 0, 2, alpha, 0.2, 1e-3, None)?;
        let row: Vec<String> = [0.0, 0.3, 0.5, 0.7, 1.0]
            .iter()
            .map(|&o| format!("P(1|{o}) = {:.2}", f.predict(&[o]).probs()[1]))
            .collect();
        println!("alpha {alpha}: {}", row.join(", "));
        let g = f.inject(0.03)?;
        println!(
            "  entropy {:.3} -> {:.3} after injection",
            f.approx_entropy(),
            g.approx_entropy()
        );
    }
    Ok(())
}
