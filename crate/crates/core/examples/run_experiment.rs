//! Running a shipped experiment file through the harness and writing its CSVs.
//!
//! Usage: `cargo run --release --example run_experiment [out-dir]`

use std::path::Path;

use fsa_search::harness::{render_summary, solve, write_outputs, Experiment};

fn main() -> fsa_search::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out/example".into());
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/solve_tiny.toml");
    let exp = Experiment::load(&config)?;
    println!("domain file: {}", exp.domain_path.display());

    let results = solve(&exp, &[1, 2, 3])?;
    print!("{}", render_summary(&results));
    let files = write_outputs(Path::new(&out), "solve", &results, false)?;
    println!("trace: {}", files.trace.display());
    println!("summary: {}", files.summary.display());
    for p in &files.policies {
        println!("policy: {}", p.display());
    }
    Ok(())
}
