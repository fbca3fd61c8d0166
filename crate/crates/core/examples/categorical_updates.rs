//! Cross-entropy update rules on a single categorical distribution.

use fsa_search::distributions::{
    add_noise, dynamic_alpha, is_degenerate, linear_noise, mix_uniform, mle_categorical, smooth_update, Categorical,
};

fn show(label: &str, p: &Categorical) {
    let probs: Vec<String> = p.probs().iter().map(|x| format!("{x:.3}")).collect();
    println!(
        "{label:<28} [{}]  H/ln n = {:.3}",
        probs.join(", "),
        p.normalized_entropy()
    );
}

fn main() -> fsa_search::Result<()> {
    let prior = Categorical::uniform(4);
    let elite_counts = [4, 1, 0, 0];
    let mle = mle_categorical(&elite_counts)?;
    show("prior", &prior);
    show("elite MLE", &mle);

    // repeated smoothed updates towards the same elites
    let mut p = prior.clone();
    for k in 1..=20 {
        p = smooth_update(&mle, &p, 1.0)?;
        if k == 1 {
            show("alpha = 1 after 1 step", &p);
        }
    }
    println!("degenerate: {}", is_degenerate(&mle_categorical(&[5, 0, 0, 0])?, 0.1));

    let mut q = prior.clone();
    for _ in 0..20 {
        q = smooth_update(&mle, &q, 0.15)?;
    }
    show("alpha = 0.15 after 20 steps", &q);

    let point = Categorical::point_mass(4, 0);
    show("point mass", &point);
    show("entropy injection 3%", &mix_uniform(&point, 0.03));
    show("noise 0.02", &add_noise(&point, 0.02));

    for k in [1, 2, 5, 20, 100] {
        println!(
            "k = {k:>3}: dynamic alpha {:.4}, linear noise {:.5}",
            dynamic_alpha(k, 0.5, 15.0)?,
            linear_noise(k, 0.02, 1.0 / 2000.0)
        );
    }
    Ok(())
}
