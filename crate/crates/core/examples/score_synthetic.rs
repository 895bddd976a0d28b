// Score a planted archive and print its components.

use cebench::synthlab::{generate_planted_archive, PlantSpec};
use cebench::{evaluate_sae, ScoreConfig};

pub fn run_example() -> Result<f64, Box<dyn std::error::Error>> {
    let spec = PlantSpec::round_robin(32, 12, 6, 7)
        .with_strength(2.0)
        .with_noise(0.1, 0.05);
    let (archive, _) = generate_planted_archive(&spec)?;
    let eval = evaluate_sae(&archive, &ScoreConfig::default())?;
    println!("{}", eval.sae_label);
    println!(
        "C = {:.4}  I = {:.4}  S = {:.4}  score = {:.4}",
        eval.contrastive_agg, eval.independence_agg, eval.sparsity, eval.interpretability
    );
    for pair in eval.per_pair.iter().take(3) {
        println!(
            "pair {}: argmax C at neuron {}, planted {}",
            pair.pair_id, pair.argmax_contrastive, spec.planted_neurons[pair.pair_id as usize]
        );
    }
    Ok(eval.interpretability)
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
