// Rank a planted-strength suite under every pooling strategy.

use cebench::report::{ablate_pooling, PoolingAblation, ReferenceScores};
use cebench::synthlab::{generate_suite, PlantSpec};
use cebench::{Parallelism, ScoreConfig};

pub fn run_example() -> Result<PoolingAblation, Box<dyn std::error::Error>> {
    let base = PlantSpec::round_robin(32, 64, 8, 0).with_noise(0.1, 0.05);
    let suite = generate_suite(&base, &[1.0, 2.0, 3.0, 4.0, 5.0])?;
    let reference: ReferenceScores = suite
        .iter()
        .map(|(a, truth)| (a.sae_label().to_string(), truth.expected_rank as f64))
        .collect();
    let archives: Vec<_> = suite.into_iter().map(|(a, _)| a).collect();
    let table = ablate_pooling(&archives, &reference, &ScoreConfig::default(), Parallelism::Global)?;
    for row in &table.rows {
        println!(
            "{:<14} CRPR {:.3}  ties {:>2}  Spearman {:?}",
            row.pooling.name(),
            row.crpr,
            row.ties_excluded,
            row.spearman
        );
    }
    Ok(table)
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
