// Pick the sparsity penalty weight that best matches a reference.

use cebench::alignment::{grid_search_alpha, ComponentScores, GridSearch};

pub fn run_example() -> Result<GridSearch, Box<dyn std::error::Error>> {
    let components = vec![
        ComponentScores { label: "dense".into(), contrastive: 0.9, independence: 0.8, sparsity: 0.9 },
        ComponentScores { label: "mid".into(), contrastive: 0.7, independence: 0.7, sparsity: 0.3 },
        ComponentScores { label: "sparse".into(), contrastive: 0.6, independence: 0.6, sparsity: 0.05 },
    ];
    let reference = [1.0, 3.0, 2.0];
    let grid = grid_search_alpha(&components, &reference, &[0.0, 0.25, 0.5, 1.0])?;
    for row in &grid.rows {
        println!("alpha {:<5} CRPR {:.3}  Spearman {:.3}", row.alpha, row.report.crpr, row.report.spearman);
    }
    println!("best alpha: {}", grid.best_alpha);
    Ok(grid)
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
