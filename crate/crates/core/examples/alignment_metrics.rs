// Compare predicted scores with a reference ranking.

use cebench::alignment::{align, ScoredModel};
use cebench::AlignmentReport;

pub fn run_example() -> Result<AlignmentReport, Box<dyn std::error::Error>> {
    let models = vec![
        ScoredModel::new("sae-a", 0.41, 1.0),
        ScoredModel::new("sae-b", 0.57, 2.0),
        ScoredModel::new("sae-c", 0.55, 3.0),
        ScoredModel::new("sae-d", 0.80, 4.0),
    ];
    let report = align(&models)?;
    println!(
        "CRPR {:.3} ({} tied pairs)  Spearman {:.3}  Pearson {:.3}  n = {}",
        report.crpr, report.ties_excluded, report.spearman, report.pearson, report.n
    );
    Ok(report)
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
