// Plot per-neuron scores of one pair as SVG plus a CSV sidecar.

use cebench::report::plot::{emit_pair_diagnostics, PairDiagnostics};
use cebench::scoring::{NeuronScale, PreparedArchive};
use cebench::synthlab::{generate_planted_archive, PlantSpec};
use cebench::Parallelism;

pub fn run_example() -> Result<PairDiagnostics, Box<dyn std::error::Error>> {
    let spec = PlantSpec::round_robin(48, 10, 6, 3)
        .with_strength(1.5)
        .with_noise(0.2, 0.1);
    let (archive, _) = generate_planted_archive(&spec)?;
    let prepared = PreparedArchive::new(&archive, Parallelism::Global)?;
    let scores = prepared.pair_scores(4, NeuronScale::Normalized)?;

    let dir = tempfile::tempdir()?;
    let diag = emit_pair_diagnostics(&scores, &dir.path().join("pair4.svg"))?;
    println!(
        "pair {}: argmax C = {}, argmax D = {}, planted = {}",
        diag.pair_id, diag.argmax_contrastive, diag.argmax_independence, spec.planted_neurons[4]
    );
    println!("plot {} / sidecar {}", diag.plot.display(), diag.sidecar.display());
    Ok(diag)
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
