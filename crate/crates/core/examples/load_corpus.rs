// Load the bundled contrastive corpus.

use cebench::ContrastiveCorpus;

pub fn run_example() -> Result<usize, Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_corpus.jsonl");
    let corpus = ContrastiveCorpus::load(path)?;
    for pair in corpus.pairs().iter().take(3) {
        println!("{:>2} {}", pair.pair_id, pair.subject);
        println!("   1: {}", pair.story_1);
        println!("   2: {}", pair.story_2);
    }
    println!("{} pairs", corpus.len());
    Ok(corpus.len())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
