// Write an activation archive to disk and read it back.

use cebench::store::{read_archive, write_archive, PairRecord, StoryActivations, TokenActivation};
use cebench::ActivationArchive;

pub fn run_example() -> Result<usize, Box<dyn std::error::Error>> {
    let story = |entries: Vec<Vec<(u32, f32)>>| -> Result<StoryActivations, cebench::StoreError> {
        let tokens = entries.into_iter().map(TokenActivation::new).collect::<Result<_, _>>()?;
        Ok(StoryActivations::new(tokens))
    };
    let records = vec![
        PairRecord {
            pair_id: 0,
            story_1: story(vec![vec![(1, 0.5), (7, 2.0)], vec![(1, 0.25)]])?,
            story_2: story(vec![vec![(3, 1.0)]])?,
        },
        PairRecord {
            pair_id: 1,
            story_1: story(vec![vec![]])?,
            story_2: story(vec![vec![(0, 0.125), (2, 4.0)], vec![]])?,
        },
    ];
    let archive = ActivationArchive::new(8, "toy-sae", records)?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("toy.ceba");
    write_archive(&archive, &path)?;
    let back = read_archive(&path)?;
    assert_eq!(back, archive);
    let size = std::fs::metadata(&path)?.len() as usize;
    println!("{} pairs, d = {}, {} bytes on disk", back.records().len(), back.latent_dim(), size);
    Ok(size)
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
