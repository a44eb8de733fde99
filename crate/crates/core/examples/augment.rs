//! Augments a planted-cluster corpus: flipped pairs, self pairs, then
//! sampled negatives until the classes balance.
//!
//! ```text
//! cargo run --example augment
//! ```

use quesim::augment::augment_all;
use quesim::dataset::Provenance;
use quesim::features::DuplicateGraph;
use quesim::synth::{planted_clusters, SynthConfig};

fn main() -> quesim::Result<()> {
    let corpus = planted_clusters(&SynthConfig {
        n_train: 400,
        positive_rate: 0.35,
        ..Default::default()
    })?;
    let data = augment_all(&corpus.train, 42)?;
    let r = data.report;

    println!("{:<12} {:>8} {:>8} {:>8}", "", "pairs", "pos", "neg");
    let orig_pos = corpus.train.iter().filter(|p| p.is_positive()).count();
    println!(
        "{:<12} {:>8} {:>8} {:>8}",
        "original",
        r.original,
        orig_pos,
        r.original - orig_pos
    );
    println!(
        "{:<12} {:>8} {:>8} {:>8}",
        "augmented",
        r.total(),
        r.positives,
        r.negatives
    );
    println!(
        "flipped {}, self pairs {}, sampled negatives {}",
        r.flipped, r.self_pairs, r.sampled_negatives
    );
    println!(
        "ratio pos:neg {:.2} -> {:.2}",
        orig_pos as f64 / (r.original - orig_pos) as f64,
        r.ratio()
    );

    let graph = DuplicateGraph::from_pairs(&corpus.train);
    let clean = data
        .pairs
        .iter()
        .zip(&data.provenance)
        .filter(|(_, t)| **t == Provenance::SampledNegative)
        .all(|(p, _)| graph.common_dup_count(p.qid1, p.qid2) == 0);
    println!("sampled negatives share no duplicates: {clean}");
    Ok(())
}
