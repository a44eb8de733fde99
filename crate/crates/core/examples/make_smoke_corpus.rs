//! Regenerates the smoke corpus shipped in `data/smoke`.
//!
//! ```text
//! cargo run --example make_smoke_corpus -- [out_dir]
//! ```

use std::path::PathBuf;

use quesim::synth::{planted_clusters, SynthConfig};

const CONFIG: &str = r#"# Tiny end-to-end run: 100 training pairs, 8-dimensional vectors.
[paths]
train = "train.csv"
test = "test.csv"
glove = "glove.txt"
work_dir = "work"

[embedding]
dim = 8

[augment]
seed = 11

[model]
hidden = [4]
head = [8]
max_len = 12

[train]
seed = 3
batch_size = 16
epochs = 8
lr = 0.01

[secondary]
kind = "rf"
split_seed = 5

[secondary.forest]
n_trees = 25
max_depth = 6
seed = 9
"#;

fn main() -> quesim::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/smoke"));
    let corpus = planted_clusters(&SynthConfig {
        n_clusters: 20,
        n_train: 100,
        n_test: 40,
        ..SynthConfig::default()
    })?;
    corpus.write_to(&out)?;
    let path = out.join("config.toml");
    std::fs::write(&path, CONFIG).map_err(|e| quesim::Error::io(&path, e))?;
    println!(
        "wrote {} training and {} test pairs to {}",
        corpus.train.len(),
        corpus.test.len(),
        out.display()
    );
    Ok(())
}
