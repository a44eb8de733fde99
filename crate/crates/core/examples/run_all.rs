//! Runs the whole pipeline on the shipped smoke corpus in a scratch
//! directory, twice, and shows that the second run is skipped.
//!
//! ```text
//! cargo run --release --example run_all -- [scratch_dir]
//! ```

use std::path::{Path, PathBuf};

use quesim::pipeline::{run_all, stages::files, PipelineConfig};

fn main() -> quesim::Result<()> {
    let scratch = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("quesim-run-all"));
    let smoke = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/smoke");
    std::fs::create_dir_all(&scratch).map_err(|e| quesim::Error::io(&scratch, e))?;
    for f in ["train.csv", "test.csv", "glove.txt", "config.toml"] {
        std::fs::copy(smoke.join(f), scratch.join(f)).map_err(|e| quesim::Error::io(smoke.join(f), e))?;
    }
    let cfg = PipelineConfig::load(scratch.join("config.toml"))?;

    for round in 1..=2 {
        let manifest = run_all(&cfg)?;
        println!("run {round}");
        for r in &manifest.records {
            let state = if r.skipped { "skipped" } else { "ran" };
            println!("  {:<16} {state:<8} {:>6} ms", r.stage, r.wall_ms);
        }
    }
    let sub = cfg.paths.work_dir.join(files::SUBMISSION);
    let text = std::fs::read_to_string(&sub).map_err(|e| quesim::Error::io(&sub, e))?;
    println!("{} ({} predictions)", sub.display(), text.lines().count() - 1);
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
