//! Fits the three secondary classifiers on noisy synthetic features and
//! compares their held-out log loss and accuracy.
//!
//! ```text
//! cargo run --release --example secondary
//! ```

use quesim::secondary::{accuracy, log_loss, ClassifierKind, ClassifierParams, SecondaryModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(n: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<u8>) {
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let clean = x[0] + 0.5 * x[1] - 0.3 * x[2] > 0.0;
            let y = u8::from(clean != rng.gen_bool(0.1));
            (x, y)
        })
        .unzip()
}

fn main() -> quesim::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (x_train, y_train) = sample(800, &mut rng);
    let (x_test, y_test) = sample(800, &mut rng);

    let mut params = ClassifierParams::default();
    for max_depth in [Some(4), None] {
        params.forest.max_depth = max_depth;
        report(
            ClassifierKind::Rf,
            &params,
            &x_train,
            &y_train,
            &x_test,
            &y_test,
            &format!("rf depth {max_depth:?}"),
        )?;
    }
    report(
        ClassifierKind::Ada,
        &params,
        &x_train,
        &y_train,
        &x_test,
        &y_test,
        "ada",
    )?;
    report(
        ClassifierKind::Svm,
        &params,
        &x_train,
        &y_train,
        &x_test,
        &y_test,
        "svm",
    )?;
    Ok(())
}

fn report(
    kind: ClassifierKind,
    params: &ClassifierParams,
    x_train: &[Vec<f64>],
    y_train: &[u8],
    x_test: &[Vec<f64>],
    y_test: &[u8],
    label: &str,
) -> quesim::Result<()> {
    let model = SecondaryModel::fit(kind, x_train, y_train, params)?;
    let probs: Vec<f64> = x_test.iter().map(|r| model.predict_proba(r)).collect();
    println!(
        "{label:<18} log loss {:.4}  accuracy {:.3}",
        log_loss(&probs, y_test)?,
        accuracy(&probs, y_test)?
    );
    Ok(())
}
