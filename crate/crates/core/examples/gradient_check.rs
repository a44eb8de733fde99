//! Compares backpropagation-through-time gradients with central finite
//! differences on a tiny Siamese model.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use quesim::embedding::{EmbeddingStore, Vocabulary};
use quesim::gru::{bce_loss, JoinMode, Mode, ModelConfig, SiameseModel};
use quesim::tensor::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> quesim::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n_words, dim) = (9, 4);
    let mut m = Matrix::zeros(n_words, dim);
    for r in 1..n_words {
        m.row_mut(r).iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    }
    let store = EmbeddingStore::new(Vocabulary::from_words((2..n_words).map(|i| format!("w{i}"))), m)?;
    let config = ModelConfig {
        hidden: vec![3, 2],
        head: vec![5],
        join: JoinMode::Full,
        max_len: 5,
        freeze_embeddings: false,
    };
    let mut model = SiameseModel::new(config, store, 1)?;
    // Biases start at zero; randomise everything so no gradient is trivially zero.
    for t in model.tensors_mut().into_iter().skip(1) {
        t.data.iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
    }

    let (a, b, y) = ([0, 2, 3, 4, 5], [0, 0, 6, 7, 8], 1u8);
    let grads = model.backward(&model.forward_pair(&a, &b, Mode::Eval)?, y);
    let analytic: Vec<(String, Vec<f64>)> = grads.tensors().into_iter().map(|t| (t.name, t.data.to_vec())).collect();

    let eps = 1e-5;
    let dim = model.embeddings.dim();
    let mut probe = model.clone();
    let loss = |m: &SiameseModel| bce_loss(m.forward_pair(&a, &b, Mode::Eval).unwrap().y_hat, y);
    println!("{:<24} {:>8} {:>12}", "tensor", "entries", "max rel err");
    let mut worst: f64 = 0.0;
    for (ti, (name, g)) in analytic.iter().enumerate() {
        let mut max_rel: f64 = 0.0;
        for (j, &an) in g.iter().enumerate() {
            // The PAD row is frozen; its zero gradient is checked elsewhere.
            if ti == 0 && !model.embeddings.is_trainable((j / dim) as u32) {
                continue;
            }
            let orig = probe.tensors()[ti].data[j];
            probe.tensors_mut()[ti].data[j] = orig + eps;
            let up = loss(&probe);
            probe.tensors_mut()[ti].data[j] = orig - eps;
            let down = loss(&probe);
            probe.tensors_mut()[ti].data[j] = orig;
            let num = (up - down) / (2.0 * eps);
            max_rel = max_rel.max((an - num).abs() / an.abs().max(num.abs()).max(1e-6));
        }
        worst = worst.max(max_rel);
        println!("{name:<24} {:>8} {max_rel:>12.2e}", g.len());
    }
    println!("{} parameters, worst relative error {worst:.2e}", model.n_parameters());
    Ok(())
}
