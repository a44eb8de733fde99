use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};
use crate::tensor::{sigmoid, Matrix};
use crate::text_prep::{encode, tokenize, IdSeq, DEFAULT_MAX_LEN};

use super::cell::{CellCache, GruCell};
use super::{uniform_init, TensorMut, TensorRef};

/// How the two sentence vectors are combined before the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum JoinMode {
    /// `[g1, g2, |g1 − g2|, g1 ⊙ g2]`
    #[default]
    Full,
    /// `[g1, g2]`
    Concat,
}

impl std::str::FromStr for JoinMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(JoinMode::Full),
            "concat" => Ok(JoinMode::Concat),
            other => Err(Error::Config(format!(
                "unknown join {other:?} (expected full or concat)"
            ))),
        }
    }
}

impl JoinMode {
    fn width(self, g_len: usize) -> usize {
        match self {
            JoinMode::Full => 4 * g_len,
            JoinMode::Concat => 2 * g_len,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Per-direction hidden size of each stacked GRU layer.
    pub hidden: Vec<usize>,
    /// Hidden fully-connected sizes; the single sigmoid unit is implicit.
    pub head: Vec<usize>,
    pub join: JoinMode,
    pub max_len: usize,
    pub freeze_embeddings: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: vec![250, 500, 250],
            head: vec![1000, 1024],
            join: JoinMode::Full,
            max_len: DEFAULT_MAX_LEN,
            freeze_embeddings: false,
        }
    }
}

impl ModelConfig {
    /// `GRU_a_b`: `a` stacked GRU layers and `b` fully-connected layers,
    /// using the default sizes 250/500/250 and 1000/1024 (extra layers reuse
    /// the last size).
    pub fn gru(stacked: usize, fully_connected: usize) -> Self {
        let pick =
            |defaults: &[usize], n: usize| (0..n).map(|i| defaults[i.min(defaults.len() - 1)]).collect::<Vec<_>>();
        ModelConfig {
            hidden: pick(&[250, 500, 250], stacked),
            head: pick(&[1000, 1024], fully_connected),
            ..ModelConfig::default()
        }
    }

    /// Parses names like `GRU_3_2`.
    pub fn from_name(name: &str) -> Result<Self> {
        let bad = || Error::Config(format!("model name {name:?} is not of the form GRU_<layers>_<dense>"));
        let mut parts = name.split('_');
        if !parts.next().is_some_and(|p| p.eq_ignore_ascii_case("gru")) {
            return Err(bad());
        }
        let a: usize = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let b: usize = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        if parts.next().is_some() || a == 0 {
            return Err(bad());
        }
        Ok(ModelConfig::gru(a, b))
    }

    pub fn name(&self) -> String {
        format!("GRU_{}_{}", self.hidden.len(), self.head.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config(
                "GRU hidden sizes must be a nonempty list of positive sizes".into(),
            ));
        }
        if self.head.contains(&0) {
            return Err(Error::Config("head layer sizes must be positive".into()));
        }
        if self.max_len == 0 {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiGruLayer {
    pub forward: GruCell,
    pub backward: GruCell,
}

/// Affine layer, weights stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Dense {
    fn zeros(d_in: usize, d_out: usize) -> Self {
        Dense {
            w: Matrix::zeros(d_out, d_in),
            b: vec![0.0; d_out],
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.b.clone();
        self.w.mul_vec_acc(x, &mut out);
        out
    }
}

/// Recurrent layers and head; the shape shared by parameters and gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<BiGruLayer>,
    /// Hidden layers followed by the output layer.
    pub head: Vec<Dense>,
}

impl Network {
    fn zeros_like(&self) -> Self {
        Network {
            layers: self
                .layers
                .iter()
                .map(|l| BiGruLayer {
                    forward: l.forward.zeros_like(),
                    backward: l.backward.zeros_like(),
                })
                .collect(),
            head: self.head.iter().map(|d| Dense::zeros(d.w.cols(), d.w.rows())).collect(),
        }
    }

    fn tensors<'a>(&'a self, out: &mut Vec<TensorRef<'a>>) {
        for (k, layer) in self.layers.iter().enumerate() {
            layer.forward.tensors(&format!("gru{k}.fwd"), out);
            layer.backward.tensors(&format!("gru{k}.bwd"), out);
        }
        for (k, d) in self.head.iter().enumerate() {
            out.push(TensorRef::matrix(format!("dense{k}.w"), &d.w));
            out.push(TensorRef::vector(format!("dense{k}.b"), &d.b));
        }
    }

    fn tensors_mut<'a>(&'a mut self, out: &mut Vec<TensorMut<'a>>) {
        for layer in &mut self.layers {
            layer.forward.tensors_mut(out);
            layer.backward.tensors_mut(out);
        }
        for d in &mut self.head {
            out.push(TensorMut::new(d.w.as_mut_slice()));
            out.push(TensorMut::new(&mut d.b));
        }
    }
}

/// Train mode carries the dropout keep probability and the mask RNG.
pub enum Mode<'a> {
    Eval,
    Train { keep_prob: f64, rng: &'a mut ChaCha8Rng },
}

/// Zeroes each unit with probability `1 − keep_prob` and scales survivors by
/// `1 / keep_prob`. Returns the applied per-unit multipliers.
pub fn inverted_dropout<R: Rng>(x: &mut [f64], keep_prob: f64, rng: &mut R) -> Vec<f64> {
    let scale = 1.0 / keep_prob;
    x.iter_mut()
        .map(|v| {
            let m = if rng.gen::<f64>() < keep_prob { scale } else { 0.0 };
            *v *= m;
            m
        })
        .collect()
}

/// Per-layer intermediates of one encoded question.
#[derive(Debug, Clone)]
pub struct EncodeCache {
    ids: Vec<u32>,
    layers: Vec<LayerCache>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    inputs: Vec<Vec<f64>>,
    fwd: Vec<CellCache>,
    /// Indexed by sequence position, not processing order.
    bwd: Vec<CellCache>,
}

#[derive(Debug, Clone)]
struct HiddenCache {
    input: Vec<f64>,
    pre: Vec<f64>,
    mask: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct PairCache {
    encodings: [EncodeCache; 2],
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    pub joint: Vec<f64>,
    hidden: Vec<HiddenCache>,
    last_input: Vec<f64>,
    pub y_hat: f64,
}

impl PairCache {
    /// Post-ReLU, post-dropout activations of the first hidden layer.
    pub fn first_hidden(&self) -> Option<Vec<f64>> {
        self.hidden.first().map(|_| match self.hidden.get(1) {
            Some(next) => next.input.clone(),
            None => self.last_input.clone(),
        })
    }
}

/// Gradients shaped like the trainable parameters of a [`SiameseModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embedding: Matrix,
    pub net: Network,
}

impl Gradients {
    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = vec![TensorRef::matrix("embedding".into(), &self.embedding)];
        self.net.tensors(&mut out);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = vec![TensorMut::new(self.embedding.as_mut_slice())];
        self.net.tensors_mut(&mut out);
        out
    }

    pub fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.data.iter_mut().zip(b.data).for_each(|(x, y)| *x += y);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiameseModel {
    pub config: ModelConfig,
    pub embeddings: EmbeddingStore,
    pub net: Network,
}

impl SiameseModel {
    /// Glorot-initialised model over the given embeddings.
    pub fn new(config: ModelConfig, embeddings: EmbeddingStore, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(config, embeddings, |m, fan_in, fan_out| {
            uniform_init(m, fan_in, fan_out, &mut rng)
        })
    }

    /// Model with every GRU and head parameter set to zero.
    pub fn zeroed(config: ModelConfig, embeddings: EmbeddingStore) -> Result<Self> {
        Self::build(config, embeddings, |_, _, _| {})
    }

    fn build(
        config: ModelConfig,
        mut embeddings: EmbeddingStore,
        mut init: impl FnMut(&mut Matrix, usize, usize),
    ) -> Result<Self> {
        config.validate()?;
        if config.freeze_embeddings {
            embeddings.freeze_all();
        }
        let mut layers = Vec::with_capacity(config.hidden.len());
        let mut d_in = embeddings.dim();
        for &d_h in &config.hidden {
            let mut layer = BiGruLayer {
                forward: GruCell::zeros(d_in, d_h),
                backward: GruCell::zeros(d_in, d_h),
            };
            for cell in [&mut layer.forward, &mut layer.backward] {
                for m in [&mut cell.w_z, &mut cell.w_r, &mut cell.w_h] {
                    init(m, d_in, d_h);
                }
                for m in [&mut cell.u_z, &mut cell.u_r, &mut cell.u_h] {
                    init(m, d_h, d_h);
                }
            }
            layers.push(layer);
            d_in = 2 * d_h;
        }
        let mut head = Vec::with_capacity(config.head.len() + 1);
        let mut width = config.join.width(d_in);
        for &size in config.head.iter().chain(std::iter::once(&1)) {
            let mut dense = Dense::zeros(width, size);
            init(&mut dense.w, width, size);
            head.push(dense);
            width = size;
        }
        Ok(SiameseModel {
            config,
            embeddings,
            net: Network { layers, head },
        })
    }

    /// Sentence vector width: twice the top layer's hidden size.
    pub fn sentence_dim(&self) -> usize {
        2 * self.config.hidden.last().copied().unwrap_or(0)
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            embedding: Matrix::zeros(self.embeddings.n_words(), self.embeddings.dim()),
            net: self.net.zeros_like(),
        }
    }

    /// All trainable tensors: the embedding matrix, then every GRU and head
    /// tensor.
    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = vec![TensorRef::matrix("embedding".into(), &self.embeddings.matrix)];
        self.net.tensors(&mut out);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = vec![TensorMut::new(self.embeddings.matrix.as_mut_slice())];
        self.net.tensors_mut(&mut out);
        out
    }

    pub fn n_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn encode_text(&self, text: &str) -> Result<IdSeq> {
        encode(&tokenize(text), &self.embeddings.vocab, self.config.max_len)
    }

    /// Runs the stacked bidirectional encoder over one id sequence.
    pub fn encode_question(&self, ids: &[u32]) -> Result<(Vec<f64>, EncodeCache)> {
        let len = ids.len();
        if len == 0 {
            return Err(Error::Data("cannot encode an empty id sequence".into()));
        }
        let mut inputs: Vec<Vec<f64>> = self.embeddings.lookup(ids)?.into_iter().map(<[f64]>::to_vec).collect();
        let mut caches = Vec::with_capacity(self.net.layers.len());

        for layer in &self.net.layers {
            let d_h = layer.forward.d_h();
            let mut fwd = Vec::with_capacity(len);
            let mut h = vec![0.0; d_h];
            for x in &inputs {
                let c = layer.forward.forward(x, &h)?;
                h.clone_from(&c.h);
                fwd.push(c);
            }
            let mut bwd_rev = Vec::with_capacity(len);
            let mut h = vec![0.0; d_h];
            for x in inputs.iter().rev() {
                let c = layer.backward.forward(x, &h)?;
                h.clone_from(&c.h);
                bwd_rev.push(c);
            }
            bwd_rev.reverse();

            let outputs = fwd
                .iter()
                .zip(&bwd_rev)
                .map(|(f, b)| [f.h.as_slice(), b.h.as_slice()].concat())
                .collect();
            caches.push(LayerCache {
                inputs: std::mem::replace(&mut inputs, outputs),
                fwd,
                bwd: bwd_rev,
            });
        }

        let top = caches.last().expect("at least one layer");
        let g = [top.fwd[len - 1].h.as_slice(), top.bwd[0].h.as_slice()].concat();
        Ok((
            g,
            EncodeCache {
                ids: ids.to_vec(),
                layers: caches,
            },
        ))
    }

    fn join(&self, g1: &[f64], g2: &[f64]) -> Vec<f64> {
        let mut joint = Vec::with_capacity(self.config.join.width(g1.len()));
        joint.extend_from_slice(g1);
        joint.extend_from_slice(g2);
        if self.config.join == JoinMode::Full {
            joint.extend(g1.iter().zip(g2).map(|(a, b)| (a - b).abs()));
            joint.extend(g1.iter().zip(g2).map(|(a, b)| a * b));
        }
        joint
    }

    pub fn forward_pair(&self, ids1: &[u32], ids2: &[u32], mode: Mode<'_>) -> Result<PairCache> {
        let (g1, enc1) = self.encode_question(ids1)?;
        let (g2, enc2) = self.encode_question(ids2)?;
        let joint = self.join(&g1, &g2);

        let (dropout, mut rng) = match mode {
            Mode::Train { keep_prob, rng } if keep_prob < 1.0 => (Some(keep_prob), Some(rng)),
            _ => (None, None),
        };
        let (hidden_layers, output) = self.net.head.split_at(self.net.head.len() - 1);
        let mut x = joint.clone();
        let mut hidden = Vec::with_capacity(hidden_layers.len());
        for (k, layer) in hidden_layers.iter().enumerate() {
            let pre = layer.apply(&x);
            let mut act: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
            let mask = match (k, dropout, rng.as_deref_mut()) {
                (0, Some(keep), Some(rng)) => Some(inverted_dropout(&mut act, keep, rng)),
                _ => None,
            };
            hidden.push(HiddenCache {
                input: std::mem::replace(&mut x, act),
                pre,
                mask,
            });
        }
        let logit = output[0].apply(&x)[0];
        let y_hat = sigmoid(logit);
        if !y_hat.is_finite() {
            return Err(Error::NonFinite("model output is not a number".into()));
        }
        Ok(PairCache {
            encodings: [enc1, enc2],
            g1,
            g2,
            joint,
            hidden,
            last_input: x,
            y_hat,
        })
    }

    /// Duplicate probability in evaluation mode.
    pub fn score_ids(&self, ids1: &[u32], ids2: &[u32]) -> Result<f64> {
        Ok(self.forward_pair(ids1, ids2, Mode::Eval)?.y_hat)
    }

    pub fn score_texts(&self, q1: &str, q2: &str) -> Result<f64> {
        self.score_ids(&self.encode_text(q1)?, &self.encode_text(q2)?)
    }

    /// Gradient of `bce_loss(y_hat, label)` for one forward pass.
    pub fn backward(&self, cache: &PairCache, label: u8) -> Gradients {
        let mut grads = self.zero_gradients();
        self.accumulate_gradients(cache, label, 1.0, &mut grads);
        grads
    }

    /// Adds `scale · ∂loss/∂θ` to `grads`. The PAD row and frozen embedding
    /// rows receive nothing.
    pub fn accumulate_gradients(&self, cache: &PairCache, label: u8, scale: f64, grads: &mut Gradients) {
        let d_logit = (cache.y_hat - f64::from(label)) * scale;
        let n_head = self.net.head.len();
        let output = &self.net.head[n_head - 1];
        let out_grads = &mut grads.net.head[n_head - 1];
        out_grads.w.add_outer(&[d_logit], &cache.last_input);
        out_grads.b[0] += d_logit;
        let mut dx = vec![0.0; cache.last_input.len()];
        output.w.tr_mul_vec_acc(&[d_logit], &mut dx);

        for (k, hc) in cache.hidden.iter().enumerate().rev() {
            if let Some(mask) = &hc.mask {
                dx.iter_mut().zip(mask).for_each(|(d, m)| *d *= m);
            }
            let da: Vec<f64> = dx
                .iter()
                .zip(&hc.pre)
                .map(|(d, &p)| if p > 0.0 { *d } else { 0.0 })
                .collect();
            let g = &mut grads.net.head[k];
            g.w.add_outer(&da, &hc.input);
            g.b.iter_mut().zip(&da).for_each(|(b, d)| *b += d);
            let mut din = vec![0.0; hc.input.len()];
            self.net.head[k].w.tr_mul_vec_acc(&da, &mut din);
            dx = din;
        }

        let n = cache.g1.len();
        let mut dg1 = dx[..n].to_vec();
        let mut dg2 = dx[n..2 * n].to_vec();
        if self.config.join == JoinMode::Full {
            let d_abs = &dx[2 * n..3 * n];
            let d_prod = &dx[3 * n..4 * n];
            for i in 0..n {
                let diff = cache.g1[i] - cache.g2[i];
                let sign = if diff > 0.0 {
                    1.0
                } else if diff < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                dg1[i] += sign * d_abs[i] + cache.g2[i] * d_prod[i];
                dg2[i] += -sign * d_abs[i] + cache.g1[i] * d_prod[i];
            }
        }
        self.backward_encode(&cache.encodings[0], &dg1, grads);
        self.backward_encode(&cache.encodings[1], &dg2, grads);
    }

    fn backward_encode(&self, cache: &EncodeCache, dg: &[f64], grads: &mut Gradients) {
        let len = cache.ids.len();
        let top_h = self.net.layers.last().expect("at least one layer").forward.d_h();
        let mut d_out = vec![vec![0.0; 2 * top_h]; len];
        for i in 0..top_h {
            d_out[len - 1][i] += dg[i];
            d_out[0][top_h + i] += dg[top_h + i];
        }

        for (k, layer) in self.net.layers.iter().enumerate().rev() {
            let lc = &cache.layers[k];
            let d_h = layer.forward.d_h();
            let mut d_in = vec![vec![0.0; layer.forward.d_in()]; len];
            let lg = &mut grads.net.layers[k];

            let mut carry = vec![0.0; d_h];
            for t in (0..len).rev() {
                let dh: Vec<f64> = d_out[t][..d_h].iter().zip(&carry).map(|(a, b)| a + b).collect();
                carry = layer
                    .forward
                    .backward(&lc.inputs[t], &lc.fwd[t], &dh, &mut lg.forward, &mut d_in[t]);
            }
            let mut carry = vec![0.0; d_h];
            for t in 0..len {
                let dh: Vec<f64> = d_out[t][d_h..].iter().zip(&carry).map(|(a, b)| a + b).collect();
                carry = layer
                    .backward
                    .backward(&lc.inputs[t], &lc.bwd[t], &dh, &mut lg.backward, &mut d_in[t]);
            }
            d_out = d_in;
        }

        for (t, &id) in cache.ids.iter().enumerate() {
            if self.embeddings.is_trainable(id) {
                grads
                    .embedding
                    .row_mut(id as usize)
                    .iter_mut()
                    .zip(&d_out[t])
                    .for_each(|(g, d)| *g += d);
            }
        }
    }
}

/// Binary cross-entropy with the prediction clipped to `[1e-12, 1 − 1e-12]`.
pub fn bce_loss(y_hat: f64, label: u8) -> f64 {
    let p = y_hat.clamp(1e-12, 1.0 - 1e-12);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Mean loss of a model over labeled pairs in evaluation mode.
pub(crate) fn mean_eval_loss<'a>(
    model: &SiameseModel,
    pairs: impl Iterator<Item = (&'a [u32], &'a [u32], u8)>,
) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for (a, b, y) in pairs {
        total += bce_loss(model.score_ids(a, b)?, y);
        n += 1;
    }
    Ok(if n == 0 { 0.0 } else { total / n as f64 })
}
