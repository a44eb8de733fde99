//! `QSIM1` binary container shared by every saved artefact.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "QSIM1"
//! u32 kind length, kind bytes          e.g. "gru", "embeddings", "rf"
//! u64 config length, config bytes      TOML text
//! u64 word count, then per word: u32 length, UTF-8 bytes
//! u64 tensor count, then per tensor:
//!     u32 name length, name bytes
//!     u32 rank, rank × u64 dims
//!     product(dims) × f64
//! ```

use std::path::Path;

use crate::embedding::{EmbeddingStore, Vocabulary};
use crate::error::{Error, Result};
use crate::gru::{ModelConfig, SiameseModel};
use crate::secondary::{
    AdaBoostModel, DecisionTree, ForestParams, Node, RandomForest, SecondaryModel, Stump, SvmModel,
};
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 5] = b"QSIM1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            name: name.into(),
            shape,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Container {
    pub kind: String,
    pub config: String,
    pub vocab: Vec<String>,
    pub tensors: Vec<Tensor>,
}

impl Container {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_str32(&mut out, &self.kind);
        out.extend_from_slice(&(self.config.len() as u64).to_le_bytes());
        out.extend_from_slice(self.config.as_bytes());
        out.extend_from_slice(&(self.vocab.len() as u64).to_le_bytes());
        for w in &self.vocab {
            put_str32(&mut out, w);
        }
        out.extend_from_slice(&(self.tensors.len() as u64).to_le_bytes());
        for t in &self.tensors {
            put_str32(&mut out, &t.name);
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Checkpoint("missing QSIM1 magic".into()));
        }
        let kind = r.str32()?;
        let config_len = r.u64()? as usize;
        let config = r.utf8(config_len)?;
        let n_words = r.u64()? as usize;
        let mut vocab = Vec::with_capacity(n_words.min(1 << 20));
        for _ in 0..n_words {
            vocab.push(r.str32()?);
        }
        let n_tensors = r.u64()? as usize;
        let mut tensors = Vec::with_capacity(n_tensors.min(1 << 16));
        for _ in 0..n_tensors {
            let name = r.str32()?;
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let count = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Checkpoint(format!("tensor {name} is too large")))?;
            let raw = r.take(
                count
                    .checked_mul(8)
                    .ok_or_else(|| Error::Checkpoint("overflow".into()))?,
            )?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            tensors.push(Tensor { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Container {
            kind,
            config,
            vocab,
            tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Container::from_bytes(&bytes)
    }

    pub fn expect_kind(&self, kinds: &[&str]) -> Result<()> {
        if kinds.contains(&self.kind.as_str()) {
            Ok(())
        } else {
            Err(Error::Checkpoint(format!(
                "expected a {} container, found {:?}",
                kinds.join("/"),
                self.kind
            )))
        }
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name:?}")))
    }
}

fn put_str32(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn utf8(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid UTF-8".into()))
    }

    fn str32(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        self.utf8(n)
    }
}

fn toml_text<T: serde::Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Checkpoint(format!("cannot serialise config: {e}")))
}

fn from_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Checkpoint(format!("bad embedded config: {e}")))
}

#[derive(serde::Serialize, serde::Deserialize)]
struct StoreMeta {
    max_len: usize,
}

pub fn embeddings_to_container(store: &EmbeddingStore, max_len: usize) -> Result<Container> {
    Ok(Container {
        kind: "embeddings".into(),
        config: toml_text(&StoreMeta { max_len })?,
        vocab: store.vocab.words().to_vec(),
        tensors: vec![Tensor::new(
            "embedding",
            vec![store.n_words(), store.dim()],
            store.matrix.as_slice().to_vec(),
        )],
    })
}

/// Returns the store and the sequence length it was prepared for.
pub fn embeddings_from_container(c: &Container) -> Result<(EmbeddingStore, usize)> {
    c.expect_kind(&["embeddings", "gru"])?;
    let vocab = Vocabulary::from_id_order(c.vocab.clone())?;
    let t = c.tensor("embedding")?;
    if t.shape.len() != 2 || t.shape[0] != vocab.len() {
        return Err(Error::Checkpoint(
            "embedding tensor does not match the vocabulary".into(),
        ));
    }
    let store = EmbeddingStore::new(vocab, Matrix::from_vec(t.shape[0], t.shape[1], t.data.clone()))?;
    let max_len = match c.kind.as_str() {
        "embeddings" => from_toml::<StoreMeta>(&c.config)?.max_len,
        _ => from_toml::<ModelConfig>(&c.config)?.max_len,
    };
    Ok((store, max_len))
}

pub fn model_to_container(model: &SiameseModel) -> Result<Container> {
    Ok(Container {
        kind: "gru".into(),
        config: toml_text(&model.config)?,
        vocab: model.embeddings.vocab.words().to_vec(),
        tensors: model
            .tensors()
            .into_iter()
            .map(|t| Tensor::new(t.name, t.shape, t.data.to_vec()))
            .collect(),
    })
}

pub fn model_from_container(c: &Container) -> Result<SiameseModel> {
    c.expect_kind(&["gru"])?;
    let config: ModelConfig = from_toml(&c.config)?;
    let (store, _) = embeddings_from_container(c)?;
    let mut model = SiameseModel::zeroed(config, store)?;
    let expected: Vec<(String, Vec<usize>)> = model.tensors().into_iter().map(|t| (t.name, t.shape)).collect();
    if expected.len() != c.tensors.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} tensors, model expects {}",
            c.tensors.len(),
            expected.len()
        )));
    }
    for ((name, shape), t) in expected.iter().zip(&c.tensors) {
        if *name != t.name || *shape != t.shape {
            return Err(Error::Checkpoint(format!(
                "tensor {:?} {:?} does not match expected {name:?} {shape:?}",
                t.name, t.shape
            )));
        }
    }
    for (dst, src) in model.tensors_mut().into_iter().zip(&c.tensors) {
        dst.data.copy_from_slice(&src.data);
    }
    Ok(model)
}

fn tree_tensor(name: String, tree: &DecisionTree) -> Tensor {
    let mut data = Vec::with_capacity(tree.nodes.len() * 5);
    for node in &tree.nodes {
        match *node {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => data.extend([0.0, feature as f64, threshold, left as f64, right as f64]),
            Node::Leaf { fraction, count } => data.extend([1.0, fraction, count as f64, 0.0, 0.0]),
        }
    }
    Tensor::new(name, vec![tree.nodes.len(), 5], data)
}

fn tree_from_tensor(t: &Tensor, max_depth: Option<usize>) -> Result<DecisionTree> {
    if t.shape.len() != 2 || t.shape[1] != 5 || t.shape[0] == 0 {
        return Err(Error::Checkpoint(format!(
            "tree tensor {} has shape {:?}",
            t.name, t.shape
        )));
    }
    let n = t.shape[0];
    let nodes = t
        .data
        .chunks_exact(5)
        .map(|r| {
            if r[0] == 1.0 {
                Ok(Node::Leaf {
                    fraction: r[1],
                    count: r[2] as usize,
                })
            } else {
                let (left, right) = (r[3] as usize, r[4] as usize);
                if left >= n || right >= n {
                    return Err(Error::Checkpoint(format!("tree {} has a dangling child", t.name)));
                }
                Ok(Node::Split {
                    feature: r[1] as usize,
                    threshold: r[2],
                    left,
                    right,
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecisionTree { nodes, max_depth })
}

pub fn secondary_to_container(model: &SecondaryModel) -> Result<Container> {
    let kind = model.kind().to_string();
    let (config, tensors) = match model {
        SecondaryModel::Forest(f) => (
            toml_text(&f.params)?,
            f.trees
                .iter()
                .enumerate()
                .map(|(i, t)| tree_tensor(format!("tree{i}"), t))
                .collect(),
        ),
        SecondaryModel::Ada(m) => {
            let stumps = m
                .stumps
                .iter()
                .flat_map(|s| [s.feature as f64, s.threshold, s.left, s.right])
                .collect();
            (
                String::new(),
                vec![
                    Tensor::new("stumps", vec![m.stumps.len(), 4], stumps),
                    Tensor::new("alphas", vec![m.alphas.len()], m.alphas.clone()),
                ],
            )
        }
        SecondaryModel::Svm(m) => (
            String::new(),
            vec![
                Tensor::new("w", vec![m.w.len()], m.w.clone()),
                Tensor::new("b", vec![1], vec![m.b]),
                Tensor::new("mean", vec![m.mean.len()], m.mean.clone()),
                Tensor::new("std", vec![m.std.len()], m.std.clone()),
                Tensor::new("platt", vec![2], vec![m.platt_a, m.platt_b]),
            ],
        ),
    };
    Ok(Container {
        kind,
        config,
        vocab: Vec::new(),
        tensors,
    })
}

pub fn secondary_from_container(c: &Container) -> Result<SecondaryModel> {
    c.expect_kind(&["rf", "ada", "svm"])?;
    Ok(match c.kind.as_str() {
        "rf" => {
            let params: ForestParams = from_toml(&c.config)?;
            let trees = c
                .tensors
                .iter()
                .map(|t| tree_from_tensor(t, params.max_depth))
                .collect::<Result<Vec<_>>>()?;
            if trees.is_empty() {
                return Err(Error::Checkpoint("forest has no trees".into()));
            }
            SecondaryModel::Forest(RandomForest { trees, params })
        }
        "ada" => {
            let stumps = c
                .tensor("stumps")?
                .data
                .chunks_exact(4)
                .map(|r| Stump {
                    feature: r[0] as usize,
                    threshold: r[1],
                    left: r[2],
                    right: r[3],
                })
                .collect::<Vec<_>>();
            let alphas = c.tensor("alphas")?.data.clone();
            if stumps.len() != alphas.len() {
                return Err(Error::Checkpoint("stump and alpha counts differ".into()));
            }
            SecondaryModel::Ada(AdaBoostModel { stumps, alphas })
        }
        _ => {
            let scalar = |name: &str, i: usize| -> Result<f64> {
                c.tensor(name)?
                    .data
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::Checkpoint(format!("tensor {name} is too short")))
            };
            SecondaryModel::Svm(SvmModel {
                w: c.tensor("w")?.data.clone(),
                b: scalar("b", 0)?,
                mean: c.tensor("mean")?.data.clone(),
                std: c.tensor("std")?.data.clone(),
                platt_a: scalar("platt", 0)?,
                platt_b: scalar("platt", 1)?,
            })
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(Container::from_bytes(b"QSIM0").is_err());
        let bytes = Container {
            kind: "x".into(),
            ..Container::default()
        }
        .to_bytes();
        assert!(Container::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Container::from_bytes(&bytes).is_ok());
    }

    proptest! {
        #[test]
        fn bytes_round_trip(
            kind in "[a-z]{1,8}",
            config in "\\PC{0,40}",
            vocab in proptest::collection::vec("\\PC{0,6}", 0..5),
            data in proptest::collection::vec(proptest::num::f64::ANY, 0..12),
        ) {
            let c = Container {
                kind,
                config,
                vocab,
                tensors: vec![Tensor::new("t", vec![data.len()], data)],
            };
            let back = Container::from_bytes(&c.to_bytes()).unwrap();
            prop_assert_eq!(back.to_bytes(), c.to_bytes());
        }
    }
}
