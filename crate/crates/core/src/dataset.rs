//! Question-pair corpora in the competition CSV layout.
//!
//! Training files carry `id,qid1,qid2,question1,question2,is_duplicate`;
//! test files carry `test_id,question1,question2` and get question ids from a
//! [`QuestionIndex`]. Augmented files append a `provenance` column.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuestionPair {
    pub id: u64,
    pub qid1: u64,
    pub qid2: u64,
    pub q1: String,
    pub q2: String,
    pub label: Option<u8>,
}

impl QuestionPair {
    pub fn labeled(id: u64, qid1: u64, qid2: u64, q1: &str, q2: &str, label: u8) -> Self {
        QuestionPair {
            id,
            qid1,
            qid2,
            q1: q1.to_string(),
            q2: q2.to_string(),
            label: Some(label),
        }
    }

    pub fn is_positive(&self) -> bool {
        self.label == Some(1)
    }
}

/// Where a row of an augmented dataset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Original,
    Flipped,
    SelfPair,
    SampledNegative,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Original => "original",
            Provenance::Flipped => "flipped",
            Provenance::SelfPair => "self",
            Provenance::SampledNegative => "sampled_negative",
        })
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "original" => Provenance::Original,
            "flipped" => Provenance::Flipped,
            "self" => Provenance::SelfPair,
            "sampled_negative" => Provenance::SampledNegative,
            other => return Err(Error::Data(format!("unknown provenance {other:?}"))),
        })
    }
}

/// Assigns question ids by exact text. Training rows register their given
/// ids; unseen texts get fresh ids above every id seen so far.
#[derive(Debug, Clone, Default)]
pub struct QuestionIndex {
    by_text: HashMap<String, u64>,
    next: u64,
}

impl QuestionIndex {
    pub fn register(&mut self, text: &str, qid: u64) {
        self.by_text.entry(text.to_string()).or_insert(qid);
        self.next = self.next.max(qid + 1);
    }

    pub fn register_pairs(&mut self, pairs: &[QuestionPair]) {
        for p in pairs {
            self.register(&p.q1, p.qid1);
            self.register(&p.q2, p.qid2);
        }
    }

    pub fn get(&self, text: &str) -> Option<u64> {
        self.by_text.get(text).copied()
    }

    pub fn resolve(&mut self, text: &str) -> u64 {
        if let Some(id) = self.get(text) {
            return id;
        }
        let id = self.next;
        self.register(text, id);
        id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Train,
    Test,
}

#[derive(Debug, Clone)]
pub struct PairFile {
    pub kind: FileKind,
    pub pairs: Vec<QuestionPair>,
    /// Present only for augmented training files.
    pub provenance: Option<Vec<Provenance>>,
}

struct Columns {
    id: usize,
    qid1: Option<usize>,
    qid2: Option<usize>,
    q1: usize,
    q2: usize,
    label: Option<usize>,
    provenance: Option<usize>,
    kind: FileKind,
}

impl Columns {
    fn from_header(header: &csv::StringRecord) -> Result<Self> {
        let find = |name: &str| header.iter().position(|h| h.trim() == name);
        let need = |name: &str| find(name).ok_or_else(|| Error::Data(format!("missing column {name:?} in header")));
        if let Some(id) = find("test_id") {
            return Ok(Columns {
                id,
                qid1: None,
                qid2: None,
                q1: need("question1")?,
                q2: need("question2")?,
                label: None,
                provenance: None,
                kind: FileKind::Test,
            });
        }
        Ok(Columns {
            id: need("id")?,
            qid1: Some(need("qid1")?),
            qid2: Some(need("qid2")?),
            q1: need("question1")?,
            q2: need("question2")?,
            label: find("is_duplicate"),
            provenance: find("provenance"),
            kind: FileKind::Train,
        })
    }
}

fn field(rec: &csv::StringRecord, idx: usize, row: usize) -> Result<&str> {
    rec.get(idx)
        .ok_or_else(|| Error::Data(format!("row {row}: missing field {idx}")))
}

fn parse_int(rec: &csv::StringRecord, idx: usize, row: usize, what: &str) -> Result<u64> {
    let raw = field(rec, idx, row)?.trim();
    raw.parse()
        .map_err(|_| Error::Data(format!("row {row}: {what} {raw:?} is not a nonnegative integer")))
}

/// Reads a training, augmented or test CSV. Test rows get qids from `index`.
pub fn read_pairs_from<R: Read>(reader: R, index: &mut QuestionIndex) -> Result<PairFile> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let cols = Columns::from_header(rdr.headers()?)?;
    let mut pairs = Vec::new();
    let mut provenance = cols.provenance.map(|_| Vec::new());

    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let id = parse_int(&rec, cols.id, row, "id")?;
        let q1 = field(&rec, cols.q1, row)?.to_string();
        let q2 = field(&rec, cols.q2, row)?.to_string();
        let (qid1, qid2) = match (cols.qid1, cols.qid2) {
            (Some(a), Some(b)) => (parse_int(&rec, a, row, "qid1")?, parse_int(&rec, b, row, "qid2")?),
            _ => (index.resolve(&q1), index.resolve(&q2)),
        };
        let label = match cols.label {
            Some(c) => match field(&rec, c, row)?.trim() {
                "0" => Some(0),
                "1" => Some(1),
                "" => None,
                other => return Err(Error::Data(format!("row {row}: label {other:?} is not 0 or 1"))),
            },
            None => None,
        };
        if let (Some(c), Some(tags)) = (cols.provenance, provenance.as_mut()) {
            tags.push(field(&rec, c, row)?.parse()?);
        }
        pairs.push(QuestionPair {
            id,
            qid1,
            qid2,
            q1,
            q2,
            label,
        });
    }
    if cols.kind == FileKind::Train {
        index.register_pairs(&pairs);
    }
    Ok(PairFile {
        kind: cols.kind,
        pairs,
        provenance,
    })
}

pub fn read_pairs(path: impl AsRef<Path>, index: &mut QuestionIndex) -> Result<PairFile> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_pairs_from(file, index).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Writes pairs in the training layout, appending `provenance` when given.
pub fn write_pairs_to<W: Write>(writer: W, pairs: &[QuestionPair], provenance: Option<&[Provenance]>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["id", "qid1", "qid2", "question1", "question2", "is_duplicate"];
    if provenance.is_some() {
        header.push("provenance");
    }
    wtr.write_record(&header)?;
    for (i, p) in pairs.iter().enumerate() {
        let mut rec = vec![
            p.id.to_string(),
            p.qid1.to_string(),
            p.qid2.to_string(),
            p.q1.clone(),
            p.q2.clone(),
            p.label.map(|l| l.to_string()).unwrap_or_default(),
        ];
        if let Some(tags) = provenance {
            rec.push(tags[i].to_string());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_pairs(path: impl AsRef<Path>, pairs: &[QuestionPair], provenance: Option<&[Provenance]>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_pairs_to(std::io::BufWriter::new(file), pairs, provenance)
}

/// Writes pairs in the test layout (`test_id,question1,question2`).
pub fn write_test_pairs(path: impl AsRef<Path>, pairs: &[QuestionPair]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut wtr = csv::Writer::from_writer(std::io::BufWriter::new(file));
    wtr.write_record(["test_id", "question1", "question2"])?;
    for p in pairs {
        wtr.write_record([p.id.to_string(), p.q1.clone(), p.q2.clone()])?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
