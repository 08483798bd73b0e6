//! JSON Lines batch files.
//!
//! The first line is a header
//! `{"format": "symaug-batch-v1", "kind": ..., "n_states"|"dim": ..., "n_actions": ..., "env": ..., "seed": ...}`,
//! followed by one transition object per line.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::batch::{
    Batch, BatchMeta, CategoricalTransition, ContinuousTransition, SpaceDescriptor, Transition,
};
use crate::error::{Error, Result};

pub const BATCH_FORMAT: &str = "symaug-batch-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_states: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    n_actions: usize,
    env: String,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    policy: Option<String>,
}

impl Header {
    fn space(&self) -> Result<SpaceDescriptor> {
        match (self.kind.as_str(), self.n_states, self.dim) {
            ("categorical", Some(n_states), _) => Ok(SpaceDescriptor::Categorical {
                n_states,
                n_actions: self.n_actions,
            }),
            ("continuous", _, Some(dim)) => Ok(SpaceDescriptor::Continuous {
                dim,
                n_actions: self.n_actions,
            }),
            ("categorical", None, _) => Err(Error::Format("header is missing `n_states`".into())),
            ("continuous", _, None) => Err(Error::Format("header is missing `dim`".into())),
            (kind, _, _) => Err(Error::Format(format!("unknown batch kind `{kind}`"))),
        }
    }
}

/// A batch read from disk whose kind is only known at runtime.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyBatch {
    Categorical(Batch<CategoricalTransition>),
    Continuous(Batch<ContinuousTransition>),
}

impl AnyBatch {
    pub fn len(&self) -> usize {
        match self {
            AnyBatch::Categorical(b) => b.len(),
            AnyBatch::Continuous(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn meta(&self) -> &BatchMeta {
        match self {
            AnyBatch::Categorical(b) => b.meta(),
            AnyBatch::Continuous(b) => b.meta(),
        }
    }

    pub fn space(&self) -> SpaceDescriptor {
        match self {
            AnyBatch::Categorical(b) => b.space(),
            AnyBatch::Continuous(b) => b.space(),
        }
    }

    pub fn write_jsonl<W: Write>(&self, out: W) -> Result<()> {
        match self {
            AnyBatch::Categorical(b) => write_batch(b, out),
            AnyBatch::Continuous(b) => write_batch(b, out),
        }
    }
}

pub fn write_batch<T, W>(batch: &Batch<T>, mut out: W) -> Result<()>
where
    T: Transition + Serialize,
    W: Write,
{
    let (n_states, dim) = match batch.space() {
        SpaceDescriptor::Categorical { n_states, .. } => (Some(n_states), None),
        SpaceDescriptor::Continuous { dim, .. } => (None, Some(dim)),
    };
    let meta = batch.meta();
    let header = Header {
        format: BATCH_FORMAT.to_string(),
        kind: T::KIND.to_string(),
        n_states,
        dim,
        n_actions: batch.space().n_actions(),
        env: meta.env.clone(),
        seed: meta.seed,
        policy: Some(meta.policy.clone()),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for t in batch {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_batch<R: BufRead>(input: R) -> Result<AnyBatch> {
    let mut lines = input.lines().enumerate();
    let header: Header = loop {
        match lines.next() {
            None => return Err(Error::Format("missing header line".into())),
            Some((_, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line)
                    .map_err(|e| Error::Format(format!("header: {e}")))?;
            }
        }
    };
    if header.format != BATCH_FORMAT {
        return Err(Error::Format(format!(
            "unsupported batch format `{}`",
            header.format
        )));
    }
    let space = header.space()?;
    let meta = BatchMeta {
        env: header.env.clone(),
        seed: header.seed,
        policy: header.policy.clone().unwrap_or_else(|| "uniform".into()),
    };
    match space {
        SpaceDescriptor::Categorical { .. } => Ok(AnyBatch::Categorical(read_records(
            lines, space, meta,
        )?)),
        SpaceDescriptor::Continuous { .. } => Ok(AnyBatch::Continuous(read_records(
            lines, space, meta,
        )?)),
    }
}

fn read_records<T, I>(lines: I, space: SpaceDescriptor, meta: BatchMeta) -> Result<Batch<T>>
where
    T: Transition + DeserializeOwned,
    I: Iterator<Item = (usize, std::io::Result<String>)>,
{
    let mut records = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: T = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        records.push(t);
    }
    Batch::new(records, space, meta)
}

pub fn read_batch_file(path: &std::path::Path) -> Result<AnyBatch> {
    let file = std::fs::File::open(path)?;
    read_batch(std::io::BufReader::new(file))
}

pub fn write_batch_file(batch: &AnyBatch, path: &std::path::Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    batch.write_jsonl(std::io::BufWriter::new(file))
}
