//! Text checkpoint of named tensors.
//!
//! ```text
//! ncsm-checkpoint 1
//! tensor <name> <rows> <cols>
//! <cols whitespace-separated values>    (one line per row)
//! ...
//! end
//! ```
//!
//! Values are written with `{:e}` formatting, which round-trips `f64` exactly.
//! Names are non-empty and contain no whitespace.

use std::fmt::Write as _;
use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "ncsm-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Largest tensor the parser will allocate, in elements.
const MAX_ELEMENTS: usize = 1 << 28;

/// Ordered list of named tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    entries: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::Checkpoint(format!("invalid tensor name {name:?}")));
        }
        if self.get(&name).is_some() {
            return Err(Error::Checkpoint(format!("duplicate tensor name {name}")));
        }
        if !tensor.is_finite() {
            return Err(Error::Checkpoint(format!("tensor {name} has non-finite values")));
        }
        self.entries.push((name, tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Like [`Checkpoint::get`] but also checks the shape.
    pub fn expect(&self, name: &str, shape: (usize, usize)) -> Result<&Tensor> {
        let t = self
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
        if t.shape() != shape {
            return Err(Error::Checkpoint(format!(
                "tensor {name} has shape {:?}, expected {shape:?}",
                t.shape()
            )));
        }
        Ok(t)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n");
        for (name, t) in &self.entries {
            let _ = writeln!(out, "tensor {name} {} {}", t.rows(), t.cols());
            for r in 0..t.rows() {
                let row = t.row(r);
                for (i, v) in row.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    let _ = write!(out, "{v:e}");
                }
                out.push('\n');
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let err = |line: usize, msg: String| Error::Parse { line, msg };

        let (ln, header) = lines.next().ok_or_else(|| err(1, "empty checkpoint".into()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(CHECKPOINT_MAGIC) {
            return Err(err(ln, "missing checkpoint header".into()));
        }
        match parts.next().map(str::parse::<u32>) {
            Some(Ok(CHECKPOINT_VERSION)) if parts.next().is_none() => {}
            Some(Ok(v)) => return Err(err(ln, format!("unsupported checkpoint version {v}"))),
            _ => return Err(err(ln, "malformed checkpoint header".into())),
        }

        let mut ckpt = Checkpoint::new();
        loop {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| err(0, "truncated checkpoint: missing `end`".into()))?;
            if line == "end" {
                break;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            let [kw, name, rows, cols] = tok[..] else {
                return Err(err(ln, format!("expected `tensor <name> <rows> <cols>`, got {line:?}")));
            };
            if kw != "tensor" {
                return Err(err(ln, format!("expected `tensor`, got {kw:?}")));
            }
            let dim = |s: &str| s.parse::<usize>().map_err(|e| err(ln, format!("bad dimension {s:?}: {e}")));
            let (rows, cols) = (dim(rows)?, dim(cols)?);
            let total = rows
                .checked_mul(cols)
                .filter(|&t| t <= MAX_ELEMENTS)
                .ok_or_else(|| err(ln, format!("tensor {name} too large: {rows} x {cols}")))?;
            let mut data = Vec::with_capacity(total.min(1 << 16));
            for _ in 0..rows {
                let (ln, row) = lines
                    .next()
                    .ok_or_else(|| err(ln, format!("truncated tensor {name}")))?;
                let before = data.len();
                for tok in row.split_whitespace() {
                    let v: f64 = tok.parse().map_err(|e| err(ln, format!("bad value {tok:?}: {e}")))?;
                    if !v.is_finite() {
                        return Err(err(ln, format!("non-finite value {tok:?}")));
                    }
                    data.push(v);
                }
                if data.len() - before != cols {
                    return Err(err(ln, format!("expected {cols} values, got {}", data.len() - before)));
                }
            }
            let t = Tensor::from_vec(rows, cols, data)?;
            ckpt.push(name, t).map_err(|e| err(ln, e.to_string()))?;
        }
        if let Some((ln, extra)) = lines.find(|(_, l)| !l.is_empty()) {
            return Err(err(ln, format!("trailing content after `end`: {extra:?}")));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::from(e).in_file(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::parse(&text).map_err(|e| e.in_file(path))
    }
}
