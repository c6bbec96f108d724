//! Line-oriented text encoding of a [`UserModel`].
//!
//! ```text
//! ctxauth-model 1
//! created_at=<i64>
//! k_selected=<usize>
//! q=<f64>
//! sweep=<k>:<inertia>,...
//! reference=<K>:<b64>            (one line per reference)
//! vocab.<field>=<b64>,...        (one line per categorical field)
//! column=<mean>,<std>            (one line per feature column)
//! centroid=<f64>,...             (one line per retained centroid)
//! ```
//!
//! Floats are written in scientific notation with 17 significant digits so
//! they read back bit-exact.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{ColumnStats, FeatureSpec, ModelError, UserModel};
use crate::protect::{CategoricalField, Digest};
use crate::sblsh::LshHash;

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "ctxauth-model";

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

impl UserModel {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {MODEL_FORMAT_VERSION}");
        let _ = writeln!(out, "created_at={}", self.created_at);
        let _ = writeln!(out, "k_selected={}", self.k_selected);
        let _ = writeln!(out, "q={}", float(self.q));
        let sweep: Vec<String> = self.sweep.iter().map(|(k, i)| format!("{k}:{}", float(*i))).collect();
        let _ = writeln!(out, "sweep={}", sweep.join(","));
        for r in &self.spec.references {
            let _ = writeln!(out, "reference={}", r.to_wire());
        }
        for (field, vocab) in CategoricalField::ALL.iter().zip(&self.spec.vocab) {
            let v: Vec<String> = vocab.iter().map(Digest::to_base64).collect();
            let _ = writeln!(out, "vocab.{}={}", field.name(), v.join(","));
        }
        for c in &self.spec.columns {
            let _ = writeln!(out, "column={},{}", float(c.mean), float(c.std));
        }
        for c in &self.centroids {
            let v: Vec<String> = c.iter().map(|x| float(*x)).collect();
            let _ = writeln!(out, "centroid={}", v.join(","));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();
        let err = |line: usize, msg: String| ModelError::Parse { line, msg };

        let (n, header) = lines.next().ok_or_else(|| err(1, "empty document".into()))?;
        match header.split_once(' ') {
            Some((MAGIC, v)) if v == MODEL_FORMAT_VERSION.to_string() => {}
            Some((MAGIC, v)) => return Err(err(n, format!("unsupported model version {v}"))),
            _ => return Err(err(n, "not a model document".into())),
        }

        let mut field = |key: &str| -> Result<(usize, String), ModelError> {
            let (n, l) = lines.next().ok_or_else(|| err(0, format!("missing {key}")))?;
            match l.split_once('=') {
                Some((k, v)) if k == key => Ok((n, v.to_string())),
                _ => Err(err(n, format!("expected {key}"))),
            }
        };
        let created_at = parse_at(field("created_at")?)?;
        let k_selected = parse_at(field("k_selected")?)?;
        let q = parse_at(field("q")?)?;
        let (n, sweep_text) = field("sweep")?;
        let sweep = split_list(&sweep_text)
            .map(|p| {
                let (k, i) = p.split_once(':').ok_or_else(|| err(n, format!("bad sweep entry {p:?}")))?;
                Ok((parse_at((n, k.to_string()))?, parse_at((n, i.to_string()))?))
            })
            .collect::<Result<Vec<(usize, f64)>, ModelError>>()?;

        let mut references = Vec::new();
        let mut vocab = Vec::new();
        let mut columns = Vec::new();
        let mut centroids = Vec::new();
        for (n, l) in lines {
            let (k, v) = l.split_once('=').ok_or_else(|| err(n, "missing '='".into()))?;
            if k == "reference" {
                references.push(LshHash::from_wire(v).map_err(|e| err(n, e.to_string()))?);
            } else if let Some(name) = k.strip_prefix("vocab.") {
                let want = CategoricalField::ALL.get(vocab.len()).map(|f| f.name());
                if want != Some(name) {
                    return Err(err(n, format!("vocabulary {name} out of order")));
                }
                let digests = split_list(v)
                    .map(|d| Digest::from_base64(d).map_err(|e| err(n, e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?;
                if digests.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(err(n, format!("vocabulary {name} is not sorted")));
                }
                vocab.push(digests);
            } else if k == "column" {
                let (m, s) = v.split_once(',').ok_or_else(|| err(n, "column needs mean,std".into()))?;
                columns.push(ColumnStats { mean: parse_at((n, m.into()))?, std: parse_at((n, s.into()))? });
            } else if k == "centroid" {
                centroids.push(split_list(v).map(|x| parse_at((n, x.into()))).collect::<Result<Vec<f64>, _>>()?);
            } else {
                return Err(err(n, format!("unknown key {k}")));
            }
        }

        if vocab.len() != CategoricalField::COUNT {
            return Err(err(0, format!("{} vocabularies, expected {}", vocab.len(), CategoricalField::COUNT)));
        }
        let spec = FeatureSpec { references, vocab, columns };
        let width = spec.width();
        if spec.columns.len() != width {
            return Err(err(0, format!("{} columns, layout implies {width}", spec.columns.len())));
        }
        if centroids.is_empty() || centroids.iter().any(|c| c.len() != width) {
            return Err(err(0, format!("centroids must be non-empty rows of {width} values")));
        }
        Ok(Self { spec, centroids, q, created_at, k_selected, sweep })
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').filter(|p| !p.is_empty())
}

fn parse_at<T: FromStr>((line, v): (usize, String)) -> Result<T, ModelError> {
    v.parse().map_err(|_| ModelError::Parse { line, msg: format!("cannot parse {v:?}") })
}
