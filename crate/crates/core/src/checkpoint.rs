//! Plain-text weight checkpoints.
//!
//! ```text
//! commdet-checkpoint 1
//! kind twostage
//! n_nodes 34
//! feature_dim 0
//! layer_dims 32 16
//! learning_rate 0.01
//! epochs 200
//! seed 0
//! minibatch_size 16
//! neighbor_samples 5
//! decoder identity
//! matrix 68 32
//! <68 lines of 32 space-separated values>
//! matrix 32 16
//! ...
//! ```
//!
//! Values are written in Rust's shortest round-trip form, so a reloaded
//! checkpoint reproduces the weights bit for bit. Optimizer state is not
//! stored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::TrainingConfig;
use crate::Matrix;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "commdet-checkpoint";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    OneStage,
    TwoStage,
    Gae,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::OneStage => "onestage",
            ModelKind::TwoStage => "twostage",
            ModelKind::Gae => "gae",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "onestage" => Ok(Self::OneStage),
            "twostage" => Ok(Self::TwoStage),
            "gae" => Ok(Self::Gae),
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub n_nodes: usize,
    pub feature_dim: usize,
    pub config: TrainingConfig,
    pub weights: Vec<Matrix>,
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = format!("{MAGIC} {FORMAT_VERSION}\n");
        let _ = writeln!(out, "kind {}", self.kind);
        let _ = writeln!(out, "n_nodes {}", self.n_nodes);
        let _ = writeln!(out, "feature_dim {}", self.feature_dim);
        let _ = writeln!(out, "layer_dims {}", join(&c.layer_dims));
        let _ = writeln!(out, "learning_rate {}", c.learning_rate);
        let _ = writeln!(out, "epochs {}", c.epochs);
        let _ = writeln!(out, "seed {}", c.seed);
        let _ = writeln!(out, "minibatch_size {}", c.minibatch_size);
        let _ = writeln!(out, "neighbor_samples {}", c.neighbor_samples);
        let decoder = match c.decoder {
            crate::nn::DecoderNonlinearity::Identity => "identity",
            crate::nn::DecoderNonlinearity::Tanh => "tanh",
        };
        let _ = writeln!(out, "decoder {decoder}");
        for w in &self.weights {
            let _ = writeln!(out, "matrix {} {}", w.nrows(), w.ncols());
            for row in w.rows() {
                out.push_str(&join(row.iter()));
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Checkpoint(format!("line {}: {msg}", line + 1));
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, Vec<&str>)> {
            lines
                .next()
                .map(|(i, l)| (i, l.split_whitespace().collect()))
                .ok_or_else(|| Error::Checkpoint(format!("unexpected end of file, expected {what}")))
        };
        let (i, header) = next("header")?;
        if header != [MAGIC, &FORMAT_VERSION.to_string()] {
            return Err(bad(i, "not a version 1 commdet checkpoint"));
        }
        let mut field = |name: &str| -> Result<(usize, Vec<String>)> {
            let (i, tokens) = next(name)?;
            if tokens.first() != Some(&name) {
                return Err(bad(i, &format!("expected field {name}")));
            }
            Ok((i, tokens[1..].iter().map(|s| s.to_string()).collect()))
        };
        fn one<T: FromStr>(i: usize, v: &[String]) -> Result<T> {
            match v {
                [x] => x.parse().map_err(|_| Error::Checkpoint(format!("line {}: bad value {x:?}", i + 1))),
                _ => Err(Error::Checkpoint(format!("line {}: expected one value", i + 1))),
            }
        }
        let (i, v) = field("kind")?;
        let kind: ModelKind = one::<String>(i, &v)?.parse()?;
        let (i, v) = field("n_nodes")?;
        let n_nodes = one(i, &v)?;
        let (i, v) = field("feature_dim")?;
        let feature_dim = one(i, &v)?;
        let (i, v) = field("layer_dims")?;
        let layer_dims = v
            .iter()
            .map(|x| x.parse().map_err(|_| bad(i, "bad layer width")))
            .collect::<Result<Vec<usize>>>()?;
        let (i, v) = field("learning_rate")?;
        let learning_rate = one(i, &v)?;
        let (i, v) = field("epochs")?;
        let epochs = one(i, &v)?;
        let (i, v) = field("seed")?;
        let seed = one(i, &v)?;
        let (i, v) = field("minibatch_size")?;
        let minibatch_size = one(i, &v)?;
        let (i, v) = field("neighbor_samples")?;
        let neighbor_samples = one(i, &v)?;
        let (i, v) = field("decoder")?;
        let decoder = one::<String>(i, &v)?.parse()?;
        let config = TrainingConfig {
            layer_dims,
            learning_rate,
            epochs,
            seed,
            minibatch_size,
            neighbor_samples,
            decoder,
        };

        let mut weights = Vec::new();
        while let Ok((i, tokens)) = next("matrix") {
            if tokens.is_empty() {
                continue;
            }
            let (rows, cols) = match tokens.as_slice() {
                ["matrix", r, c] => (
                    r.parse().map_err(|_| bad(i, "bad row count"))?,
                    c.parse().map_err(|_| bad(i, "bad column count"))?,
                ),
                _ => return Err(bad(i, "expected matrix header")),
            };
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (i, row) = next("matrix row")?;
                if row.len() != cols {
                    return Err(bad(i, &format!("expected {cols} values, found {}", row.len())));
                }
                for x in row {
                    values.push(x.parse::<f64>().map_err(|_| bad(i, "bad matrix value"))?);
                }
            }
            weights.push(Array2::from_shape_vec((rows, cols), values).expect("counted"));
        }
        if weights.len() != config.layer_dims.len() {
            return Err(Error::Checkpoint(format!(
                "{} matrices for {} layers",
                weights.len(),
                config.layer_dims.len()
            )));
        }
        Ok(Self { kind, n_nodes, feature_dim, config, weights })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}
