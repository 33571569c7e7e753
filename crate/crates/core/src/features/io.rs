//! Text tensor format for CNN weights.
//!
//! ```text
//! seiswarp-cnn 1
//! config input_shape=17,16 stem_filters=8 kernel_size=3 feature_dim=8 seed=0 blocks=8x1;16x2
//! tensor stem.weight 3 3 1 8
//! <values, row-major, one line per innermost row>
//! tensor stem.bias 8
//! ...
//! ```
//! Tensors appear in the order stem, each block (`conv1`, `conv2`, optional
//! `proj`), head. Each layer has a `.weight` and a `.bias`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Array4, ArrayD, IxDyn};

use super::model::{BlockSpec, CnnConfig, CnnModel, ConvLayer, ResidualBlock};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &str = "seiswarp-cnn 1";

fn write_tensor<T: Scalar>(out: &mut String, name: &str, shape: &[usize], values: impl Iterator<Item = T>) {
    let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
    writeln!(out, "tensor {name} {}", dims.join(" ")).unwrap();
    let row = *shape.last().unwrap_or(&1);
    let vals: Vec<T> = values.collect();
    for chunk in vals.chunks(row.max(1)) {
        let line: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
}

pub fn cnn_to_text<T: Scalar>(model: &CnnModel<T>) -> String {
    let c = &model.config;
    let blocks: Vec<String> = c.blocks.iter().map(|b| format!("{}x{}", b.filters, b.stride)).collect();
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(
        out,
        "config input_shape={},{} stem_filters={} kernel_size={} feature_dim={} seed={} blocks={}",
        c.input_shape.0,
        c.input_shape.1,
        c.stem_filters,
        c.kernel_size,
        c.feature_dim,
        c.seed,
        blocks.join(";")
    )
    .unwrap();
    let conv = |out: &mut String, name: &str, l: &ConvLayer<T>| {
        write_tensor(
            out,
            &format!("{name}.weight"),
            l.weight.shape(),
            l.weight.iter().copied(),
        );
        write_tensor(out, &format!("{name}.bias"), l.bias.shape(), l.bias.iter().copied());
    };
    conv(&mut out, "stem", &model.stem);
    for (i, b) in model.blocks.iter().enumerate() {
        conv(&mut out, &format!("block{i}.conv1"), &b.conv1);
        conv(&mut out, &format!("block{i}.conv2"), &b.conv2);
        if let Some(p) = &b.projection {
            conv(&mut out, &format!("block{i}.proj"), p);
        }
    }
    write_tensor(
        &mut out,
        "head.weight",
        model.head_weight.shape(),
        model.head_weight.iter().copied(),
    );
    write_tensor(
        &mut out,
        "head.bias",
        model.head_bias.shape(),
        model.head_bias.iter().copied(),
    );
    out
}

struct Reader<'a> {
    path: &'a Path,
    tokens: std::iter::Peekable<std::vec::IntoIter<(usize, &'a str)>>,
}

impl<'a> Reader<'a> {
    fn err(&self, line: usize, reason: impl Into<String>) -> Error {
        Error::Malformed {
            path: self.path.to_path_buf(),
            line,
            reason: reason.into(),
        }
    }

    fn tensor<T: Scalar>(&mut self, name: &str) -> Result<ArrayD<T>> {
        let (line, header) = self
            .tokens
            .next()
            .ok_or_else(|| self.err(0, format!("missing tensor {name}")))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("tensor") || parts.next() != Some(name) {
            return Err(self.err(line, format!("expected `tensor {name}`, found `{header}`")));
        }
        let shape: Vec<usize> = parts
            .map(|d| d.parse().map_err(|_| self.err(line, format!("bad dimension `{d}`"))))
            .collect::<Result<_>>()?;
        let count: usize = shape.iter().product();
        let mut values = Vec::with_capacity(count);
        while values.len() < count {
            let (l, text) = self
                .tokens
                .next()
                .ok_or_else(|| self.err(line, format!("tensor {name} truncated")))?;
            for tok in text.split_whitespace() {
                let v: T = tok.parse().map_err(|_| self.err(l, format!("not a number: `{tok}`")))?;
                values.push(v);
            }
        }
        if values.len() != count {
            return Err(self.err(
                line,
                format!("tensor {name} has {} values, expected {count}", values.len()),
            ));
        }
        ArrayD::from_shape_vec(IxDyn(&shape), values).map_err(|e| self.err(line, e.to_string()))
    }

    fn conv<T: Scalar>(&mut self, name: &str, stride: usize) -> Result<ConvLayer<T>> {
        let weight: Array4<T> = self
            .tensor(&format!("{name}.weight"))?
            .into_dimensionality()
            .map_err(|_| self.err(0, format!("{name}.weight must be 4-D")))?;
        let bias: Array1<T> = self
            .tensor(&format!("{name}.bias"))?
            .into_dimensionality()
            .map_err(|_| self.err(0, format!("{name}.bias must be 1-D")))?;
        Ok(ConvLayer { weight, bias, stride })
    }
}

fn parse_config(path: &Path, line: usize, text: &str) -> Result<CnnConfig> {
    let bad = |reason: String| Error::Malformed {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let rest = text
        .strip_prefix("config ")
        .ok_or_else(|| bad("expected `config` line".into()))?;
    let mut cfg = CnnConfig {
        blocks: vec![],
        ..CnnConfig::default()
    };
    let num = |v: &str| v.parse::<usize>().map_err(|_| bad(format!("bad integer `{v}`")));
    for kv in rest.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, got `{kv}`")))?;
        match k {
            "input_shape" => {
                let (a, b) = v.split_once(',').ok_or_else(|| bad("input_shape needs `h,w`".into()))?;
                cfg.input_shape = (num(a)?, num(b)?);
            }
            "stem_filters" => cfg.stem_filters = num(v)?,
            "kernel_size" => cfg.kernel_size = num(v)?,
            "feature_dim" => cfg.feature_dim = num(v)?,
            "seed" => cfg.seed = v.parse().map_err(|_| bad(format!("bad seed `{v}`")))?,
            "blocks" => {
                for b in v.split(';').filter(|b| !b.is_empty()) {
                    let (f, s) = b.split_once('x').ok_or_else(|| bad(format!("bad block `{b}`")))?;
                    cfg.blocks.push(BlockSpec {
                        filters: num(f)?,
                        stride: num(s)?,
                    });
                }
            }
            other => return Err(bad(format!("unknown config key `{other}`"))),
        }
    }
    Ok(cfg)
}

pub fn cnn_from_text<T: Scalar>(path: &Path, text: &str) -> Result<CnnModel<T>> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let mut reader = Reader {
        path,
        tokens: lines.into_iter().peekable(),
    };
    match reader.tokens.next() {
        Some((_, MAGIC)) => {}
        _ => {
            return Err(Error::MalformedHeader {
                path: path.to_path_buf(),
                reason: format!("expected `{MAGIC}`"),
            })
        }
    }
    let (line, cfg_line) = reader
        .tokens
        .next()
        .ok_or_else(|| reader.err(2, "missing config line"))?;
    let config = parse_config(path, line, cfg_line)?;
    config.validate()?;

    let stem = reader.conv("stem", 1)?;
    let mut blocks = Vec::new();
    let mut c_in = config.stem_filters;
    for (i, b) in config.blocks.iter().enumerate() {
        let conv1 = reader.conv(&format!("block{i}.conv1"), b.stride)?;
        let conv2 = reader.conv(&format!("block{i}.conv2"), 1)?;
        let projection = if b.stride != 1 || c_in != b.filters {
            Some(reader.conv(&format!("block{i}.proj"), b.stride)?)
        } else {
            None
        };
        blocks.push(ResidualBlock {
            conv1,
            conv2,
            projection,
        });
        c_in = b.filters;
    }
    let head_weight: Array2<T> = reader
        .tensor("head.weight")?
        .into_dimensionality()
        .map_err(|_| reader.err(0, "head.weight must be 2-D"))?;
    let head_bias: Array1<T> = reader
        .tensor("head.bias")?
        .into_dimensionality()
        .map_err(|_| reader.err(0, "head.bias must be 1-D"))?;
    if let Some((l, extra)) = reader.tokens.next() {
        return Err(reader.err(l, format!("unexpected trailing content `{extra}`")));
    }
    let model = CnnModel {
        config,
        stem,
        blocks,
        head_weight,
        head_bias,
    };
    model.validate()?;
    Ok(model)
}

pub fn save_cnn<T: Scalar>(path: &Path, model: &CnnModel<T>) -> Result<()> {
    fs::write(path, cnn_to_text(model)).map_err(|e| Error::io(path, e))
}

pub fn load_cnn<T: Scalar>(path: &Path) -> Result<CnnModel<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    cnn_from_text(path, &text)
}
