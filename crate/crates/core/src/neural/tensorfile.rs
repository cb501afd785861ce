//! Plain-text tensor snapshots.
//!
//! ```text
//! hapticrl-tensors 1
//! mlp actor
//! layers 3
//! injection none            # or: injection <layer> <width>
//! layer 7 400 relu          # one line per layer: in out activation
//! ...
//! weights 0                 # then `out` lines of `in` values, row-major
//! bias 0                    # then one line of `out` values
//! ...
//! end
//! adam actor
//! state <step> <beta1> <beta2> <eps>
//! layers 3
//! shape 400 7               # out in, one per layer
//! first 0 / second 0 blocks laid out like weights+bias above
//! end
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so a load
//! reproduces the saved values bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, AdamState, Dense, Injection, LayerSpec, Mlp};
use crate::error::{Error, Result};

const MAGIC: &str = "hapticrl-tensors 1";

#[derive(Debug, Clone, PartialEq)]
pub enum TensorSection {
    Mlp { name: String, net: Mlp },
    Adam { name: String, state: AdamState },
}

impl TensorSection {
    pub fn name(&self) -> &str {
        match self {
            TensorSection::Mlp { name, .. } | TensorSection::Adam { name, .. } => name,
        }
    }
}

fn join(values: impl Iterator<Item = f64>) -> String {
    let mut s = String::new();
    for (i, v) in values.enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v:?}").unwrap();
    }
    s
}

fn write_dense(out: &mut String, tag: &str, i: usize, d: &Dense) {
    writeln!(out, "{tag}-weights {i}").unwrap();
    for row in d.weights.rows() {
        writeln!(out, "{}", join(row.iter().copied())).unwrap();
    }
    writeln!(out, "{tag}-bias {i}").unwrap();
    writeln!(out, "{}", join(d.bias.iter().copied())).unwrap();
}

pub fn encode_sections(sections: &[TensorSection]) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    for section in sections {
        match section {
            TensorSection::Mlp { name, net } => {
                writeln!(out, "mlp {name}").unwrap();
                writeln!(out, "layers {}", net.specs().len()).unwrap();
                match net.injection() {
                    Some(inj) => writeln!(out, "injection {} {}", inj.layer, inj.width).unwrap(),
                    None => writeln!(out, "injection none").unwrap(),
                }
                for s in net.specs() {
                    writeln!(
                        out,
                        "layer {} {} {}",
                        s.in_dim,
                        s.out_dim,
                        s.activation.name()
                    )
                    .unwrap();
                }
                for (i, d) in net.layers().iter().enumerate() {
                    write_dense(&mut out, "param", i, d);
                }
            }
            TensorSection::Adam { name, state } => {
                writeln!(out, "adam {name}").unwrap();
                writeln!(
                    out,
                    "state {} {:?} {:?} {:?}",
                    state.step, state.beta1, state.beta2, state.eps
                )
                .unwrap();
                writeln!(out, "layers {}", state.first.len()).unwrap();
                for d in &state.first {
                    writeln!(out, "shape {} {}", d.weights.nrows(), d.weights.ncols()).unwrap();
                }
                for (i, d) in state.first.iter().enumerate() {
                    write_dense(&mut out, "first", i, d);
                }
                for (i, d) in state.second.iter().enumerate() {
                    write_dense(&mut out, "second", i, d);
                }
            }
        }
        writeln!(out, "end").unwrap();
    }
    out
}

pub fn write_tensor_file(path: &Path, sections: &[TensorSection]) -> Result<()> {
    fs::write(path, encode_sections(sections)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor_file(path: &Path) -> Result<Vec<TensorSection>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_sections(&text, path)
}

struct Lines<'a> {
    path: &'a Path,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Result<Option<&'a str>> {
        for (i, l) in self.iter.by_ref() {
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() {
                return Ok(Some(l));
            }
        }
        Ok(None)
    }

    fn expect(&mut self) -> Result<&'a str> {
        self.next()?
            .ok_or_else(|| self.err("unexpected end of file"))
    }

    /// Reads a line `<keyword> <fields...>` and returns the fields.
    fn keyword(&mut self, keyword: &str) -> Result<Vec<&'a str>> {
        let l = self.expect()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(keyword) {
            return Err(self.err(format!("expected `{keyword}`, found `{l}`")));
        }
        Ok(parts.collect())
    }

    fn usize_field(&self, s: Option<&&str>) -> Result<usize> {
        s.and_then(|s| s.parse().ok())
            .ok_or_else(|| self.err("expected a non-negative integer"))
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let l = self.expect()?;
        let vals: std::result::Result<Vec<f64>, _> = l.split_whitespace().map(str::parse).collect();
        let vals = vals.map_err(|e| self.err(format!("bad number: {e}")))?;
        if vals.len() != n {
            return Err(self.err(format!("expected {n} values, found {}", vals.len())));
        }
        Ok(vals)
    }

    fn dense(&mut self, tag: &str, i: usize, rows: usize, cols: usize) -> Result<Dense> {
        let f = self.keyword(&format!("{tag}-weights"))?;
        if self.usize_field(f.first())? != i {
            return Err(self.err("layer blocks out of order"));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.floats(cols)?);
        }
        let f = self.keyword(&format!("{tag}-bias"))?;
        if self.usize_field(f.first())? != i {
            return Err(self.err("layer blocks out of order"));
        }
        let bias = self.floats(rows)?;
        Ok(Dense {
            weights: Array2::from_shape_vec((rows, cols), data).expect("sized above"),
            bias: Array1::from(bias),
        })
    }
}

pub fn decode_sections(text: &str, path: &Path) -> Result<Vec<TensorSection>> {
    let mut lines = Lines {
        path,
        iter: text.lines().enumerate(),
        line: 0,
    };
    if lines.next()? != Some(MAGIC) {
        return Err(lines.err(format!("missing `{MAGIC}` header")));
    }
    let mut sections = Vec::new();
    while let Some(head) = lines.next()? {
        let mut parts = head.split_whitespace();
        let kind = parts.next().unwrap_or("");
        let name = parts
            .next()
            .ok_or_else(|| lines.err("section without a name"))?
            .to_string();
        match kind {
            "mlp" => {
                let n = lines.keyword("layers")?;
                let n = lines.usize_field(n.first())?;
                let inj = lines.keyword("injection")?;
                let injection = match inj.as_slice() {
                    ["none"] => None,
                    [l, w] => Some(Injection {
                        layer: lines.usize_field(Some(l))?,
                        width: lines.usize_field(Some(w))?,
                    }),
                    _ => return Err(lines.err("malformed injection line")),
                };
                let mut specs = Vec::with_capacity(n);
                for _ in 0..n {
                    let f = lines.keyword("layer")?;
                    let activation = f
                        .get(2)
                        .and_then(|a| Activation::from_name(a))
                        .ok_or_else(|| lines.err("unknown activation"))?;
                    specs.push(LayerSpec {
                        in_dim: lines.usize_field(f.first())?,
                        out_dim: lines.usize_field(f.get(1))?,
                        activation,
                    });
                }
                let mut layers = Vec::with_capacity(n);
                for (i, s) in specs.iter().enumerate() {
                    layers.push(lines.dense("param", i, s.out_dim, s.in_dim)?);
                }
                let net = Mlp::from_parts(specs, injection, layers)
                    .map_err(|e| lines.err(e.to_string()))?;
                sections.push(TensorSection::Mlp { name, net });
            }
            "adam" => {
                let f = lines.keyword("state")?;
                if f.len() != 4 {
                    return Err(lines.err("state line needs step beta1 beta2 eps"));
                }
                let step: u64 = f[0].parse().map_err(|_| lines.err("bad step"))?;
                let hyper: std::result::Result<Vec<f64>, _> =
                    f[1..].iter().map(|s| s.parse::<f64>()).collect();
                let hyper = hyper.map_err(|_| lines.err("bad optimizer constant"))?;
                let n = lines.keyword("layers")?;
                let n = lines.usize_field(n.first())?;
                let mut shapes = Vec::with_capacity(n);
                for _ in 0..n {
                    let f = lines.keyword("shape")?;
                    shapes.push((lines.usize_field(f.first())?, lines.usize_field(f.get(1))?));
                }
                let mut first = Vec::with_capacity(n);
                for (i, &(r, c)) in shapes.iter().enumerate() {
                    first.push(lines.dense("first", i, r, c)?);
                }
                let mut second = Vec::with_capacity(n);
                for (i, &(r, c)) in shapes.iter().enumerate() {
                    second.push(lines.dense("second", i, r, c)?);
                }
                sections.push(TensorSection::Adam {
                    name,
                    state: AdamState {
                        first,
                        second,
                        step,
                        beta1: hyper[0],
                        beta2: hyper[1],
                        eps: hyper[2],
                    },
                });
            }
            other => return Err(lines.err(format!("unknown section kind `{other}`"))),
        }
        lines.keyword("end")?;
    }
    Ok(sections)
}
