//! Plain-text parameter checkpoints.
//!
//! ```text
//! dpg-checkpoint v1
//! meta <key> <value>              zero or more, free-form metadata
//! shape <input> <hidden> <actions>
//! tensor w1 <hidden> <input>      then <hidden> lines of <input> values
//! tensor b1 <hidden>              then one line of <hidden> values
//! tensor w2 <actions> <hidden>
//! tensor b2 <actions>
//! adam <t> <lr> <beta1> <beta2> <eps>      optional, followed by the
//! tensor adam.m.<name> ...                moment tensors in the same layout
//! tensor adam.v.<name> ...
//! end
//! ```
//!
//! Values are space separated and written in Rust's shortest round-trip
//! exponent form (`{:e}`), so a write/read cycle is lossless.

use std::io::{self, Write};

use super::{AdamConfig, AdamState, NetShape, NumericsError, Params, PolicyNet};

pub const CHECKPOINT_MAGIC: &str = "dpg-checkpoint v1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub net: PolicyNet,
    pub adam: Option<AdamState>,
    pub meta: Vec<(String, String)>,
}

impl Checkpoint {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn dims(shape: &NetShape) -> [(usize, Option<usize>); 4] {
    [
        (shape.hidden, Some(shape.input)),
        (shape.hidden, None),
        (shape.actions, Some(shape.hidden)),
        (shape.actions, None),
    ]
}

fn write_params<W: Write>(w: &mut W, prefix: &str, shape: &NetShape, params: &Params) -> io::Result<()> {
    for ((name, data), (rows, cols)) in Params::NAMES.iter().zip(params.tensors()).zip(dims(shape)) {
        match cols {
            Some(cols) => {
                writeln!(w, "tensor {prefix}{name} {rows} {cols}")?;
                for row in data.chunks(cols.max(1)) {
                    write_row(w, row)?;
                }
            }
            None => {
                writeln!(w, "tensor {prefix}{name} {rows}")?;
                write_row(w, data)?;
            }
        }
    }
    Ok(())
}

fn write_row<W: Write>(w: &mut W, row: &[f64]) -> io::Result<()> {
    let mut first = true;
    for v in row {
        if !first {
            w.write_all(b" ")?;
        }
        write!(w, "{v:e}")?;
        first = false;
    }
    writeln!(w)
}

pub fn write_checkpoint<W: Write>(ck: &Checkpoint, w: &mut W) -> io::Result<()> {
    writeln!(w, "{CHECKPOINT_MAGIC}")?;
    for (k, v) in &ck.meta {
        assert!(
            !k.contains(char::is_whitespace) && !v.contains('\n'),
            "metadata keys are single words and values single lines"
        );
        writeln!(w, "meta {k} {v}")?;
    }
    let shape = ck.net.shape();
    writeln!(w, "shape {} {} {}", shape.input, shape.hidden, shape.actions)?;
    write_params(w, "", shape, ck.net.params())?;
    if let Some(adam) = &ck.adam {
        let c = adam.config;
        writeln!(w, "adam {} {:e} {:e} {:e} {:e}", adam.t, c.lr, c.beta1, c.beta2, c.eps)?;
        write_params(w, "adam.m.", shape, &adam.m)?;
        write_params(w, "adam.v.", shape, &adam.v)?;
    }
    writeln!(w, "end")
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str, NumericsError> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim_end())
            }
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, message: impl Into<String>) -> NumericsError {
        NumericsError::Checkpoint {
            line: self.line,
            message: message.into(),
        }
    }

    fn numbers<T: std::str::FromStr>(&self, fields: &[&str]) -> Result<Vec<T>, NumericsError> {
        fields
            .iter()
            .map(|f| f.parse().map_err(|_| self.err(format!("bad number {f:?}"))))
            .collect()
    }

    fn read_params(&mut self, prefix: &str, shape: &NetShape) -> Result<Params, NumericsError> {
        let mut params = Params::zeros(shape);
        for ((name, data), (rows, cols)) in Params::NAMES.iter().zip(params.tensors_mut()).zip(dims(shape)) {
            let header = self.next()?;
            let fields: Vec<&str> = header.split_whitespace().collect();
            let want_name = format!("{prefix}{name}");
            if fields.len() < 2 || fields[0] != "tensor" || fields[1] != want_name {
                return Err(self.err(format!("expected tensor {want_name}")));
            }
            let declared: Vec<usize> = self.numbers(&fields[2..])?;
            let expected: Vec<usize> = std::iter::once(rows).chain(cols).collect();
            if declared != expected {
                return Err(self.err(format!(
                    "tensor {want_name} has shape {declared:?}, expected {expected:?}"
                )));
            }
            let width = cols.unwrap_or(rows);
            let line_count = if cols.is_some() { rows } else { 1 };
            for r in 0..line_count {
                let line = self.next()?;
                let values: Vec<f64> = if width == 0 {
                    Vec::new()
                } else {
                    self.numbers(&line.split(' ').collect::<Vec<_>>())?
                };
                if values.len() != width {
                    return Err(self.err(format!("expected {width} values, got {}", values.len())));
                }
                data[r * width..(r + 1) * width].copy_from_slice(&values);
            }
        }
        Ok(params)
    }
}

pub fn read_checkpoint(text: &str) -> Result<Checkpoint, NumericsError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    if lines.next()? != CHECKPOINT_MAGIC {
        return Err(lines.err("not a dpg checkpoint"));
    }
    let mut meta = Vec::new();
    let shape = loop {
        let line = lines.next()?;
        if let Some(rest) = line.strip_prefix("meta ") {
            let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
            meta.push((k.to_string(), v.to_string()));
        } else if let Some(rest) = line.strip_prefix("shape ") {
            let n: Vec<usize> = lines.numbers(&rest.split_whitespace().collect::<Vec<_>>())?;
            if n.len() != 3 {
                return Err(lines.err("shape needs input, hidden and actions"));
            }
            break NetShape::new(n[0], n[1], n[2]);
        } else {
            return Err(lines.err(format!("unexpected line {line:?}")));
        }
    };
    let params = lines.read_params("", &shape)?;
    let net = PolicyNet::from_params(shape, params)?;

    let mut adam = None;
    let line = lines.next()?;
    let line = if let Some(rest) = line.strip_prefix("adam ") {
        let f: Vec<&str> = rest.split_whitespace().collect();
        if f.len() != 5 {
            return Err(lines.err("adam needs t, lr, beta1, beta2, eps"));
        }
        let t: u64 = lines.numbers(&f[..1])?[0];
        let c: Vec<f64> = lines.numbers(&f[1..])?;
        let config = AdamConfig {
            lr: c[0],
            beta1: c[1],
            beta2: c[2],
            eps: c[3],
        };
        let m = lines.read_params("adam.m.", &shape)?;
        let v = lines.read_params("adam.v.", &shape)?;
        adam = Some(AdamState { config, m, v, t });
        lines.next()?
    } else {
        line
    };
    if line != "end" {
        return Err(lines.err("expected end"));
    }
    Ok(Checkpoint { net, adam, meta })
}

impl From<io::Error> for NumericsError {
    fn from(e: io::Error) -> Self {
        NumericsError::Io(e.to_string())
    }
}
