//! Flat CSV weight dumps.
//!
//! ```text
//! # tempolearn checkpoint v1
//! kind,leaky
//! dims,16,32,4
//! w_ih,<row-major values...>
//! b_h,...
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a reload is
//! bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const CHECKPOINT_HEADER: &str = "# tempolearn checkpoint v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub dims: Vec<usize>,
    pub tensors: Vec<(String, Vec<f64>)>,
}

impl Checkpoint {
    pub fn new(kind: impl Into<String>, dims: Vec<usize>) -> Self {
        Self { kind: kind.into(), dims, tensors: Vec::new() }
    }

    pub fn push(&mut self, name: &str, values: &[f64]) {
        self.tensors.push((name.to_string(), values.to_vec()));
    }

    pub fn get(&self, name: &str) -> Result<&[f64]> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::invalid(format!("checkpoint has no tensor `{name}`")))
    }

    pub fn get_len(&self, name: &str, len: usize) -> Result<&[f64]> {
        let v = self.get(name)?;
        if v.len() != len {
            return Err(Error::invalid(format!("checkpoint tensor {name}: expected {len} values, got {}", v.len())));
        }
        Ok(v)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{CHECKPOINT_HEADER}");
        let _ = writeln!(s, "kind,{}", self.kind);
        s.push_str("dims");
        for d in &self.dims {
            let _ = write!(s, ",{d}");
        }
        s.push('\n');
        for (name, values) in &self.tensors {
            s.push_str(name);
            for v in values {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(CHECKPOINT_HEADER) {
            return Err(Error::invalid("missing checkpoint header"));
        }
        let kind = lines
            .next()
            .and_then(|l| l.strip_prefix("kind,"))
            .ok_or_else(|| Error::invalid("missing checkpoint kind line"))?
            .to_string();
        let dims = lines
            .next()
            .and_then(|l| l.strip_prefix("dims,"))
            .ok_or_else(|| Error::invalid("missing checkpoint dims line"))?
            .split(',')
            .map(|d| d.trim().parse::<usize>().map_err(|e| Error::invalid(format!("bad dim `{d}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let mut tensors = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let mut fields = line.split(',');
            let name = fields.next().unwrap_or_default().to_string();
            let values = fields
                .map(|v| {
                    let x: f64 =
                        v.trim().parse().map_err(|e| Error::invalid(format!("{name}: bad value `{v}`: {e}")))?;
                    if x.is_finite() {
                        Ok(x)
                    } else {
                        Err(Error::NonFinite(format!("checkpoint tensor {name}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            tensors.push((name, values));
        }
        Ok(Self { kind, dims, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_exact() {
        let mut c = Checkpoint::new("leaky", vec![2, 3, 2]);
        c.push("w", &[0.1, -1.0 / 3.0, 1e-300, 12345.678]);
        c.push("empty", &[]);
        let back = Checkpoint::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Checkpoint::parse("hello").is_err());
        let bad = format!("{CHECKPOINT_HEADER}\nkind,x\ndims,1\nw,1.0,abc\n");
        assert!(Checkpoint::parse(&bad).is_err());
        let inf = format!("{CHECKPOINT_HEADER}\nkind,x\ndims,1\nw,inf\n");
        assert!(matches!(Checkpoint::parse(&inf), Err(Error::NonFinite(_))));
    }
}
