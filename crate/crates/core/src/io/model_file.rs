//! Binary model files.
//!
//! Layout: the magic line `DADL1`, a UTF-8 text header of `key value` lines
//! (shape, config and one `role\tlabel` line per label), a blank line, then
//! little-endian `f64` payloads: the base dictionary (`p` fastest, then
//! `α`, `β`, `γ`) followed by `A`, `B` and `C` in column-major order.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::dadl::{DadlConfig, DadlModel, Labels};
use crate::multiarray::BaseDictionary;
use crate::{DadlError, Result};

pub const MODEL_MAGIC: &[u8] = b"DADL1\n";

fn bad(msg: impl Into<String>) -> DadlError {
    DadlError::ModelFormat(msg.into())
}

fn check_label(label: &str) -> Result<()> {
    if label.is_empty() || label.contains(['\t', '\n', '\r']) {
        return Err(bad(format!("label {label:?} is empty or contains tabs/newlines")));
    }
    Ok(())
}

pub fn encode_model(m: &DadlModel) -> Result<Vec<u8>> {
    let (da, db, dc) = m.base.dims();
    let (k, j, l) = m.counts();
    let c = &m.config;
    let mut h = String::new();
    h.push_str(&format!("n {}\n", m.n()));
    h.push_str(&format!("dims {da} {db} {dc}\n"));
    h.push_str(&format!("counts {j} {k} {l}\n"));
    h.push_str(&format!("sparsity {} {} {}\n", c.sparsity.0, c.sparsity.1, c.sparsity.2));
    h.push_str(&format!("outer_iters {}\n", c.outer_iters));
    h.push_str(&format!("ksvd_iters {}\n", c.ksvd_iters));
    h.push_str(&format!("ksvd_restarts {}\n", c.ksvd_restarts));
    h.push_str(&format!("coding_iters {}\n", c.coding_iters));
    h.push_str(&format!("restarts {}\n", c.restarts));
    h.push_str(&format!("code_tol {}\n", c.code_tol));
    h.push_str(&format!("ridge {}\n", c.ridge));
    h.push_str(&format!("seed {}\n", c.seed));
    match m.image_shape {
        Some((w, hh)) => h.push_str(&format!("image {w} {hh}\n")),
        None => h.push_str("image none\n"),
    }
    h.push_str("training_error");
    for e in &m.training_error {
        h.push_str(&format!(" {e}"));
    }
    h.push('\n');
    for (role, labels) in [("pose", &m.labels.poses), ("subject", &m.labels.subjects), ("illum", &m.labels.illums)] {
        for label in labels {
            check_label(label)?;
            h.push_str(&format!("{role}\t{label}\n"));
        }
    }
    h.push('\n');

    let mut out = MODEL_MAGIC.to_vec();
    out.extend_from_slice(h.as_bytes());
    let floats = m.base.as_slice().iter().chain(m.pose_codes.iter()).chain(m.subject_codes.iter()).chain(m.illum_codes.iter());
    for v in floats {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn save_model(path: &Path, m: &DadlModel) -> Result<()> {
    let bytes = encode_model(m)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| DadlError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| DadlError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<DadlModel> {
    let bytes = fs::read(path).map_err(|e| DadlError::io(path, e))?;
    decode_model(&bytes)
}

struct Header<'a> {
    lines: std::iter::Peekable<std::str::Lines<'a>>,
}

impl<'a> Header<'a> {
    fn field(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let line = self.lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
        let mut parts = line.split(' ');
        if parts.next() != Some(key) {
            return Err(bad(format!("expected {key}, found {line:?}")));
        }
        Ok(parts.filter(|s| !s.is_empty()).collect())
    }

    fn nums<T: std::str::FromStr>(&mut self, key: &str, count: usize) -> Result<Vec<T>> {
        let vals = self.field(key)?;
        if vals.len() != count {
            return Err(bad(format!("{key} needs {count} values")));
        }
        vals.iter()
            .map(|v| v.parse::<T>().map_err(|_| bad(format!("bad {key} value {v:?}"))))
            .collect()
    }

    fn one<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        Ok(self.nums::<T>(key, 1)?.remove(0))
    }

    fn labels(&mut self, role: &str, count: usize) -> Result<Vec<String>> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let line = self.lines.next().ok_or_else(|| bad(format!("missing {role} label")))?;
            let (r, label) = line.split_once('\t').ok_or_else(|| bad(format!("bad label line {line:?}")))?;
            if r != role {
                return Err(bad(format!("expected {role} label, found {line:?}")));
            }
            out.push(label.to_string());
        }
        Ok(out)
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<DadlModel> {
    let body = bytes.strip_prefix(MODEL_MAGIC).ok_or_else(|| bad("missing DADL1 magic"))?;
    let split = body
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| bad("missing blank line after header"))?;
    let header = std::str::from_utf8(&body[..split + 1]).map_err(|_| bad("header is not UTF-8"))?;
    let payload = &body[split + 2..];
    let mut h = Header {
        lines: header.lines().peekable(),
    };

    let n: usize = h.one("n")?;
    let dims: Vec<usize> = h.nums("dims", 3)?;
    let counts: Vec<usize> = h.nums("counts", 3)?;
    let sparsity: Vec<usize> = h.nums("sparsity", 3)?;
    let config = DadlConfig {
        dims: (dims[0], dims[1], dims[2]),
        sparsity: (sparsity[0], sparsity[1], sparsity[2]),
        outer_iters: h.one("outer_iters")?,
        ksvd_iters: h.one("ksvd_iters")?,
        ksvd_restarts: h.one("ksvd_restarts")?,
        coding_iters: h.one("coding_iters")?,
        restarts: h.one("restarts")?,
        code_tol: h.one("code_tol")?,
        ridge: h.one("ridge")?,
        seed: h.one("seed")?,
    };
    let image = h.field("image")?;
    let image_shape = match image.as_slice() {
        ["none"] => None,
        [w, hh] => Some((
            w.parse().map_err(|_| bad("bad image width"))?,
            hh.parse().map_err(|_| bad("bad image height"))?,
        )),
        _ => return Err(bad("bad image line")),
    };
    let training_error = h
        .field("training_error")?
        .iter()
        .map(|v| v.parse::<f64>().map_err(|_| bad("bad training_error value")))
        .collect::<Result<Vec<_>>>()?;
    let (j, k, l) = (counts[0], counts[1], counts[2]);
    let labels = Labels {
        poses: h.labels("pose", j)?,
        subjects: h.labels("subject", k)?,
        illums: h.labels("illum", l)?,
    };
    if h.lines.peek().is_some() {
        return Err(bad("unexpected header lines"));
    }

    let (da, db, dc) = config.dims;
    let sizes = [n * da * db * dc, da * j, db * k, dc * l];
    let expected: usize = sizes.iter().sum::<usize>() * 8;
    if payload.len() != expected {
        return Err(bad(format!("payload has {} bytes, expected {expected}", payload.len())));
    }
    let mut floats = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut take = |len: usize| -> Vec<f64> { floats.by_ref().take(len).collect() };
    let base = BaseDictionary::new(n, da, db, dc, take(sizes[0]))?;
    let pose = DMatrix::from_vec(da, j, take(sizes[1]));
    let subject = DMatrix::from_vec(db, k, take(sizes[2]));
    let illum = DMatrix::from_vec(dc, l, take(sizes[3]));
    let mut model = DadlModel::from_parts(base, pose, subject, illum, config, labels)?;
    model.training_error = training_error;
    model.image_shape = image_shape;
    Ok(model)
}
