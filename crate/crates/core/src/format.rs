//! On-disk containers.
//!
//! The embedding container is an ASCII header line
//! `AUCAP-EMB v1 dim=<D> rows=<R>\n` followed by `R·D` little-endian
//! `f32` values in row-major order. It carries VGGish/PANNs embeddings,
//! cached log-Mel features (`dim=64`), word embeddings (`dim=256`) and SVE
//! matrices (`dim=K`).
//!
//! Parameter checkpoints need bitwise round-trips of `f64` values, so the
//! header accepts one optional trailing field `dtype=f64`; absent, the
//! payload is `f32`.
//!
//! A checkpoint is
//!
//! ```text
//! AUCAP-CKPT v1 tensors=<N> meta=<M>\n
//! <M bytes of JSON metadata>\n
//! <name> <d0>x<d1>...\n        (N manifest lines)
//! <N embedding blocks, one per tensor, in manifest order>
//! ```

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Tensor;

const EMB_MAGIC: &str = "AUCAP-EMB v1";
const CKPT_MAGIC: &str = "AUCAP-CKPT v1";
const MAX_HEADER: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// A `rows × dim` block read from an embedding container.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbMatrix {
    pub dim: usize,
    pub rows: usize,
    pub data: Vec<f64>,
}

impl EmbMatrix {
    pub fn new(dim: usize, rows: usize, data: Vec<f64>) -> Result<Self> {
        if dim * rows != data.len() {
            return Err(Error::Shape(format!(
                "{rows}×{dim} block needs {} values, got {}",
                dim * rows,
                data.len()
            )));
        }
        Ok(Self { dim, rows, data })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::matrix(self.rows, self.dim, self.data.clone()).expect("consistent block")
    }
}

fn read_line_bounded<R: BufRead>(r: &mut R) -> Result<String> {
    let mut buf = Vec::new();
    let n = r
        .by_ref()
        .take(MAX_HEADER as u64)
        .read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Err(Error::CorruptHeader("unexpected end of file".into()));
    }
    if buf.last() != Some(&b'\n') {
        return Err(Error::CorruptHeader("header line not terminated".into()));
    }
    buf.pop();
    String::from_utf8(buf).map_err(|_| Error::CorruptHeader("header is not ASCII".into()))
}

fn parse_field(token: Option<&str>, key: &str) -> Result<usize> {
    let token = token.ok_or_else(|| Error::CorruptHeader(format!("missing `{key}=`")))?;
    let value = token
        .strip_prefix(key)
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| Error::CorruptHeader(format!("expected `{key}=`, found `{token}`")))?;
    value
        .parse()
        .map_err(|_| Error::CorruptHeader(format!("bad value for `{key}`: `{value}`")))
}

fn parse_emb_header(line: &str) -> Result<(usize, usize, Dtype)> {
    let rest = line
        .strip_prefix(EMB_MAGIC)
        .ok_or_else(|| Error::CorruptHeader(format!("bad magic in `{line}`")))?;
    let mut tokens = rest.split(' ').skip(1);
    if !rest.starts_with(' ') {
        return Err(Error::CorruptHeader(format!("bad magic in `{line}`")));
    }
    let dim = parse_field(tokens.next(), "dim")?;
    let rows = parse_field(tokens.next(), "rows")?;
    let dtype = match tokens.next() {
        None => Dtype::F32,
        Some("dtype=f64") => Dtype::F64,
        Some("dtype=f32") => Dtype::F32,
        Some(other) => return Err(Error::CorruptHeader(format!("unknown field `{other}`"))),
    };
    if tokens.next().is_some() {
        return Err(Error::CorruptHeader(format!("trailing fields in `{line}`")));
    }
    Ok((dim, rows, dtype))
}

pub fn write_emb<W: Write>(w: &mut W, m: &EmbMatrix, dtype: Dtype) -> Result<()> {
    write!(w, "{EMB_MAGIC} dim={} rows={}", m.dim, m.rows)?;
    if dtype == Dtype::F64 {
        write!(w, " dtype=f64")?;
    }
    w.write_all(b"\n")?;
    let mut bytes = Vec::with_capacity(m.data.len() * dtype.width());
    for &v in &m.data {
        if !v.is_finite() {
            return Err(Error::NonFinite("refusing to write non-finite value".into()));
        }
        match dtype {
            Dtype::F32 => bytes.extend_from_slice(&(v as f32).to_le_bytes()),
            Dtype::F64 => bytes.extend_from_slice(&v.to_le_bytes()),
        }
    }
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_emb<R: BufRead>(r: &mut R) -> Result<EmbMatrix> {
    let line = read_line_bounded(r)?;
    let (dim, rows, dtype) = parse_emb_header(&line)?;
    let count = dim
        .checked_mul(rows)
        .ok_or_else(|| Error::CorruptHeader("dim × rows overflows".into()))?;
    let mut bytes = vec![0u8; count * dtype.width()];
    r.read_exact(&mut bytes).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::CorruptHeader(format!("payload shorter than declared {rows}×{dim}"))
        } else {
            Error::Io(e)
        }
    })?;
    let data: Vec<f64> = match dtype {
        Dtype::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        Dtype::F64 => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "value at row {}, column {}",
            pos / dim.max(1),
            pos % dim.max(1)
        )));
    }
    Ok(EmbMatrix { dim, rows, data })
}

/// Writes via a temporary sibling file and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = BufWriter::new(File::create(&tmp)?);
        f.write_all(bytes)?;
        f.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_emb(path: &Path, m: &EmbMatrix) -> Result<()> {
    let mut bytes = Vec::new();
    write_emb(&mut bytes, m, Dtype::F32)?;
    write_atomic(path, &bytes)
}

pub fn load_emb(path: &Path) -> Result<EmbMatrix> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = BufReader::new(File::open(path)?);
    let m = read_emb(&mut r)?;
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::CorruptHeader(format!(
            "{}: trailing bytes after declared payload",
            path.display()
        )));
    }
    Ok(m)
}

/// A named tensor checkpoint with a JSON metadata block.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: String,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        writeln!(
            out,
            "{CKPT_MAGIC} tensors={} meta={}",
            self.tensors.len(),
            self.meta.len()
        )?;
        out.extend_from_slice(self.meta.as_bytes());
        out.push(b'\n');
        for (name, t) in &self.tensors {
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(Error::Checkpoint(format!("invalid tensor name `{name}`")));
            }
            let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            writeln!(out, "{name} {}", dims.join("x"))?;
        }
        for (_, t) in &self.tensors {
            let block = EmbMatrix::new(t.cols(), t.rows(), t.data().to_vec())?;
            write_emb(&mut out, &block, Dtype::F64)?;
        }
        Ok(out)
    }

    pub fn from_reader<R: BufRead>(r: &mut R) -> Result<Self> {
        let corrupt = |m: String| Error::Checkpoint(format!("corrupt manifest: {m}"));
        let header = read_line_bounded(r).map_err(|e| corrupt(e.to_string()))?;
        let rest = header
            .strip_prefix(CKPT_MAGIC)
            .and_then(|s| s.strip_prefix(' '))
            .ok_or_else(|| corrupt(format!("bad magic in `{header}`")))?;
        let mut tokens = rest.split(' ');
        let n = parse_field(tokens.next(), "tensors").map_err(|e| corrupt(e.to_string()))?;
        let meta_len = parse_field(tokens.next(), "meta").map_err(|e| corrupt(e.to_string()))?;
        let mut meta = vec![0u8; meta_len + 1];
        r.read_exact(&mut meta)
            .map_err(|_| corrupt("metadata truncated".into()))?;
        if meta.pop() != Some(b'\n') {
            return Err(corrupt("metadata not newline-terminated".into()));
        }
        let meta = String::from_utf8(meta).map_err(|_| corrupt("metadata not UTF-8".into()))?;
        let mut manifest = Vec::with_capacity(n);
        for _ in 0..n {
            let line = read_line_bounded(r).map_err(|e| corrupt(e.to_string()))?;
            let (name, dims) = line
                .split_once(' ')
                .ok_or_else(|| corrupt(format!("manifest line `{line}`")))?;
            let shape: Vec<usize> = dims
                .split('x')
                .map(|d| d.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| corrupt(format!("bad shape `{dims}`")))?;
            manifest.push((name.to_string(), shape));
        }
        let mut tensors = Vec::with_capacity(n);
        for (name, shape) in manifest {
            let block = read_emb(r)?;
            let t = Tensor::new(shape, block.data).map_err(|_| {
                corrupt(format!("payload of `{name}` does not match its manifest shape"))
            })?;
            tensors.push((name, t));
        }
        Ok(Self { meta, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let mut r = BufReader::new(File::open(path)?);
        Self::from_reader(&mut r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_bit_exact() {
        let m = EmbMatrix::new(2, 1, vec![1.0, -0.5]).unwrap();
        let mut out = Vec::new();
        write_emb(&mut out, &m, Dtype::F32).unwrap();
        let mut expected = b"AUCAP-EMB v1 dim=2 rows=1\n".to_vec();
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&(-0.5f32).to_le_bytes());
        assert_eq!(out, expected);
    }

    #[test]
    fn rejects_bad_headers() {
        for bad in [
            &b"AUCAP-EMB v2 dim=2 rows=1\n"[..],
            b"AUCAP-EMB v1 rows=1 dim=2\n",
            b"AUCAP-EMB v1 dim=x rows=1\n",
            b"AUCAP-EMB v1 dim=2 rows=1",
            b"AUCAP-EMB v1 dim=2 rows=1 extra=3\n",
        ] {
            let err = read_emb(&mut &bad[..]).unwrap_err();
            assert!(matches!(err, Error::CorruptHeader(_)), "{err:?}");
        }
    }

    #[test]
    fn truncated_payload_is_corrupt() {
        let mut bytes = b"AUCAP-EMB v1 dim=2 rows=2\n".to_vec();
        bytes.extend_from_slice(&[0u8; 12]);
        assert!(matches!(
            read_emb(&mut &bytes[..]),
            Err(Error::CorruptHeader(_))
        ));
    }

    #[test]
    fn non_finite_payload_rejected() {
        let mut bytes = b"AUCAP-EMB v1 dim=1 rows=1\n".to_vec();
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(read_emb(&mut &bytes[..]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise() {
        let ck = Checkpoint {
            meta: r#"{"k":1}"#.into(),
            tensors: vec![
                ("a.w".into(), Tensor::matrix(2, 2, vec![0.1, 1e-300, -3.3, 7.0]).unwrap()),
                ("a.b".into(), Tensor::vector(vec![std::f64::consts::PI])),
            ],
        };
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_reader(&mut &bytes[..]).unwrap();
        assert_eq!(back, ck);
        for ((_, x), (_, y)) in back.tensors.iter().zip(&ck.tensors) {
            let xb: Vec<u64> = x.data().iter().map(|v| v.to_bits()).collect();
            let yb: Vec<u64> = y.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(xb, yb);
        }
    }

    #[test]
    fn corrupt_manifest_is_reported() {
        let bytes = b"AUCAP-CKPT v1 tensors=1 meta=2\n{}\nw 2x\n".to_vec();
        let err = Checkpoint::from_reader(&mut &bytes[..]).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(_)), "{err:?}");
    }
}
