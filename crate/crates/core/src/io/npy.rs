//! Version 1.0 `.npy` containers: `\x93NUMPY`, a little-endian u16 header
//! length, a Python dict literal header, then raw C-order data.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::ProbabilityMap;

const MAGIC: &[u8] = b"\x93NUMPY";
const PREAMBLE: usize = MAGIC.len() + 2 + 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// Reads a little-endian float32 (or float64) C-order array; values are widened to f64.
pub fn read_npy(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_npy(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        e => e,
    })
}

fn parse_npy(bytes: &[u8]) -> Result<(Vec<usize>, Vec<f64>)> {
    if bytes.len() < PREAMBLE || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Format("missing .npy magic".into()));
    }
    let (major, minor) = (bytes[6], bytes[7]);
    if (major, minor) != (1, 0) {
        return Err(Error::Format(format!("unsupported .npy version {major}.{minor}")));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let header = bytes
        .get(PREAMBLE..PREAMBLE + header_len)
        .ok_or_else(|| Error::Format("truncated header".into()))?;
    let header = std::str::from_utf8(header).map_err(|_| Error::Format("header is not ASCII".into()))?;

    let dtype = match dict_value(header, "descr")?.trim_matches(|c| c == '\'' || c == '"') {
        "<f4" => Dtype::F32,
        "<f8" => Dtype::F64,
        other => return Err(Error::Format(format!("unsupported dtype {other}"))),
    };
    match dict_value(header, "fortran_order")? {
        "False" => {}
        "True" => return Err(Error::Format("Fortran-ordered arrays are not supported".into())),
        other => return Err(Error::Format(format!("bad fortran_order {other}"))),
    }
    let shape = parse_shape(dict_value(header, "shape")?)?;

    let count: usize = shape.iter().product();
    let payload = &bytes[PREAMBLE + header_len..];
    if payload.len() != count * dtype.size() {
        return Err(Error::Format(format!(
            "payload has {} bytes, shape {shape:?} needs {}",
            payload.len(),
            count * dtype.size()
        )));
    }
    let data = match dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
    };
    Ok((shape, data))
}

/// Raw text of the value stored under `key` in the header dict literal.
fn dict_value<'h>(header: &'h str, key: &str) -> Result<&'h str> {
    let missing = || Error::Format(format!("header lacks '{key}'"));
    let start = ["'", "\""]
        .iter()
        .find_map(|q| header.find(&format!("{q}{key}{q}")))
        .ok_or_else(missing)?;
    let rest = &header[start + key.len() + 2..];
    let rest = rest.trim_start().strip_prefix(':').ok_or_else(missing)?.trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')').map(|i| i + 1)
    } else {
        rest.find([',', '}'])
    }
    .ok_or_else(|| Error::Format(format!("unterminated value for '{key}'")))?;
    Ok(rest[..end].trim())
}

fn parse_shape(text: &str) -> Result<Vec<usize>> {
    let inner = text
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| Error::Format(format!("bad shape {text}")))?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Format(format!("bad shape {text}"))))
        .collect()
}

/// Writes a float32 C-order array with a 64-byte aligned header.
pub fn write_npy_f32(path: &Path, shape: &[usize], data: &[f32]) -> Result<()> {
    if shape.iter().product::<usize>() != data.len() {
        return Err(Error::Shape(format!("{} values for shape {shape:?}", data.len())));
    }
    let dims = match shape {
        [d] => format!("({d},)"),
        _ => format!("({})", shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")),
    };
    let mut header = format!("{{'descr': '<f4', 'fortran_order': False, 'shape': {dims}, }}");
    let unpadded = PREAMBLE + header.len() + 1;
    header.extend(std::iter::repeat_n(' ', unpadded.next_multiple_of(64) - unpadded));
    header.push('\n');
    let header_len = u16::try_from(header.len()).map_err(|_| Error::Format("header too long".into()))?;

    super::write_atomic(path, |w| {
        w.write_all(MAGIC)?;
        w.write_all(&[1, 0])?;
        w.write_all(&header_len.to_le_bytes())?;
        w.write_all(header.as_bytes())?;
        for v in data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    })
}

/// Reads an `h x w x K` probability tensor. With `classes` given, a different
/// class count is a shape error.
pub fn read_tensor(path: &Path, classes: Option<usize>) -> Result<ProbabilityMap> {
    let (shape, data) = read_npy(path)?;
    let [h, w, k] = shape[..] else {
        return Err(Error::Format(format!(
            "{}: expected a 3-d tensor, got shape {shape:?}",
            path.display()
        )));
    };
    if let Some(expected) = classes {
        if k != expected {
            return Err(Error::Shape(format!(
                "{}: tensor has {k} classes, manifest declares {expected}",
                path.display()
            )));
        }
    }
    ProbabilityMap::new(h, w, k, data)
}

pub fn write_tensor(path: &Path, probs: &ProbabilityMap) -> Result<()> {
    let data: Vec<f32> = probs.as_slice().iter().map(|&v| v as f32).collect();
    write_npy_f32(path, &[probs.height(), probs.width(), probs.classes()], &data)
}
