//! Field container files, CSV exports and content hashes.
//!
//! A container is the magic `NHFIELD\0`, a little-endian `u16` version, then
//! tagged chunks `tag[4] | len: u32 | payload`:
//!
//! | tag    | payload                         |
//! |--------|---------------------------------|
//! | `DIMN` | `u32` spatial dimension         |
//! | `PPTS` | `u32` points per dimension      |
//! | `BOXL` | `f64` box length                |
//! | `EXPS` | `f64` fractional exponent `s`   |
//! | `SYMB` | `u8` symbol kind (0 continuum, 1 subordinated) |
//! | `DATA` | row-major `f64` samples         |
//!
//! The JSON sidecar (`<file>.json`) repeats the metadata plus the SHA-256 of
//! the container; the loader rejects any disagreement.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::spectral::{Field, GridSpec, SymbolKind};

const MAGIC: &[u8; 8] = b"NHFIELD\0";
pub const CONTAINER_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMeta {
    pub format: String,
    pub version: u16,
    pub n: usize,
    pub points_per_dim: usize,
    pub box_length: f64,
    pub s: f64,
    pub symbol: SymbolKind,
    pub count: usize,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

fn chunk(out: &mut Vec<u8>, tag: &[u8; 4], payload: &[u8]) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
}

pub fn encode_field(field: &Field, s: f64) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(64 + 8 * field.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    chunk(&mut out, b"DIMN", &(g.n as u32).to_le_bytes());
    chunk(&mut out, b"PPTS", &(g.points_per_dim as u32).to_le_bytes());
    chunk(&mut out, b"BOXL", &g.box_length.to_le_bytes());
    chunk(&mut out, b"EXPS", &s.to_le_bytes());
    chunk(&mut out, b"SYMB", &[g.symbol.tag()]);
    let data: Vec<u8> = field.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    chunk(&mut out, b"DATA", &data);
    out
}

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

/// Parses a container; returns the field and its `s`.
pub fn decode_field(bytes: &[u8]) -> Result<(Field, f64)> {
    if bytes.len() < 10 || &bytes[..8] != MAGIC {
        return Err(fmt_err("bad magic"));
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != CONTAINER_VERSION {
        return Err(fmt_err(format!("unsupported container version {version}")));
    }
    let mut pos = 10;
    let (mut n, mut np, mut l, mut s, mut sym, mut data) = (None, None, None, None, None, None);
    while pos < bytes.len() {
        if pos + 8 > bytes.len() {
            return Err(fmt_err("truncated chunk header"));
        }
        let tag: [u8; 4] = bytes[pos..pos + 4].try_into().unwrap();
        let len = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        pos += 8;
        let payload = bytes.get(pos..pos + len).ok_or_else(|| fmt_err("truncated chunk payload"))?;
        pos += len;
        let want = |k: usize| {
            if len == k {
                Ok(())
            } else {
                Err(fmt_err(format!("chunk {} has length {len}", String::from_utf8_lossy(&tag))))
            }
        };
        match &tag {
            b"DIMN" => {
                want(4)?;
                n = Some(u32::from_le_bytes(payload.try_into().unwrap()) as usize);
            }
            b"PPTS" => {
                want(4)?;
                np = Some(u32::from_le_bytes(payload.try_into().unwrap()) as usize);
            }
            b"BOXL" => {
                want(8)?;
                l = Some(f64::from_le_bytes(payload.try_into().unwrap()));
            }
            b"EXPS" => {
                want(8)?;
                s = Some(f64::from_le_bytes(payload.try_into().unwrap()));
            }
            b"SYMB" => {
                want(1)?;
                sym = Some(SymbolKind::from_tag(payload[0]).ok_or_else(|| fmt_err("unknown symbol tag"))?);
            }
            b"DATA" => {
                if len % 8 != 0 {
                    return Err(fmt_err("DATA length is not a multiple of 8"));
                }
                data = Some(
                    payload
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect::<Vec<f64>>(),
                );
            }
            other => return Err(fmt_err(format!("unknown chunk {}", String::from_utf8_lossy(other)))),
        }
    }
    let missing = |name: &str| fmt_err(format!("missing {name} chunk"));
    let grid = GridSpec::new(
        n.ok_or_else(|| missing("DIMN"))?,
        np.ok_or_else(|| missing("PPTS"))?,
        l.ok_or_else(|| missing("BOXL"))?,
        sym.ok_or_else(|| missing("SYMB"))?,
    )?;
    let field = Field::new(grid, data.ok_or_else(|| missing("DATA"))?)?;
    Ok((field, s.ok_or_else(|| missing("EXPS"))?))
}

/// Writes the container and its JSON sidecar; returns the container hash.
pub fn write_field(path: &Path, field: &Field, s: f64) -> Result<String> {
    let bytes = encode_field(field, s);
    let hash = sha256_hex(&bytes);
    let g = field.grid();
    let meta = FieldMeta {
        format: "nehari-field".into(),
        version: CONTAINER_VERSION,
        n: g.n,
        points_per_dim: g.points_per_dim,
        box_length: g.box_length,
        s,
        symbol: g.symbol,
        count: field.len(),
        sha256: hash.clone(),
    };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, &bytes)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(hash)
}

pub fn read_field(path: &Path) -> Result<(Field, FieldMeta)> {
    let bytes = fs::read(path)?;
    let meta: FieldMeta = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    let (field, s) = decode_field(&bytes)?;
    let g = field.grid();
    let hash = sha256_hex(&bytes);
    let agree = meta.format == "nehari-field"
        && meta.version == CONTAINER_VERSION
        && meta.n == g.n
        && meta.points_per_dim == g.points_per_dim
        && meta.box_length.to_bits() == g.box_length.to_bits()
        && meta.s.to_bits() == s.to_bits()
        && meta.symbol == g.symbol
        && meta.count == field.len()
        && meta.sha256 == hash;
    if !agree {
        return Err(fmt_err("header and sidecar disagree"));
    }
    Ok((field, meta))
}

/// Two-column `x,value` CSV; for n > 1 the slice along the first axis
/// through the centre.
pub fn profile_csv(field: &Field) -> String {
    let g = field.grid();
    let np = g.points_per_dim;
    let c = np / 2;
    let mut out = String::from("x,value\n");
    for j in 0..np {
        let mut flat = j;
        for _ in 1..g.n {
            flat = flat * np + c;
        }
        out.push_str(&format!("{:.17e},{:.17e}\n", g.axis_coordinate(j), field.values()[flat]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn container_round_trip(values in proptest::collection::vec(-1e6f64..1e6, 16), s in 0.01f64..1.0, l in 0.5f64..500.0) {
            let g = GridSpec::new(1, 16, l, SymbolKind::Subordinated).unwrap();
            let f = Field::new(g, values).unwrap();
            let (back, s2) = decode_field(&encode_field(&f, s)).unwrap();
            prop_assert_eq!(back, f);
            prop_assert_eq!(s2.to_bits(), s.to_bits());
        }
    }

    #[test]
    fn file_round_trip_and_tamper_detection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.nhf");
        let g = GridSpec::new(2, 8, 3.0, SymbolKind::Continuum).unwrap();
        let f = Field::from_fn(g, |x| x[0] - 2.0 * x[1]).unwrap();
        let hash = write_field(&path, &f, 0.75).unwrap();
        let (back, meta) = read_field(&path).unwrap();
        assert_eq!(back, f);
        assert_eq!(meta.sha256, hash);
        assert_eq!(meta.s, 0.75);

        let side = sidecar_path(&path);
        let text = fs::read_to_string(&side).unwrap().replace("0.75", "0.5");
        fs::write(&side, text).unwrap();
        assert!(matches!(read_field(&path), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_field(b"nonsense").is_err());
        let g = GridSpec::line(8, 1.0).unwrap();
        let mut bytes = encode_field(&Field::zeros(g), 0.5);
        bytes.truncate(bytes.len() - 3);
        assert!(decode_field(&bytes).is_err());
    }

    #[test]
    fn profile_slice() {
        let g = GridSpec::new(2, 8, 8.0, SymbolKind::Continuum).unwrap();
        let f = Field::from_fn(g, |x| x[0] + 10.0 * x[1]).unwrap();
        let csv = profile_csv(&f);
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], "x,value");
        assert_eq!(rows.len(), 9);
        let last: Vec<f64> = rows[8].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(last, vec![3.0, 3.0]);
    }
}
