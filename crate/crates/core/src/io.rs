//! Field dumps and atomic file output.
//!
//! A dump is two files sharing a stem: `<stem>.f64` holds the samples as
//! little-endian doubles in row-major node order, `<stem>.json` the sidecar
//! `{dims, extent, params}`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::params::Params;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    /// Nodes per axis, one entry per dimension.
    pub dims: Vec<usize>,
    pub extent: f64,
    pub params: Params,
}

impl Sidecar {
    pub fn of(u: &Field, params: &Params) -> Self {
        let g = u.grid();
        Sidecar {
            dims: vec![g.n(); g.dim()],
            extent: g.extent(),
            params: *params,
        }
    }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| {
        Error::Io(std::io::Error::other(format!(
            "{} names no file",
            path.display()
        )))
    })?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn field_bytes(u: &Field) -> Vec<u8> {
    u.values().iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Writes `<stem>.f64` and `<stem>.json`.
pub fn write_field(stem: &Path, u: &Field, params: &Params) -> Result<()> {
    let sidecar = Sidecar::of(u, params);
    write_atomic(&with_ext(stem, "f64"), &field_bytes(u))?;
    write_atomic(
        &with_ext(stem, "json"),
        serde_json::to_string_pretty(&sidecar)?.as_bytes(),
    )
}

pub fn read_field(stem: &Path) -> Result<(Field, Params)> {
    let sidecar: Sidecar = serde_json::from_slice(&fs::read(with_ext(stem, "json"))?)?;
    let n = sidecar.dims.first().copied().unwrap_or(0);
    if sidecar.dims.iter().any(|&d| d != n) {
        return Err(Error::InvalidGrid(format!(
            "non-cubic dims {:?}",
            sidecar.dims
        )));
    }
    let grid = Grid::new(sidecar.dims.len(), n, sidecar.extent)?;
    let bytes = fs::read(with_ext(stem, "f64"))?;
    if bytes.len() != 8 * grid.len() {
        return Err(Error::InvalidGrid(format!(
            "{} bytes for {} samples",
            bytes.len(),
            grid.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of eight")))
        .collect();
    sidecar.params.validate()?;
    Ok((Field::new(grid, values)?, sidecar.params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip_is_exact() {
        let dir = std::env::temp_dir().join(format!("choquard-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let g = Grid::new(2, 8, 3.0).unwrap();
        let u = Field::from_fn(g, |x| (x[0] - 0.3 * x[1]).sin() / 7.0);
        let params = Params::choquard(2, 1.0, 2.5).unwrap();
        let stem = dir.join("u");
        write_field(&stem, &u, &params).unwrap();
        let (v, q) = read_field(&stem).unwrap();
        assert_eq!(u, v);
        assert_eq!(params, q);
        assert_eq!(fs::metadata(dir.join("u.f64")).unwrap().len(), 8 * 64);
        let side: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.join("u.json")).unwrap()).unwrap();
        assert_eq!(side["dims"], serde_json::json!([8, 8]));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn truncated_dump_is_rejected() {
        let dir = std::env::temp_dir().join(format!("choquard-io-short-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let g = Grid::new(1, 8, 3.0).unwrap();
        let stem = dir.join("u");
        write_field(
            &stem,
            &Field::zeros(g),
            &Params::choquard(1, 0.5, 2.0).unwrap(),
        )
        .unwrap();
        write_atomic(&dir.join("u.f64"), &[0u8; 16]).unwrap();
        assert!(matches!(read_field(&stem), Err(Error::InvalidGrid(_))));
        fs::remove_dir_all(&dir).unwrap();
    }
}
