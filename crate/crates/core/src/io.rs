//! Field files: raw little-endian `f64` samples plus a `key: value` text header.
//!
//! `<stem>.bin` holds the components one after another, each in row-major half-space order
//! (horizontal axes first, vertical fastest). `<stem>.hdr` records the grid, parity and
//! component count.

use crate::error::{Error, Result};
use crate::field::{Parity, SpectralField, VectorField};
use crate::grid::SpectralGrid;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub grid: SpectralGrid,
    pub parity: Parity,
    pub components: Vec<Vec<f64>>,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("hdr"))
}

/// Floats in the header use Rust's shortest round-trip formatting, so parsing is exact.
pub fn write_field(stem: &Path, file: &FieldFile) -> Result<()> {
    let g = &file.grid;
    for c in &file.components {
        if c.len() != g.half_len() {
            return Err(Error::Shape { expected: g.half_len(), got: c.len() });
        }
    }
    let (bin, hdr) = paths(stem);
    let header = format!(
        "d: {}\nn_h: {}\nn_z: {}\nL_h: {:?}\nL_z: {:?}\nparity: {}\nn_components: {}\n",
        g.d,
        g.n_h,
        g.n_z,
        g.l_h,
        g.l_z,
        file.parity.name(),
        file.components.len()
    );
    let mut bytes = Vec::with_capacity(8 * g.half_len() * file.components.len());
    for c in &file.components {
        for v in c {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(hdr, header)?;
    fs::write(bin, bytes)?;
    Ok(())
}

pub fn read_field(stem: &Path) -> Result<FieldFile> {
    let (bin, hdr) = paths(stem);
    let text = fs::read_to_string(hdr)?;
    let mut kv = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line.split_once(':').ok_or_else(|| Error::Format(format!("bad header line {line:?}")))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    fn get<T: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Result<T> {
        kv.get(key)
            .ok_or_else(|| Error::Format(format!("missing header key {key}")))?
            .parse()
            .map_err(|_| Error::Format(format!("bad value for {key}")))
    }
    let grid = SpectralGrid::new(get(&kv, "d")?, get(&kv, "n_h")?, get(&kv, "n_z")?, get(&kv, "L_h")?, get(&kv, "L_z")?)?;
    let parity_name: String = get(&kv, "parity")?;
    let parity = Parity::parse(&parity_name).ok_or_else(|| Error::Format(format!("unknown parity {parity_name}")))?;
    let nc: usize = get(&kv, "n_components")?;
    let bytes = fs::read(bin)?;
    let n = grid.half_len();
    if bytes.len() != 8 * n * nc {
        return Err(Error::Shape { expected: 8 * n * nc, got: bytes.len() });
    }
    let vals: Vec<f64> = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
    let components = vals.chunks(n).map(|c| c.to_vec()).collect();
    Ok(FieldFile { grid, parity, components })
}

impl FieldFile {
    pub fn from_scalar(f: &SpectralField) -> Self {
        FieldFile { grid: *f.grid(), parity: f.parity(), components: vec![f.samples()] }
    }
    pub fn from_vector(u: &VectorField) -> Self {
        FieldFile { grid: *u.grid(), parity: Parity::Raw, components: u.samples() }
    }
    pub fn to_fields(&self) -> Result<Vec<SpectralField>> {
        self.components.iter().map(|c| SpectralField::from_samples(self.grid, c, self.parity)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_exact_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = SpectralGrid::new(3, 4, 8, 0.1 + 0.2, 1.0 / 3.0).unwrap();
        let c: Vec<f64> = (0..g.half_len()).map(|i| (i as f64).sqrt() * std::f64::consts::PI).collect();
        let file = FieldFile { grid: g, parity: Parity::Odd, components: vec![c.clone(), c.iter().map(|x| -x).collect()] };
        let stem = dir.path().join("u");
        write_field(&stem, &file).unwrap();
        let back = read_field(&stem).unwrap();
        assert_eq!(back, file);
        for (a, b) in back.components[0].iter().zip(&c) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
