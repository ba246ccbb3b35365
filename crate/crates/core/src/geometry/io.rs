//! Domain files: a JSON header plus a packed bitmask of interior cells.
//!
//! The mask holds one bit per bounding-grid cell in linear order
//! `(i * ny + j) * nz + k`, least significant bit first within each byte.
//! Boundary faces are never stored; they are re-derived on load.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DomainMetadata, GridDomain, Point};
use crate::error::{Error, Result};

pub const DOMAIN_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainHeader {
    pub format_version: u32,
    pub dim: usize,
    pub h: f64,
    pub origin: Point,
    pub shape: [usize; 3],
    pub metadata: DomainMetadata,
    pub interior_cells: usize,
    /// mask file name, relative to the header
    pub mask_file: String,
}

impl GridDomain {
    pub fn header(&self, mask_file: &str) -> DomainHeader {
        DomainHeader {
            format_version: DOMAIN_FORMAT_VERSION,
            dim: self.dim,
            h: self.h,
            origin: self.origin,
            shape: self.shape,
            metadata: self.metadata.clone(),
            interior_cells: self.num_cells(),
            mask_file: mask_file.to_string(),
        }
    }

    pub fn packed_mask(&self) -> Vec<u8> {
        let mask = self.mask();
        let mut bytes = vec![0u8; mask.len().div_ceil(8)];
        for (i, &b) in mask.iter().enumerate() {
            if b {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        bytes
    }
}

/// Writes `<stem>.json` and `<stem>.mask` into `dir`; returns both paths.
pub fn save_domain(domain: &GridDomain, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let mask_name = format!("{stem}.mask");
    let header_path = dir.join(format!("{stem}.json"));
    let mask_path = dir.join(&mask_name);
    fs::write(&mask_path, domain.packed_mask())?;
    let json = serde_json::to_string_pretty(&domain.header(&mask_name))?;
    fs::write(&header_path, json + "\n")?;
    Ok((header_path, mask_path))
}

pub fn load_domain(header_path: &Path) -> Result<GridDomain> {
    let text = fs::read_to_string(header_path)?;
    let header: DomainHeader = serde_json::from_str(&text)?;
    if header.format_version != DOMAIN_FORMAT_VERSION {
        return Err(Error::InvalidDomain(format!(
            "unsupported domain format version {}",
            header.format_version
        )));
    }
    let dir = header_path.parent().unwrap_or_else(|| Path::new("."));
    let bytes = fs::read(dir.join(&header.mask_file))?;
    let total = header.shape.iter().product::<usize>();
    if bytes.len() != total.div_ceil(8) {
        return Err(Error::InvalidDomain(format!(
            "mask file has {} bytes, expected {}",
            bytes.len(),
            total.div_ceil(8)
        )));
    }
    let mask: Vec<bool> = (0..total).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect();
    let domain =
        GridDomain::from_mask(header.dim, header.h, header.origin, header.shape, &mask, header.metadata)?;
    if domain.num_cells() != header.interior_cells {
        return Err(Error::InvalidDomain(format!(
            "header lists {} interior cells, mask has {}",
            header.interior_cells,
            domain.num_cells()
        )));
    }
    Ok(domain)
}
