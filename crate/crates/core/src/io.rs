//! Atomic file output and the field file format.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

const FIELD_HEADER: &str = "shapegrad-field v1";

/// A coefficient vector tagged with the element order and the hash of its mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub order: usize,
    pub mesh_hash: String,
    pub coeffs: Vec<f64>,
}

impl FieldFile {
    pub fn to_text(&self) -> String {
        let mut s = format!("{FIELD_HEADER}\norder {} mesh {}\n", self.order, self.mesh_hash);
        for c in &self.coeffs {
            s.push_str(&format!("{c:.16e}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, message: &str| Error::Parse { line: line + 1, message: message.to_string() };
        match lines.next() {
            Some((_, l)) if l.trim() == FIELD_HEADER => {}
            _ => return Err(bad(0, "missing 'shapegrad-field v1' header")),
        }
        let (n, id) = lines.next().ok_or_else(|| bad(1, "missing space id line"))?;
        let parts: Vec<&str> = id.split_whitespace().collect();
        let (order, mesh_hash) = match parts.as_slice() {
            ["order", o, "mesh", h] => (o.parse().map_err(|_| bad(n, "order is not an integer"))?, h.to_string()),
            _ => return Err(bad(n, "expected 'order <k> mesh <hash>'")),
        };
        let coeffs = lines
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, l)| {
                l.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(n, "not a finite number"))
            })
            .collect::<Result<_>>()?;
        Ok(FieldFile { order, mesh_hash, coeffs })
    }

    /// Rejects a field written for a different mesh or space.
    pub fn check_matches(&self, order: usize, mesh_hash: &str, dofs: usize) -> Result<()> {
        if self.mesh_hash != mesh_hash {
            return Err(Error::invalid(format!("field belongs to mesh {}, not {mesh_hash}", self.mesh_hash)));
        }
        if self.order != order || self.coeffs.len() != dofs {
            return Err(Error::invalid(format!(
                "field has order {} with {} coefficients, expected order {order} with {dofs}",
                self.order,
                self.coeffs.len()
            )));
        }
        Ok(())
    }
}
