//! Binary table files and CSV boundary slices.
//!
//! Layout, little-endian: magic `AMBT`, version `u32`, 32-byte vehicle parameter hash,
//! counts `u32 x 3`, ranges `f64 x 6` (speed, steering, direction), `mu_max f64`, then
//! the values as `f64` in `[i][j][k]` order.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BoundaryTable, GridSpec, TableError};
use crate::vehicle::VehicleParams;

pub const MAGIC: [u8; 4] = *b"AMBT";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 32 + 12 + 48 + 8;

/// What to do when a table was built for different vehicle parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum HashPolicy {
    Ignore,
    #[default]
    Warn,
    Error,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.bytes[self.pos..self.pos + N].try_into().unwrap();
        self.pos += N;
        out
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }
}

impl BoundaryTable {
    pub fn to_bytes(&self) -> Vec<u8> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.data.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.params_hash);
        for n in [g.n_v, g.n_delta, g.n_theta] {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        for r in [g.v_range.0, g.v_range.1, g.delta_range.0, g.delta_range.1, -PI, PI] {
            out.extend_from_slice(&r.to_le_bytes());
        }
        out.extend_from_slice(&self.mu_max.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TableError> {
        if bytes.len() < 8 || bytes[..4] != MAGIC {
            return Err(TableError::BadMagic);
        }
        let mut r = Reader { bytes, pos: 4 };
        let version = r.u32();
        if version != FORMAT_VERSION {
            return Err(TableError::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        if bytes.len() < HEADER_LEN {
            return Err(TableError::Length {
                found: bytes.len(),
                expected: HEADER_LEN,
            });
        }
        let hash: [u8; 32] = r.take();
        let (n_v, n_delta, n_theta) = (r.u32() as usize, r.u32() as usize, r.u32() as usize);
        let v_range = (r.f64(), r.f64());
        let delta_range = (r.f64(), r.f64());
        let theta_range = (r.f64(), r.f64());
        let mu_max = r.f64();
        let grid = GridSpec {
            n_v,
            n_delta,
            n_theta,
            v_range,
            delta_range,
        };
        grid.validate()?;
        if theta_range != (-PI, PI) {
            return Err(TableError::Grid(format!(
                "direction range {theta_range:?} is not (-pi, pi]"
            )));
        }
        let expected = grid
            .len()
            .checked_mul(8)
            .and_then(|n| n.checked_add(HEADER_LEN))
            .ok_or_else(|| TableError::Grid("node count overflows".into()))?;
        if bytes.len() != expected {
            return Err(TableError::Length {
                found: bytes.len(),
                expected,
            });
        }
        let data = (0..grid.len()).map(|_| r.f64()).collect();
        BoundaryTable::from_parts(grid, mu_max, hash, data)
    }

    /// Writes the table through a temporary file and a rename.
    pub fn save(&self, path: &Path) -> Result<(), TableError> {
        crate::fsutil::write_atomic(path, &self.to_bytes()).map_err(|e| match e {
            crate::ConfigError::Io { path, source } => TableError::Io { path, source },
            other => TableError::Data(other.to_string()),
        })
    }

    pub fn load(path: &Path) -> Result<Self, TableError> {
        let bytes = std::fs::read(path).map_err(|source| TableError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    /// Compares the stored parameter hash with `p`. Returns whether they match.
    pub fn verify_params(&self, p: &VehicleParams, policy: HashPolicy) -> Result<bool, TableError> {
        let matches = p.hash() == self.params_hash;
        if !matches {
            match policy {
                HashPolicy::Ignore => {}
                HashPolicy::Warn => log::warn!(
                    "boundary table was built for different vehicle parameters (table mu_max {}, vehicle mu_max {})",
                    self.mu_max,
                    p.mu_max
                ),
                HashPolicy::Error => return Err(TableError::HashMismatch),
            }
        }
        Ok(matches)
    }

    /// Interpolated boundary at speed `v` for each steering angle in `deltas`, one row
    /// per direction node: `delta,theta,rho,u_x,u_y`.
    pub fn slice_csv(&self, v: f64, deltas: &[f64]) -> String {
        let mut out = String::from("delta,theta,rho,u_x,u_y\n");
        for &d in deltas {
            for k in 0..self.grid.n_theta {
                let th = self.grid.theta_node(k);
                let rho = self.lookup(v, d, th);
                let (s, c) = th.sin_cos();
                writeln!(out, "{},{},{},{},{}", d, th, rho, rho * c, rho * s).unwrap();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{build_table, rho_square};
    use crate::vehicle::CheckHorizon;

    fn toy() -> BoundaryTable {
        let p = VehicleParams::default();
        build_table(&p, &GridSpec::new(5, 6, 8, &p), &CheckHorizon::default()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let t = toy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ambt");
        t.save(&path).unwrap();
        let back = BoundaryTable::load(&path).unwrap();
        assert_eq!(back.data().len(), t.data().len());
        for (a, b) in back.data().iter().zip(t.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back, t);
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let bytes = toy().to_bytes();
        assert!(matches!(BoundaryTable::from_bytes(b"NOPE1234"), Err(TableError::BadMagic)));
        let mut v = bytes.clone();
        v[4] = 9;
        assert!(matches!(BoundaryTable::from_bytes(&v), Err(TableError::Version { found: 9, .. })));
        assert!(matches!(
            BoundaryTable::from_bytes(&bytes[..bytes.len() - 3]),
            Err(TableError::Length { .. })
        ));
        let mut v = bytes.clone();
        // inflate the speed count
        v[40] = 50;
        assert!(matches!(BoundaryTable::from_bytes(&v), Err(TableError::Length { .. })));
        let mut v = bytes.clone();
        v[40] = 1;
        assert!(matches!(BoundaryTable::from_bytes(&v), Err(TableError::Grid(_))));
        let mut v = bytes;
        let n = v.len();
        v[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(BoundaryTable::from_bytes(&v), Err(TableError::Data(_))));
    }

    #[test]
    fn parameter_hash_policy() {
        let t = toy();
        let same = VehicleParams::default();
        assert!(t.verify_params(&same, HashPolicy::Error).unwrap());
        let other = same.with_mu_max(1.0);
        assert!(!t.verify_params(&other, HashPolicy::Warn).unwrap());
        assert!(!t.verify_params(&other, HashPolicy::Ignore).unwrap());
        assert!(matches!(t.verify_params(&other, HashPolicy::Error), Err(TableError::HashMismatch)));
    }

    #[test]
    fn slice_rows() {
        let t = toy();
        assert_eq!(t.slice_csv(15.4, &[]), "delta,theta,rho,u_x,u_y\n");
        let csv = t.slice_csv(15.4, &[0.08, 0.14]);
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 16);
        for row in rows {
            let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
            assert!(cols[2] <= rho_square(cols[1]) * (1.0 + 1e-9));
        }
    }
}
