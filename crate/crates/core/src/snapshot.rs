//! Binary field snapshots.
//!
//! Layout (little-endian): magic `SPLB`, version `u32`, `n: u32`,
//! `box_length: f64`, `t: f64`, role `u32`, component count `u32`, then each
//! component as `n³` doubles, then the CRC-32 of those doubles as `u32`.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::field::{FieldError, PeriodicField};

pub const MAGIC: &[u8; 4] = b"SPLB";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8 + 4 + 4;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("not a snapshot file (bad magic)")]
    Magic,
    #[error("snapshot format version {found} is incompatible with version {VERSION}")]
    Version { found: u32 },
    #[error("snapshot truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("snapshot has {extra} trailing bytes")]
    Trailing { extra: usize },
    #[error("snapshot checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("snapshot header mismatch: {0}")]
    Header(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRole {
    Velocity,
    Vorticity,
}

impl FieldRole {
    fn tag(self) -> u32 {
        match self {
            FieldRole::Velocity => 0,
            FieldRole::Vorticity => 1,
        }
    }

    fn from_tag(tag: u32) -> Result<Self, SnapshotError> {
        match tag {
            0 => Ok(FieldRole::Velocity),
            1 => Ok(FieldRole::Vorticity),
            other => Err(SnapshotError::Header(format!("unknown field role tag {other}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub field: PeriodicField,
    pub t: f64,
    pub role: FieldRole,
}

impl Snapshot {
    pub fn to_bytes(&self) -> Vec<u8> {
        let f = &self.field;
        let mut out = Vec::with_capacity(HEADER_LEN + 3 * 8 * f.len() + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(f.n() as u32).to_le_bytes());
        out.extend_from_slice(&f.box_length().to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        out.extend_from_slice(&self.role.tag().to_le_bytes());
        out.extend_from_slice(&3u32.to_le_bytes());
        for comp in f.components() {
            for v in comp {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out[HEADER_LEN..]);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SnapshotError> {
        if bytes.len() < HEADER_LEN {
            if bytes.len() >= 4 && &bytes[..4] != MAGIC {
                return Err(SnapshotError::Magic);
            }
            return Err(SnapshotError::Truncated { need: HEADER_LEN, have: bytes.len() });
        }
        if &bytes[..4] != MAGIC {
            return Err(SnapshotError::Magic);
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(SnapshotError::Version { found: version });
        }
        let n = u32_at(8) as usize;
        let box_length = f64_at(12);
        let t = f64_at(20);
        let role = FieldRole::from_tag(u32_at(28))?;
        let ncomp = u32_at(32) as usize;
        if ncomp != 3 {
            return Err(SnapshotError::Header(format!("component count {ncomp}, expected 3")));
        }
        if n == 0 {
            return Err(SnapshotError::Header("grid size n = 0".into()));
        }
        let len = n
            .checked_pow(3)
            .and_then(|c| c.checked_mul(ncomp * 8))
            .ok_or_else(|| SnapshotError::Header(format!("grid size n = {n} overflows")))?;
        let need = HEADER_LEN + len + 4;
        if bytes.len() < need {
            return Err(SnapshotError::Truncated { need, have: bytes.len() });
        }
        if bytes.len() > need {
            return Err(SnapshotError::Trailing { extra: bytes.len() - need });
        }
        let payload = &bytes[HEADER_LEN..HEADER_LEN + len];
        let stored = u32_at(HEADER_LEN + len);
        let computed = crc32fast::hash(payload);
        if stored != computed {
            return Err(SnapshotError::Checksum { stored, computed });
        }
        let cells = n * n * n;
        let mut comps: [Vec<f64>; 3] = Default::default();
        for (c, comp) in comps.iter_mut().enumerate() {
            *comp = payload[c * cells * 8..(c + 1) * cells * 8]
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect();
        }
        let field = PeriodicField::new(n, box_length, comps)?;
        Ok(Snapshot { field, t, role })
    }
}

pub fn save_snapshot(snapshot: &Snapshot, path: &Path) -> Result<(), SnapshotError> {
    fs::write(path, snapshot.to_bytes())?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<Snapshot, SnapshotError> {
    Snapshot::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_snapshot() -> Snapshot {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 32;
        let comps: [Vec<f64>; 3] =
            std::array::from_fn(|_| (0..n * n * n).map(|_| rng.random_range(-1.0..1.0)).collect());
        Snapshot {
            field: PeriodicField::new(n, 2.0 * std::f64::consts::PI, comps).unwrap(),
            t: 0.125,
            role: FieldRole::Velocity,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let snap = random_snapshot();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.splb");
        save_snapshot(&snap, &path).unwrap();
        let back = load_snapshot(&path).unwrap();
        assert_eq!(back.t.to_bits(), snap.t.to_bits());
        assert_eq!(back.role, snap.role);
        for c in 0..3 {
            let a = snap.field.component(c);
            let b = back.field.component(c);
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(back.to_bytes(), snap.to_bytes());
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = random_snapshot().to_bytes();
        let mut bad = bytes.clone();
        bad[HEADER_LEN + 1000] ^= 0x10;
        assert!(matches!(Snapshot::from_bytes(&bad), Err(SnapshotError::Checksum { .. })));

        let mut bumped = bytes.clone();
        bumped[4..8].copy_from_slice(&2u32.to_le_bytes());
        let err = Snapshot::from_bytes(&bumped).unwrap_err();
        assert!(matches!(err, SnapshotError::Version { found: 2 }));
        assert!(err.to_string().contains("incompatible"));

        assert!(matches!(Snapshot::from_bytes(&bytes[..bytes.len() - 9]), Err(SnapshotError::Truncated { .. })));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(Snapshot::from_bytes(&long), Err(SnapshotError::Trailing { extra: 1 })));

        let mut wrong_n = bytes.clone();
        wrong_n[8..12].copy_from_slice(&16u32.to_le_bytes());
        assert!(Snapshot::from_bytes(&wrong_n).is_err());
        assert!(matches!(Snapshot::from_bytes(b"NOPE and more bytes here to pass header"), Err(SnapshotError::Magic)));
    }
}
