//! Binary spectral snapshots (little-endian):
//! `"SCNS"`, `u32` version, `i32 n_max`, `u64` mode count, then per mode in
//! space order `i32 k1, i32 k2, f64 re, f64 im`.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{build_space, SpectralVelocity};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"SCNS";
pub const SNAPSHOT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;
const MODE_LEN: usize = 4 + 4 + 8 + 8;

pub fn encode_snapshot(u: &SpectralVelocity) -> Vec<u8> {
    let space = u.space();
    let mut out = Vec::with_capacity(HEADER_LEN + MODE_LEN * space.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(space.n_max() as i32).to_le_bytes());
    out.extend_from_slice(&(space.len() as u64).to_le_bytes());
    for (k, c) in space.modes().iter().zip(u.coeffs()) {
        out.extend_from_slice(&k.k1.to_le_bytes());
        out.extend_from_slice(&k.k2.to_le_bytes());
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.0.len() < N {
            return Err(Error::Format("file is truncated".into()));
        }
        let (head, rest) = self.0.split_at(N);
        self.0 = rest;
        Ok(head.try_into().expect("length checked"))
    }
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<SpectralVelocity> {
    let mut cur = Cursor(bytes);
    if &cur.take::<4>()? != SNAPSHOT_MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(cur.take()?);
    if version != SNAPSHOT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: SNAPSHOT_VERSION,
        });
    }
    let n_max = i32::from_le_bytes(cur.take()?);
    let count = u64::from_le_bytes(cur.take()?);
    if !(1..=4096).contains(&n_max) {
        return Err(Error::Format(format!("implausible n_max {n_max}")));
    }
    let space = build_space(n_max as usize)?;
    if count != space.len() as u64 {
        return Err(Error::Format(format!(
            "mode count {count} does not match n_max {n_max} ({} modes)",
            space.len()
        )));
    }
    let mut psi = Vec::with_capacity(space.len());
    for expected in space.modes() {
        let k1 = i32::from_le_bytes(cur.take()?);
        let k2 = i32::from_le_bytes(cur.take()?);
        if (k1, k2) != (expected.k1, expected.k2) {
            return Err(Error::Format(format!(
                "mode ({k1}, {k2}) found where ({}, {}) was expected",
                expected.k1, expected.k2
            )));
        }
        let re = f64::from_le_bytes(cur.take()?);
        let im = f64::from_le_bytes(cur.take()?);
        psi.push(Complex64::new(re, im));
    }
    if !cur.0.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", cur.0.len())));
    }
    SpectralVelocity::from_coeffs(&space, psi)
}

pub fn write_snapshot(u: &SpectralVelocity, path: &Path) -> Result<()> {
    fs::write(path, encode_snapshot(u)).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<SpectralVelocity> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_snapshot(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}
