//! Versioned binary container for quasifree-state snapshots.
//!
//! Layout (all integers and floats little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `HFBSNAP1`                        |
//! | 8      | 4    | u32 format version (currently 1)        |
//! | 12     | 4    | u32 dimension d                         |
//! | 16     | 4    | u32 points per side N                   |
//! | 20     | 8    | f64 half length L                       |
//! | 28     | ...  | φ: N^d complex values as (re, im) f64   |
//! |        | ...  | γ: N^d×N^d complex kernel, row-major    |
//! |        | ...  | σ: N^d×N^d complex kernel, row-major    |
//!
//! Kernel entries are kernel values K(x_i; x_j) in the grid's row-major
//! site order. The layout is stable across releases; new fields require a
//! version bump.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{HfbError, Result};
use crate::grid::{GridField, GridKernel, TorusGrid};
use crate::states::QuasifreeState;

const MAGIC: &[u8; 8] = b"HFBSNAP1";
const VERSION: u32 = 1;

pub fn write_state(path: &Path, rho: &QuasifreeState) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let grid = rho.grid();
    f.write_all(MAGIC)?;
    f.write_all(&VERSION.to_le_bytes())?;
    f.write_all(&(grid.dim() as u32).to_le_bytes())?;
    f.write_all(&(grid.points_per_side() as u32).to_le_bytes())?;
    f.write_all(&grid.half_length().to_le_bytes())?;
    let mut put = |z: &C64| -> Result<()> {
        f.write_all(&z.re.to_le_bytes())?;
        f.write_all(&z.im.to_le_bytes())?;
        Ok(())
    };
    for z in rho.phi().values() {
        put(z)?;
    }
    for z in rho.gamma().values() {
        put(z)?;
    }
    for z in rho.sigma().values() {
        put(z)?;
    }
    Ok(())
}

pub fn read_state(path: &Path) -> Result<QuasifreeState> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(HfbError::SnapshotFormat("bad magic".into()));
    }
    let mut u32buf = [0u8; 4];
    f.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(HfbError::SnapshotFormat(format!(
            "unsupported version {version}"
        )));
    }
    f.read_exact(&mut u32buf)?;
    let dim = u32::from_le_bytes(u32buf) as usize;
    f.read_exact(&mut u32buf)?;
    let n = u32::from_le_bytes(u32buf) as usize;
    let mut f64buf = [0u8; 8];
    f.read_exact(&mut f64buf)?;
    let l = f64::from_le_bytes(f64buf);

    let grid: Arc<TorusGrid> = TorusGrid::new(dim, n, l)?;
    let m = grid.site_count();
    let mut get = |f: &mut dyn Read| -> Result<C64> {
        let mut b = [0u8; 8];
        f.read_exact(&mut b)?;
        let re = f64::from_le_bytes(b);
        f.read_exact(&mut b)?;
        let im = f64::from_le_bytes(b);
        Ok(C64::new(re, im))
    };
    let mut phi = Array1::zeros(m);
    for i in 0..m {
        phi[i] = get(&mut f)?;
    }
    let mut gamma = Array2::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            gamma[[i, j]] = get(&mut f)?;
        }
    }
    let mut sigma = Array2::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            sigma[[i, j]] = get(&mut f)?;
        }
    }
    // trailing bytes mean a corrupt or mislabeled file
    let mut probe = [0u8; 1];
    if f.read(&mut probe)? != 0 {
        return Err(HfbError::SnapshotFormat("trailing bytes".into()));
    }
    QuasifreeState::new(
        GridField::from_values(&grid, phi)?,
        GridKernel::from_values(&grid, gamma)?,
        GridKernel::from_values(&grid, sigma)?,
    )
}
