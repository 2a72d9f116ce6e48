//! Dataset persistence.
//!
//! Binary layout, all little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 5     | magic `TSED1` |
//! | 2     | format version (u16) |
//! | 16    | `v_f`, `rho_m` (f64) |
//! | 40    | `x_min`, `x_max`, `dx`, `t_max`, `dt` (f64) |
//! | 8     | `X_m`, `T_n` (u32) |
//! | 8·X_m·T_n | densities, x-major then t (f64) |
//!
//! Datasets written by the pipeline hold Lax-Hopf values at the grid nodes.
//! The Godunov solver uses node-centred cells, so its output shares the same
//! node set when persisted.

use std::io::Write;
use std::path::Path;

use super::{DensityField, Environment, Grid};
use crate::codec::{format_sig, ByteReader, ByteWriter};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 5] = b"TSED1";
pub const DATASET_VERSION: u16 = 1;

pub fn write_dataset(field: &DensityField) -> Vec<u8> {
    let g = field.grid();
    let env = field.env();
    let mut w = ByteWriter::new();
    w.bytes(DATASET_MAGIC);
    w.u16(DATASET_VERSION);
    w.f64(env.v_f());
    w.f64(env.rho_m());
    for v in [g.x_min(), g.x_max(), g.dx(), g.t_max(), g.dt()] {
        w.f64(v);
    }
    w.u32(g.nx() as u32);
    w.u32(g.nt() as u32);
    w.f64s(field.values());
    w.finish()
}

pub fn read_dataset(bytes: &[u8]) -> Result<DensityField> {
    let mut r = ByteReader::new(bytes, "dataset");
    let magic = r.take(5, "magic")?;
    if magic != DATASET_MAGIC {
        return Err(r.error(format!(
            "bad magic {:?}, expected \"TSED1\"",
            String::from_utf8_lossy(magic)
        )));
    }
    let version = r.u16("version")?;
    if version != DATASET_VERSION {
        return Err(r.error(format!("unsupported version {version}")));
    }
    let v_f = r.f64("v_f")?;
    let rho_m = r.f64("rho_m")?;
    let env = Environment::new(v_f, rho_m).map_err(|e| r.error(e.to_string()))?;
    let mut g = [0.0; 5];
    for (slot, name) in g.iter_mut().zip(["x_min", "x_max", "dx", "t_max", "dt"]) {
        *slot = r.f64(name)?;
    }
    let grid = Grid::new(g[0], g[1], g[2], g[3], g[4]).map_err(|e| r.error(e.to_string()))?;
    let nx = r.u32("X_m")? as usize;
    let nt = r.u32("T_n")? as usize;
    if (nx, nt) != (grid.nx(), grid.nt()) {
        return Err(r.error(format!(
            "node counts {nx}x{nt} disagree with grid {}x{}",
            grid.nx(),
            grid.nt()
        )));
    }
    let rho = r.f64s(nx * nt, "densities")?;
    r.expect_end()?;
    DensityField::new(grid, env, rho).map_err(|e| r.error(e.to_string()))
}

pub fn write_dataset_file(field: &DensityField, path: &Path) -> Result<()> {
    std::fs::write(path, write_dataset(field)).map_err(|e| Error::io(path, e))
}

pub fn read_dataset_file(path: &Path) -> Result<DensityField> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_dataset(&bytes)
}

/// `x,t,rho` with one node per line, 9 significant digits.
pub fn write_csv(field: &DensityField, out: &mut impl Write) -> std::io::Result<()> {
    let g = field.grid();
    writeln!(out, "x,t,rho")?;
    for i in 0..g.nx() {
        let x = format_sig(g.x(i), 9);
        for n in 0..g.nt() {
            writeln!(out, "{x},{},{}", format_sig(g.t(n), 9), format_sig(field.get(i, n), 9))?;
        }
    }
    Ok(())
}
