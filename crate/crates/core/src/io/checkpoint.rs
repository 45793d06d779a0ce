//! Checkpoints: magic `KSCK`, version, `n`, `o`, `h`, `ν`, `l`, `r`, step
//! index, then the `o` history vectors oldest first, all little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::binary::*;
use crate::sbdf::{sbdf_scheme, SimState};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"KSCK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint(w: &mut impl Write, state: &SimState) -> Result<()> {
    let params = state.params();
    w.write_all(CHECKPOINT_MAGIC)?;
    write_u32(w, CHECKPOINT_VERSION)?;
    write_u32(w, state.order() as u32)?;
    write_u32(w, state.scheme().order() as u32)?;
    write_f64(w, state.h())?;
    write_f64(w, state.nu())?;
    write_f64(w, params.l)?;
    write_f64(w, params.r)?;
    write_u64(w, state.step_index())?;
    for v in state.history() {
        write_f64s(w, v)?;
    }
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<SimState> {
    expect_magic(r, CHECKPOINT_MAGIC)?;
    let version = read_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let n = read_u32(r)? as usize;
    let o = read_u32(r)? as usize;
    let h = read_f64(r)?;
    let nu = read_f64(r)?;
    let l = read_f64(r)?;
    let rr = read_f64(r)?;
    let step_index = read_u64(r)?;
    let scheme = sbdf_scheme(o)?;
    let history = (0..o)
        .map(|_| read_f64s(r, n + 1))
        .collect::<Result<Vec<_>>>()?;
    SimState::new(scheme, nu, h, l, rr, history, step_index)
}

pub fn save_checkpoint(path: &Path, state: &SimState) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, state)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<SimState> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}
