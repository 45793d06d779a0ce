//! Operator cache: magic `KSGF`, version, `n`, `ν`, `Δ`, `l`, `r`, sub-grid
//! mode and margin, then `M` and `N` row-major and `J`, all little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::builder::{ConvolutionOperators, SubgridMode, SubgridPolicy};
use crate::error::{Error, Result};
use crate::greens::ProblemParams;
use crate::io::binary::*;

pub const CACHE_MAGIC: &[u8; 4] = b"KSGF";
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheHeader {
    pub version: u32,
    pub n: u32,
    pub params: ProblemParams,
    pub mode: SubgridMode,
    pub margin: u32,
}

impl CacheHeader {
    pub fn for_request(n: usize, params: &ProblemParams, policy: &SubgridPolicy) -> Result<Self> {
        Ok(CacheHeader {
            version: CACHE_VERSION,
            n: u32::try_from(n).map_err(|_| Error::invalid("grid order does not fit in u32"))?,
            params: *params,
            mode: policy.mode,
            margin: u32::try_from(policy.margin).map_err(|_| Error::invalid("margin does not fit in u32"))?,
        })
    }

    /// Bitwise comparison of every header field.
    pub fn matches(&self, other: &CacheHeader) -> bool {
        let bits = |p: &ProblemParams| {
            [p.nu.to_bits(), p.delta.to_bits(), p.l.to_bits(), p.r.to_bits()]
        };
        self.version == other.version
            && self.n == other.n
            && bits(&self.params) == bits(&other.params)
            && self.mode == other.mode
            && self.margin == other.margin
    }
}

pub fn write_header(w: &mut impl Write, h: &CacheHeader) -> Result<()> {
    w.write_all(CACHE_MAGIC)?;
    write_u32(w, h.version)?;
    write_u32(w, h.n)?;
    write_f64(w, h.params.nu)?;
    write_f64(w, h.params.delta)?;
    write_f64(w, h.params.l)?;
    write_f64(w, h.params.r)?;
    write_u8(w, h.mode.as_u8())?;
    write_u32(w, h.margin)
}

pub fn read_header(r: &mut impl Read) -> Result<CacheHeader> {
    expect_magic(r, CACHE_MAGIC)?;
    let version = read_u32(r)?;
    if version != CACHE_VERSION {
        return Err(Error::Format(format!("unsupported cache version {version}")));
    }
    let n = read_u32(r)?;
    let params = ProblemParams {
        nu: read_f64(r)?,
        delta: read_f64(r)?,
        l: read_f64(r)?,
        r: read_f64(r)?,
    };
    let mode_byte = read_u8(r)?;
    let mode = SubgridMode::from_u8(mode_byte)
        .ok_or_else(|| Error::Format(format!("unknown sub-grid mode {mode_byte}")))?;
    let margin = read_u32(r)?;
    Ok(CacheHeader {
        version,
        n,
        params,
        mode,
        margin,
    })
}

pub fn write_operators(w: &mut impl Write, ops: &ConvolutionOperators) -> Result<()> {
    let header = CacheHeader::for_request(ops.order(), ops.params(), ops.policy())?;
    write_header(w, &header)?;
    write_f64s(w, ops.m())?;
    write_f64s(w, ops.n_mat())?;
    write_f64s(w, ops.j())
}

/// Reads operators, rejecting files whose header differs from `expected`.
/// `min_order` is not stored in the file and is taken from `policy`.
pub fn read_operators(
    r: &mut impl Read,
    n: usize,
    params: &ProblemParams,
    policy: &SubgridPolicy,
) -> Result<ConvolutionOperators> {
    let expected = CacheHeader::for_request(n, params, policy)?;
    let found = read_header(r)?;
    if !found.matches(&expected) {
        return Err(Error::Mismatch(format!(
            "stale operator cache: file holds {found:?}, requested {expected:?}"
        )));
    }
    let dim = n + 1;
    let m = read_f64s(r, dim * dim)?;
    let nm = read_f64s(r, dim * dim)?;
    let j = read_f64s(r, dim)?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after operator payload".into()));
    }
    ConvolutionOperators::from_parts(n, *params, *policy, m, nm, j)
}

pub fn save_operators(path: &Path, ops: &ConvolutionOperators) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_operators(&mut w, ops)?;
    w.flush()?;
    Ok(())
}

pub fn load_operators(
    path: &Path,
    n: usize,
    params: &ProblemParams,
    policy: &SubgridPolicy,
) -> Result<ConvolutionOperators> {
    let mut r = BufReader::new(File::open(path)?);
    read_operators(&mut r, n, params, policy)
}
