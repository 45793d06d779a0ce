//! Time series of solution frames: per frame `t` followed by the `n+1`
//! values of `u` on the Chebyshev nodes, little-endian f64. The decimal
//! variant writes one frame per line, comma separated.

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::io::binary::{read_f64s, write_f64, write_f64s};

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub u: Vec<f64>,
}

pub fn write_frame(w: &mut impl Write, t: f64, u: &[f64]) -> Result<()> {
    write_f64(w, t)?;
    write_f64s(w, u)
}

/// Reads every frame of a binary series with `n+1` values per frame.
pub fn read_frames(r: &mut impl Read, n: usize) -> Result<Vec<Frame>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let frame_len = 8 * (n + 2);
    if bytes.len() % frame_len != 0 {
        return Err(Error::Format(format!(
            "series of {} bytes is not a whole number of {frame_len}-byte frames",
            bytes.len()
        )));
    }
    bytes
        .chunks_exact(frame_len)
        .map(|mut chunk| {
            let vals = read_f64s(&mut chunk, n + 2)?;
            Ok(Frame {
                t: vals[0],
                u: vals[1..].to_vec(),
            })
        })
        .collect()
}

/// Formats with 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_frame_csv(w: &mut impl Write, t: f64, u: &[f64]) -> Result<()> {
    let mut line = fmt_f64(t);
    for v in u {
        line.push(',');
        line.push_str(&fmt_f64(*v));
    }
    line.push('\n');
    w.write_all(line.as_bytes())?;
    Ok(())
}

pub fn read_frames_csv(r: impl BufRead) -> Result<Vec<Frame>> {
    let mut frames = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.len() < 2 {
            return Err(Error::Format(format!("line {}: empty frame", lineno + 1)));
        }
        frames.push(Frame {
            t: vals[0],
            u: vals[1..].to_vec(),
        });
    }
    Ok(frames)
}
