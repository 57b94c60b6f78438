//! Plain-text field dumps that restore bit-for-bit.
//!
//! Every float is written as the hex of its IEEE bits, one section per field:
//!
//! ```text
//! ibflow-fields v1
//! time <hex> step <n>
//! cells <n> faces <m>
//! u <3n hex words>
//! p ...
//! ```

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::fv::FieldSet;
use crate::Vec3;

pub const CHECKPOINT_HEADER: &str = "ibflow-fields v1";

fn hex_line(w: &mut impl Write, name: &str, values: impl Iterator<Item = f64>) -> Result<()> {
    write!(w, "{name}")?;
    for v in values {
        write!(w, " {:016x}", v.to_bits())?;
    }
    writeln!(w)?;
    Ok(())
}

pub fn write_checkpoint(w: &mut impl Write, time: f64, step: usize, fields: &FieldSet) -> Result<()> {
    writeln!(w, "{CHECKPOINT_HEADER}")?;
    writeln!(w, "time {:016x} step {step}", time.to_bits())?;
    writeln!(w, "cells {} faces {}", fields.u.len(), fields.phi.len())?;
    hex_line(w, "u", fields.u.iter().flat_map(|v| [v.x, v.y, v.z]))?;
    hex_line(w, "p", fields.p.iter().copied())?;
    hex_line(w, "T", fields.t.iter().copied())?;
    hex_line(w, "mu", fields.mu.iter().copied())?;
    hex_line(w, "shear_rate", fields.shear_rate.iter().copied())?;
    hex_line(w, "phi", fields.phi.iter().copied())?;
    Ok(())
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_hex(line: usize, tok: &str) -> Result<f64> {
    u64::from_str_radix(tok, 16)
        .map(f64::from_bits)
        .map_err(|_| perr(line, format!("bad hex word '{tok}'")))
}

/// Returns `(time, step, fields)`.
pub fn read_checkpoint(r: impl BufRead) -> Result<(f64, usize, FieldSet)> {
    let mut lines = r.lines();
    let mut lineno = 0;
    let mut next = |what: &str| -> Result<(usize, String)> {
        lineno += 1;
        let l = lines.next().transpose()?.ok_or_else(|| perr(lineno, format!("file ends before {what}")))?;
        Ok((lineno, l))
    };
    if next("header")?.1.trim() != CHECKPOINT_HEADER {
        return Err(perr(1, "not an ibflow-fields v1 file"));
    }
    let (ln, l) = next("time")?;
    let t: Vec<&str> = l.split_whitespace().collect();
    if t.len() != 4 || t[0] != "time" || t[2] != "step" {
        return Err(perr(ln, format!("bad time line '{l}'")));
    }
    let time = parse_hex(ln, t[1])?;
    let step: usize = t[3].parse().map_err(|_| perr(ln, format!("bad step '{}'", t[3])))?;
    let (ln, l) = next("sizes")?;
    let t: Vec<&str> = l.split_whitespace().collect();
    if t.len() != 4 || t[0] != "cells" || t[2] != "faces" {
        return Err(perr(ln, format!("bad size line '{l}'")));
    }
    let n: usize = t[1].parse().map_err(|_| perr(ln, "bad cell count"))?;
    let m: usize = t[3].parse().map_err(|_| perr(ln, "bad face count"))?;
    let mut section = |name: &str, len: usize| -> Result<Vec<f64>> {
        let (ln, l) = next(name)?;
        let mut toks = l.split_whitespace();
        if toks.next() != Some(name) {
            return Err(perr(ln, format!("expected section '{name}'")));
        }
        let v: Vec<f64> = toks.map(|t| parse_hex(ln, t)).collect::<Result<_>>()?;
        if v.len() != len {
            return Err(perr(ln, format!("section '{name}' has {} values, expected {len}", v.len())));
        }
        Ok(v)
    };
    let u = section("u", 3 * n)?;
    let fields = FieldSet {
        u: u.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect(),
        p: section("p", n)?,
        t: section("T", n)?,
        mu: section("mu", n)?,
        shear_rate: section("shear_rate", n)?,
        phi: section("phi", m)?,
    };
    Ok((time, step, fields))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let fs = FieldSet {
            u: vec![Vec3::new(0.1, -1e-300, f64::MIN_POSITIVE), Vec3::new(1.0 / 3.0, 2.0, -0.0)],
            p: vec![1e10, -7.25],
            t: vec![300.0, 301.123456789],
            mu: vec![1e3, 2e-3],
            shear_rate: vec![0.0, 1e-12],
            phi: vec![0.5, -0.25, 1.0 / 7.0],
        };
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, 0.1 + 0.2, 42, &fs).unwrap();
        let (t, s, back) = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(t.to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(s, 42);
        assert_eq!(back.u[1].z.to_bits(), (-0.0f64).to_bits());
        assert_eq!(back, fs);
        assert!(read_checkpoint("garbage\n".as_bytes()).is_err());
    }
}
