//! Binary checkpoint formats.
//!
//! Dense hierarchy state (`HDN1`):
//! ```text
//! magic "HDN1" | n u64 | k u64 | trunc_kind u64 (0 level, 1 cap) |
//! trunc_value u64 | count u64 | time f64 |
//! index table (count*k bytes) | data (count*n*n complex as re,im f64)
//! ```
//!
//! TT state (`HTT1`):
//! ```text
//! magic "HTT1" | time f64 | num_cores u64 |
//! per core: r u64, m u64, rn u64, entries (r*m*rn complex as re,im f64)
//! ```
//! All integers and floats little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::Array3;

use heom_tt::TtVector;

use crate::dense::HeomState;
use crate::hierarchy::{HierarchySpace, Truncation};
use crate::{C64, CoreError, Result};

fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

pub fn save_dense(state: &HeomState, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"HDN1")?;
    let space = &state.space;
    write_u64(&mut w, state.dim as u64)?;
    write_u64(&mut w, space.modes() as u64)?;
    let (kind, value) = match space.truncation() {
        Truncation::Level(l) => (0u64, l as u64),
        Truncation::Cap(c) => (1u64, c as u64),
    };
    write_u64(&mut w, kind)?;
    write_u64(&mut w, value)?;
    write_u64(&mut w, space.len() as u64)?;
    write_f64(&mut w, state.time)?;
    for i in 0..space.len() {
        w.write_all(space.index(i))?;
    }
    for z in &state.data {
        write_f64(&mut w, z.re)?;
        write_f64(&mut w, z.im)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_dense(path: &Path) -> Result<HeomState> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != b"HDN1" {
        return Err(CoreError::Config("not a dense hierarchy checkpoint".into()));
    }
    let n = read_u64(&mut r)? as usize;
    let k = read_u64(&mut r)? as usize;
    let kind = read_u64(&mut r)?;
    let value = read_u64(&mut r)? as usize;
    let count = read_u64(&mut r)? as usize;
    let time = read_f64(&mut r)?;
    let truncation = match kind {
        0 => Truncation::Level(value),
        1 => Truncation::Cap(value),
        _ => return Err(CoreError::Config("unknown truncation kind".into())),
    };
    let space = HierarchySpace::enumerate(k, truncation)?;
    if space.len() != count {
        return Err(CoreError::Config("checkpoint index count mismatch".into()));
    }
    // the index table is implied by (k, truncation); verify it matches
    let mut table = vec![0u8; count * k];
    r.read_exact(&mut table)?;
    for i in 0..count {
        if &table[i * k..(i + 1) * k] != space.index(i) {
            return Err(CoreError::Config("checkpoint index table mismatch".into()));
        }
    }
    let mut data = Vec::with_capacity(count * n * n);
    for _ in 0..count * n * n {
        let re = read_f64(&mut r)?;
        let im = read_f64(&mut r)?;
        data.push(C64::new(re, im));
    }
    Ok(HeomState { space: Arc::new(space), dim: n, data, time })
}

pub fn save_tt(v: &TtVector, time: f64, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"HTT1")?;
    write_f64(&mut w, time)?;
    write_u64(&mut w, v.num_modes() as u64)?;
    for i in 0..v.num_modes() {
        let core = v.core(i);
        let (r, m, rn) = core.dim();
        write_u64(&mut w, r as u64)?;
        write_u64(&mut w, m as u64)?;
        write_u64(&mut w, rn as u64)?;
        for z in core.iter() {
            write_f64(&mut w, z.re)?;
            write_f64(&mut w, z.im)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_tt(path: &Path) -> Result<(TtVector, f64)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != b"HTT1" {
        return Err(CoreError::Config("not a TT checkpoint".into()));
    }
    let time = read_f64(&mut r)?;
    let num = read_u64(&mut r)? as usize;
    let mut cores = Vec::with_capacity(num);
    for _ in 0..num {
        let rr = read_u64(&mut r)? as usize;
        let m = read_u64(&mut r)? as usize;
        let rn = read_u64(&mut r)? as usize;
        let mut data = Vec::with_capacity(rr * m * rn);
        for _ in 0..rr * m * rn {
            let re = read_f64(&mut r)?;
            let im = read_f64(&mut r)?;
            data.push(C64::new(re, im));
        }
        cores.push(
            Array3::from_shape_vec((rr, m, rn), data)
                .map_err(|e| CoreError::Config(format!("core shape: {e}")))?,
        );
    }
    Ok((TtVector::from_cores(cores)?, time))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dense_roundtrip() {
        let space = Arc::new(HierarchySpace::enumerate(2, Truncation::Level(2)).unwrap());
        let rho = array![
            [C64::new(0.6, 0.0), C64::new(0.1, -0.2)],
            [C64::new(0.1, 0.2), C64::new(0.4, 0.0)]
        ];
        let mut st = HeomState::factorized(space, &rho).unwrap();
        st.time = 17.5;
        st.data[5] = C64::new(0.33, -0.25);
        let dir = std::env::temp_dir().join("heom_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("dense.bin");
        save_dense(&st, &path).unwrap();
        let back = load_dense(&path).unwrap();
        assert_eq!(back.time, st.time);
        assert_eq!(back.data, st.data);
        assert_eq!(back.dim, st.dim);
    }

    #[test]
    fn tt_roundtrip() {
        let rho = array![
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(0.0, 0.0)]
        ];
        let v = crate::ttheom::initial_state(&rho, 3, 2);
        let dir = std::env::temp_dir().join("heom_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("tt.bin");
        save_tt(&v, 3.25, &path).unwrap();
        let (back, time) = load_tt(&path).unwrap();
        assert_eq!(time, 3.25);
        assert_eq!(back.mode_sizes(), v.mode_sizes());
        assert!(back.to_dense().max_abs_diff(&v.to_dense()) < 1e-15);
    }
}
