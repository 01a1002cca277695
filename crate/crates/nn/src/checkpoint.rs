//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! "DJSCCM1" | schema version | parameter count
//! per parameter: name length | name bytes | rank | dims... | f32 values
//! ```
//!
//! Values are stored as `f32`; parameters are held in `f64` in memory, so a
//! store survives a save/load cycle exactly once its values are
//! `f32`-representable (which holds for anything that was loaded).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{NnError, Result};
use crate::tensor::{ParameterStore, Tensor};

pub const MAGIC: &[u8; 7] = b"DJSCCM1";

fn put_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| NnError::Checkpoint(format!("{v} exceeds u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn write_checkpoint<W: Write>(store: &ParameterStore, w: &mut W) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(w, store.schema_version as usize)?;
    put_u32(w, store.len())?;
    for (name, t) in store.iter() {
        put_u32(w, name.len())?;
        w.write_all(name.as_bytes())?;
        put_u32(w, t.shape.len())?;
        for &d in &t.shape {
            put_u32(w, d)?;
        }
        for &v in &t.values {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<ParameterStore> {
    let mut magic = [0u8; 7];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let mut store = ParameterStore::new();
    store.schema_version = get_u32(r)?;
    let count = get_u32(r)?;
    for _ in 0..count {
        let len = get_u32(r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| NnError::Checkpoint("parameter name is not UTF-8".into()))?;
        let rank = get_u32(r)? as usize;
        let shape = (0..rank)
            .map(|_| get_u32(r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let mut raw = vec![0u8; n * 4];
        r.read_exact(&mut raw)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        if store.contains(&name) {
            return Err(NnError::Checkpoint(format!("duplicate parameter `{name}`")));
        }
        store.insert(name, Tensor::new(shape, values));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(NnError::Checkpoint("trailing bytes".into()));
    }
    Ok(store)
}

pub fn save_checkpoint(store: &ParameterStore, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(store, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ParameterStore> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParameterStore {
        let mut s = ParameterStore::new();
        s.insert("enc.w", Tensor::new(vec![2, 3], vec![0.5, -1.25, 3.0, 0.0, 1e-3, 7.0]));
        s.insert("alpha", Tensor::new(vec![1], vec![0.25]));
        s
    }

    #[test]
    fn bytes_are_stable_across_load_save() {
        let mut a = Vec::new();
        write_checkpoint(&sample(), &mut a).unwrap();
        assert_eq!(&a[..7], b"DJSCCM1");
        let loaded = read_checkpoint(&mut a.as_slice()).unwrap();
        let mut b = Vec::new();
        write_checkpoint(&loaded, &mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(read_checkpoint(&mut b.as_slice()).unwrap(), loaded);
    }

    #[test]
    fn header_layout() {
        let mut a = Vec::new();
        write_checkpoint(&sample(), &mut a).unwrap();
        assert_eq!(u32::from_le_bytes(a[7..11].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(a[11..15].try_into().unwrap()), 2);
        // first entry in name order is "alpha"
        assert_eq!(u32::from_le_bytes(a[15..19].try_into().unwrap()), 5);
        assert_eq!(&a[19..24], b"alpha");
    }

    #[test]
    fn rejects_corruption() {
        let mut a = Vec::new();
        write_checkpoint(&sample(), &mut a).unwrap();
        let mut bad = a.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(&mut bad.as_slice()).is_err());
        assert!(read_checkpoint(&mut &a[..a.len() - 1]).is_err());
        let mut long = a.clone();
        long.push(0);
        assert!(read_checkpoint(&mut long.as_slice()).is_err());
    }
}
