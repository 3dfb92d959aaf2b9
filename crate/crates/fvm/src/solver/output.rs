//! On-disk snapshot format.
//!
//! A field file is the magic `TFV1`, three little-endian u64 dimensions
//! (nx, ny, nvar), the solution time as a little-endian f64, and the cell
//! data as little-endian f64 in row-major order with the variable index
//! fastest. A human-readable `<file>.meta` companion carries the same header
//! as `key=value` lines.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::FvmError;
use crate::grid::{Cells, Field};

pub const MAGIC: &[u8; 4] = b"TFV1";

/// Path of the companion metadata file.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".meta");
    PathBuf::from(os)
}

/// Writes `field` at solution time `t` to `path`, plus the `.meta` companion.
pub fn write_field(path: &Path, field: &Field, t: f64, system: &str) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    for dim in [field.nx(), field.ny(), field.n_vars()] {
        w.write_all(&(dim as u64).to_le_bytes())?;
    }
    w.write_all(&t.to_le_bytes())?;
    for v in field.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;

    let meta = format!(
        "format=TFV1\nnx={}\nny={}\nnvar={}\nt={}\nsystem={}\n",
        field.nx(),
        field.ny(),
        field.n_vars(),
        t,
        system
    );
    std::fs::write(meta_path(path), meta)
}

/// Reads a field file back. Returns the field and its solution time.
pub fn read_field(path: &Path) -> Result<(Field, f64), FvmError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 4 + 3 * 8 + 8 {
        return Err(FvmError::Format(format!(
            "{} is too short for a header",
            path.display()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(FvmError::Format(format!(
            "{} does not start with the TFV1 magic",
            path.display()
        )));
    }
    let mut at = 4;
    let mut next_u64 = || {
        let v = u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        at += 8;
        v
    };
    let nx = next_u64() as usize;
    let ny = next_u64() as usize;
    let nvar = next_u64() as usize;
    let t = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    at += 8;

    let n_scalars = nx
        .checked_mul(ny)
        .and_then(|v| v.checked_mul(nvar))
        .ok_or_else(|| FvmError::Format("dimensions overflow".into()))?;
    let expect = at + 8 * n_scalars;
    if bytes.len() != expect {
        return Err(FvmError::Format(format!(
            "{}: expected {} bytes for {}x{}x{}, found {}",
            path.display(),
            expect,
            nx,
            ny,
            nvar,
            bytes.len()
        )));
    }
    let data = bytes[at..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let field = Field::from_vec(nx, ny, nvar, data)
        .ok_or_else(|| FvmError::Format("dimension/data mismatch".into()))?;
    Ok((field, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellsMut;

    #[test]
    fn fields_round_trip_bitwise_with_metadata() {
        let dir = std::env::temp_dir().join(format!("tfv-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("snap-000007.tfv");

        let mut f = Field::zeros(3, 2, 4);
        for (k, v) in f.data_mut().iter_mut().enumerate() {
            *v = (k as f64) * 0.125 - 1.0;
        }
        f.cell_mut(2, 1)[3] = -0.0;
        write_field(&path, &f, 0.29296875, "euler-cosine").unwrap();

        let (back, t) = read_field(&path).unwrap();
        assert_eq!(t, 0.29296875);
        assert_eq!(back.data().len(), f.data().len());
        for (a, b) in back.data().iter().zip(f.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        let meta = std::fs::read_to_string(meta_path(&path)).unwrap();
        assert!(meta.contains("nx=3"));
        assert!(meta.contains("ny=2"));
        assert!(meta.contains("nvar=4"));
        assert!(meta.contains("t=0.29296875"));
        assert!(meta.contains("system=euler-cosine"));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn header_and_length_problems_are_descriptive() {
        let dir = std::env::temp_dir().join(format!("tfv-bad-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();

        let short = dir.join("short.tfv");
        std::fs::write(&short, b"TFV1").unwrap();
        assert!(matches!(read_field(&short), Err(FvmError::Format(_))));

        let magic = dir.join("magic.tfv");
        std::fs::write(&magic, vec![0u8; 64]).unwrap();
        let err = read_field(&magic).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");

        let truncated = dir.join("trunc.tfv");
        let f = Field::zeros(4, 4, 2);
        write_field(&truncated, &f, 0.0, "spray").unwrap();
        let mut bytes = std::fs::read(&truncated).unwrap();
        bytes.truncate(bytes.len() - 8);
        std::fs::write(&truncated, bytes).unwrap();
        let err = read_field(&truncated).unwrap_err();
        assert!(err.to_string().contains("expected"), "{err}");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
