//! Binary grid container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "MRNL"          4 bytes magic
//! version         u16 (currently 1)
//! dtype           u8  (0 complex128, 1 float64, 2 packed bool)
//! ndim            u8
//! dims            ndim x u32
//! payload         row-major; complex values as interleaved re/im f64,
//!                 bools packed 8 per byte, least significant bit first
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::{BGrid, CGrid, Error, RGrid, Result, Shape};

pub const MAGIC: &[u8; 4] = b"MRNL";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum GridData {
    Complex(CGrid),
    Real(RGrid),
    Bool(BGrid),
}

impl GridData {
    pub fn dtype(&self) -> u8 {
        match self {
            GridData::Complex(_) => 0,
            GridData::Real(_) => 1,
            GridData::Bool(_) => 2,
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            GridData::Complex(g) => g.dim(),
            GridData::Real(g) => g.dim(),
            GridData::Bool(g) => g.dim(),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            GridData::Complex(_) => "complex",
            GridData::Real(_) => "real",
            GridData::Bool(_) => "bool",
        }
    }

    pub fn into_complex(self) -> Result<CGrid> {
        match self {
            GridData::Complex(g) => Ok(g),
            other => Err(Error::Format(format!("expected a complex grid, found {}", other.kind()))),
        }
    }

    pub fn into_real(self) -> Result<RGrid> {
        match self {
            GridData::Real(g) => Ok(g),
            other => Err(Error::Format(format!("expected a real grid, found {}", other.kind()))),
        }
    }

    pub fn into_bool(self) -> Result<BGrid> {
        match self {
            GridData::Bool(g) => Ok(g),
            other => Err(Error::Format(format!("expected a bool grid, found {}", other.kind()))),
        }
    }
}

pub fn to_bytes(data: &GridData) -> Vec<u8> {
    let (r, c) = data.shape();
    let mut out = Vec::with_capacity(16 + 16 * r * c);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(data.dtype());
    out.push(2);
    out.extend_from_slice(&(r as u32).to_le_bytes());
    out.extend_from_slice(&(c as u32).to_le_bytes());
    match data {
        GridData::Complex(g) => {
            for z in g.iter() {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        GridData::Real(g) => {
            for v in g.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        GridData::Bool(g) => {
            let mut byte = 0u8;
            for (i, &b) in g.iter().enumerate() {
                byte |= (b as u8) << (i % 8);
                if i % 8 == 7 {
                    out.push(byte);
                    byte = 0;
                }
            }
            if g.len() % 8 != 0 {
                out.push(byte);
            }
        }
    }
    out
}

fn take<'a>(buf: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if buf.len() < n {
        return Err(Error::Format("truncated file".into()));
    }
    let (head, tail) = buf.split_at(n);
    *buf = tail;
    Ok(head)
}

fn f64_at(b: &[u8], i: usize) -> f64 {
    f64::from_le_bytes(b[8 * i..8 * i + 8].try_into().expect("8 bytes"))
}

pub fn from_bytes(bytes: &[u8]) -> Result<GridData> {
    let mut buf = bytes;
    if take(&mut buf, 4)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u16::from_le_bytes(take(&mut buf, 2)?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let head = take(&mut buf, 2)?;
    let (dtype, ndim) = (head[0], head[1] as usize);
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        dims.push(u32::from_le_bytes(take(&mut buf, 4)?.try_into().expect("4 bytes")) as usize);
    }
    let shape = match dims[..] {
        [r, c] => (r, c),
        [n] => (1, n),
        _ => return Err(Error::Format(format!("only 1-D and 2-D grids are supported, found ndim {ndim}"))),
    };
    let n = shape.0 * shape.1;
    let expected = match dtype {
        0 => 16 * n,
        1 => 8 * n,
        2 => n.div_ceil(8),
        t => return Err(Error::Format(format!("unknown dtype tag {t}"))),
    };
    if buf.len() != expected {
        return Err(Error::Format(format!(
            "payload has {} bytes, header implies {expected}",
            buf.len()
        )));
    }
    let data = match dtype {
        0 => GridData::Complex(
            Array2::from_shape_vec(shape, (0..n).map(|i| Complex64::new(f64_at(buf, 2 * i), f64_at(buf, 2 * i + 1))).collect())
                .expect("length checked"),
        ),
        1 => GridData::Real(Array2::from_shape_vec(shape, (0..n).map(|i| f64_at(buf, i)).collect()).expect("length checked")),
        _ => GridData::Bool(
            Array2::from_shape_vec(shape, (0..n).map(|i| buf[i / 8] >> (i % 8) & 1 == 1).collect())
                .expect("length checked"),
        ),
    };
    Ok(data)
}

/// Writes via a temporary sibling and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::input(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_grid(path: &Path, data: &GridData) -> Result<()> {
    write_atomic(path, &to_bytes(data))
}

pub fn read_grid(path: &Path) -> Result<GridData> {
    from_bytes(&fs::read(path)?)
}

pub fn write_complex(path: &Path, g: &CGrid) -> Result<()> {
    write_grid(path, &GridData::Complex(g.clone()))
}

pub fn write_real(path: &Path, g: &RGrid) -> Result<()> {
    write_grid(path, &GridData::Real(g.clone()))
}

pub fn write_bool(path: &Path, g: &BGrid) -> Result<()> {
    write_grid(path, &GridData::Bool(g.clone()))
}

pub fn read_complex(path: &Path) -> Result<CGrid> {
    read_grid(path)?.into_complex()
}

pub fn read_real(path: &Path) -> Result<RGrid> {
    read_grid(path)?.into_real()
}

pub fn read_bool(path: &Path) -> Result<BGrid> {
    read_grid(path)?.into_bool()
}
