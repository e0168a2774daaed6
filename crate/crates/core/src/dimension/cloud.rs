//! Binary point clouds: magic `HLAB`, `u32` version and `u64` count (all
//! little-endian), then `count` triples of `f64`.

use std::io::{Read, Write};

use crate::{Error, Result};

pub const CLOUD_MAGIC: &[u8; 4] = b"HLAB";
pub const CLOUD_VERSION: u32 = 1;

pub fn write_cloud<W: Write>(mut w: W, points: &[[f64; 3]]) -> std::io::Result<()> {
    w.write_all(CLOUD_MAGIC)?;
    w.write_all(&CLOUD_VERSION.to_le_bytes())?;
    w.write_all(&(points.len() as u64).to_le_bytes())?;
    for p in points {
        for v in p {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn read_cloud<R: Read>(mut r: R) -> Result<Vec<[f64; 3]>> {
    let io = |e: std::io::Error| Error::InvalidInput(format!("point cloud: {e}"));
    let mut header = [0u8; 16];
    r.read_exact(&mut header).map_err(io)?;
    if &header[..4] != CLOUD_MAGIC {
        return Err(Error::InvalidInput("point cloud: bad magic".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != CLOUD_VERSION {
        return Err(Error::InvalidInput(format!(
            "point cloud: unsupported version {version}"
        )));
    }
    let count = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let mut out = Vec::with_capacity(count.min(1 << 24) as usize);
    let mut buf = [0u8; 24];
    for _ in 0..count {
        r.read_exact(&mut buf).map_err(io)?;
        let f = |i: usize| f64::from_le_bytes(buf[8 * i..8 * i + 8].try_into().unwrap());
        out.push([f(0), f(1), f(2)]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let pts = vec![[0.1, 1.5, 3.0], [-0.5, 2.0, 0.0]];
        let mut bytes = Vec::new();
        write_cloud(&mut bytes, &pts).unwrap();
        assert_eq!(bytes.len(), 16 + 48);
        assert_eq!(&bytes[..4], b"HLAB");
        assert_eq!(read_cloud(bytes.as_slice()).unwrap(), pts);
        bytes[0] = b'X';
        assert!(read_cloud(bytes.as_slice()).is_err());
    }
}
