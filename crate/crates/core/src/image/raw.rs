//! `STARF32` raw grid dumps: 8 magic bytes, `u32` LE height, `u32` LE width,
//! then `height × width` little-endian `f32` values in row-major order.

use std::io::{ErrorKind, Read, Write};

use crate::error::{Result, StarError};
use crate::image::ImageGrid;

pub const RAW_MAGIC: [u8; 8] = *b"STARF32\0";

/// Values are narrowed to `f32`.
pub fn write_raw_grid<W: Write>(grid: &ImageGrid, mut sink: W) -> Result<()> {
    let (h, w) = grid.dims();
    let h32 = u32::try_from(h).map_err(|_| StarError::Format(format!("height {h} exceeds u32")))?;
    let w32 = u32::try_from(w).map_err(|_| StarError::Format(format!("width {w} exceeds u32")))?;
    let mut buf = Vec::with_capacity(16 + 4 * grid.len());
    buf.extend_from_slice(&RAW_MAGIC);
    buf.extend_from_slice(&h32.to_le_bytes());
    buf.extend_from_slice(&w32.to_le_bytes());
    for &v in grid.as_slice() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    sink.write_all(&buf)?;
    Ok(())
}

fn read_exact_or<R: Read>(source: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    source.read_exact(buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => StarError::Format(format!("truncated {what}")),
        _ => StarError::Io(e),
    })
}

pub fn read_raw_grid<R: Read>(mut source: R) -> Result<ImageGrid> {
    let mut magic = [0u8; 8];
    read_exact_or(&mut source, &mut magic, "header")?;
    if magic != RAW_MAGIC {
        return Err(StarError::Format(format!("bad magic {magic:02x?}")));
    }
    let mut word = [0u8; 4];
    read_exact_or(&mut source, &mut word, "header")?;
    let h = u32::from_le_bytes(word) as usize;
    read_exact_or(&mut source, &mut word, "header")?;
    let w = u32::from_le_bytes(word) as usize;
    if h == 0 || w == 0 {
        return Err(StarError::Format(format!("empty grid {h}x{w}")));
    }
    let bytes = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(4))
        .filter(|&n| n <= isize::MAX as usize)
        .ok_or_else(|| StarError::Format(format!("dimensions {h}x{w} overflow")))?;
    // The header size is not trusted for preallocation.
    let mut payload = Vec::new();
    let got = source
        .by_ref()
        .take(bytes as u64)
        .read_to_end(&mut payload)?;
    if got != bytes {
        return Err(StarError::Format(format!(
            "truncated payload: {got} of {bytes} bytes"
        )));
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    ImageGrid::new(h, w, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(g: &ImageGrid) -> ImageGrid {
        let mut buf = Vec::new();
        write_raw_grid(g, &mut buf).unwrap();
        read_raw_grid(buf.as_slice()).unwrap()
    }

    #[test]
    fn single_pixel_layout() {
        let g = ImageGrid::filled(1, 1, 0.5);
        let mut buf = Vec::new();
        write_raw_grid(&g, &mut buf).unwrap();
        assert_eq!(
            buf,
            [
                b"STARF32\0".as_slice(),
                &[1, 0, 0, 0],
                &[1, 0, 0, 0],
                &0.5f32.to_le_bytes()
            ]
            .concat()
        );
        assert_eq!(round_trip(&g), g);
    }

    #[test]
    fn distinct_values() {
        let g = ImageGrid::new(3, 2, vec![0.0, 0.25, 0.5, 0.75, 1.0, -2.0]).unwrap();
        assert_eq!(round_trip(&g), g);
    }

    #[test]
    fn bad_magic() {
        let mut buf = Vec::new();
        write_raw_grid(&ImageGrid::zeros(1, 1), &mut buf).unwrap();
        buf[0] = b'X';
        assert!(matches!(
            read_raw_grid(buf.as_slice()),
            Err(StarError::Format(_))
        ));
    }

    #[test]
    fn truncated() {
        let mut buf = Vec::new();
        write_raw_grid(&ImageGrid::zeros(2, 2), &mut buf).unwrap();
        for cut in [4, 12, buf.len() - 1] {
            let err = read_raw_grid(&buf[..cut]).unwrap_err();
            assert!(
                matches!(err, StarError::Format(ref m) if m.contains("truncated")),
                "{err}"
            );
        }
    }

    #[test]
    fn huge_dimensions_without_payload() {
        let mut buf = RAW_MAGIC.to_vec();
        buf.extend_from_slice(&u32::MAX.to_le_bytes());
        buf.extend_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(
            read_raw_grid(buf.as_slice()),
            Err(StarError::Format(_))
        ));
    }
}
