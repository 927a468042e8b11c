//! Grayscale PNG rendering of one dump component.
//!
//! Colormap: `|z| / max|z|` mapped linearly to 0..=255 (black = 0). Pixel
//! column `ix` is node `ix`; rows are flipped so that the second coordinate
//! grows upwards. An all-zero component renders black.

use std::path::Path;

use image::{GrayImage, Luma};

use crate::error::{Error, Result};
use crate::io::FieldDump;

pub fn render(dump: &FieldDump, channel: usize) -> Result<GrayImage> {
    let comp = dump.data.get(channel).ok_or_else(|| {
        Error::InvalidInput(format!(
            "channel {channel} out of range for a {:?} dump with {} components",
            dump.kind,
            dump.data.len()
        ))
    })?;
    let (nx, ny) = (dump.nx, dump.ny);
    let peak = comp.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if !peak.is_finite() {
        return Err(Error::InvalidInput("field is not finite".into()));
    }
    let scale = if peak > 0.0 { 255.0 / peak } else { 0.0 };
    Ok(GrayImage::from_fn(nx, ny, |x, y| {
        let iy = (ny - 1 - y) as usize;
        let z = comp[x as usize * ny as usize + iy];
        Luma([(z.norm() * scale).round().clamp(0.0, 255.0) as u8])
    }))
}

pub fn render_to_file(dump: &FieldDump, channel: usize, path: impl AsRef<Path>) -> Result<()> {
    render(dump, channel)?.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::DumpKind;
    use num_complex::Complex64 as C64;

    #[test]
    fn zero_field_is_black() {
        let d = FieldDump::scalar(5, 4, &[0.0; 20]).unwrap();
        let img = render(&d, 0).unwrap();
        assert!(img.pixels().all(|p| p.0[0] == 0));
    }

    #[test]
    fn channel_out_of_range() {
        let d = FieldDump::scalar(2, 2, &[1.0; 4]).unwrap();
        assert!(matches!(render(&d, 1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn orientation_and_scaling() {
        // Single bright node at ix = 1, iy = 2 of a 3×3 grid.
        let mut v = vec![C64::new(0.0, 0.0); 9];
        v[3 + 2] = C64::new(0.0, -2.0);
        v[0] = C64::new(1.0, 0.0);
        let d = FieldDump::new(DumpKind::Scalar, 3, 3, vec![v]).unwrap();
        let img = render(&d, 0).unwrap();
        assert_eq!(img.get_pixel(1, 0).0[0], 255);
        assert_eq!(img.get_pixel(0, 2).0[0], 128);
        assert_eq!(img.get_pixel(2, 2).0[0], 0);
    }

    #[test]
    fn png_bytes_are_deterministic() {
        let vals: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let d = FieldDump::scalar(8, 8, &vals).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
        render_to_file(&d, 0, &a).unwrap();
        render_to_file(&d, 0, &b).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
}
