//! Fixed colormap and PNG encoding for slice images.

use std::io::Cursor;

use image::{ImageFormat, Rgb, RgbImage};

use crate::error::{Error, Result};

/// Pinned control points `(t, rgb)` of the colormap on `[0, 1]`.
pub const CONTROL_POINTS: [(f64, [u8; 3]); 5] = [
    (0.0, [12, 16, 48]),
    (0.25, [38, 86, 156]),
    (0.5, [86, 168, 168]),
    (0.75, [232, 200, 92]),
    (1.0, [250, 248, 232]),
];

/// Colour for cells whose orbit verdict is undetermined.
pub const UNDETERMINED: [u8; 3] = [200, 40, 160];

/// Piecewise linear interpolation of the control points, clamped.
pub fn colormap(t: f64) -> [u8; 3] {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    for w in CONTROL_POINTS.windows(2) {
        let ((t0, c0), (t1, c1)) = (w[0], w[1]);
        if t <= t1 {
            let s = (t - t0) / (t1 - t0);
            let mix = |a: u8, b: u8| (a as f64 + s * (b as f64 - a as f64)).round() as u8;
            return [mix(c0[0], c1[0]), mix(c0[1], c1[1]), mix(c0[2], c1[2])];
        }
    }
    CONTROL_POINTS[CONTROL_POINTS.len() - 1].1
}

/// Maps a Green value in `[0, inf)` to `[0, 1)`.
pub fn green_scale(g: f64) -> f64 {
    1.0 - (-g.max(0.0)).exp()
}

/// Encodes row-major pixels (row 0 at the top) as PNG bytes.
pub fn encode_png(width: usize, height: usize, pixels: &[[u8; 3]]) -> Result<Vec<u8>> {
    if width == 0 || height == 0 || pixels.len() != width * height {
        return Err(Error::InvalidParameter(format!("image of {width}x{height} with {} pixels", pixels.len())));
    }
    let mut img = RgbImage::new(width as u32, height as u32);
    for (i, px) in pixels.iter().enumerate() {
        img.put_pixel((i % width) as u32, (i / width) as u32, Rgb(*px));
    }
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::EmptyResult(format!("png encoding failed: {e}")))?;
    Ok(out.into_inner())
}
