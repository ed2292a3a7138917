use nalgebra::{Vector2, Vector3};

/// RGB color with channels in `[0, 1]`.
pub type Rgb = Vector3<f64>;

/// Row-major RGB image with floating-point channels in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![[0.0; 3]; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Self {
        let mut img = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                img.set(x, y, f(x, y));
            }
        }
        img
    }

    pub fn constant(width: usize, height: usize, value: Rgb) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let p = self.pixels[y * self.width + x];
        Vector3::new(p[0], p[1], p[2])
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: Rgb) {
        self.pixels[y * self.width + x] = [value.x, value.y, value.z];
    }

    /// Grayscale as the plain mean of the RGB channels.
    #[inline]
    pub fn gray(&self, x: usize, y: usize) -> f64 {
        let p = self.pixels[y * self.width + x];
        (p[0] + p[1] + p[2]) / 3.0
    }

    pub fn is_normalized(&self) -> bool {
        self.pixels
            .iter()
            .flatten()
            .all(|c| c.is_finite() && (0.0..=1.0).contains(c))
    }

    /// Standard 4-neighbor bilinear sample. `None` outside
    /// `[0, width-1] x [0, height-1]`; exact pixel value at integer
    /// coordinates.
    pub fn sample_bilinear(&self, u: &Vector2<f64>) -> Option<Rgb> {
        self.sample_bilinear_with_gradient(u).map(|(c, _, _)| c)
    }

    /// Bilinear sample plus the analytic gradient of the interpolant,
    /// `(color, d/du, d/dv)`. The gradient is the exact derivative of the
    /// bilinear surface within the containing cell, which is what a
    /// finite-difference probe of the sampled value sees.
    pub fn sample_bilinear_with_gradient(&self, u: &Vector2<f64>) -> Option<(Rgb, Rgb, Rgb)> {
        let (w, h) = (self.width as f64, self.height as f64);
        if !(u.x >= 0.0 && u.x <= w - 1.0 && u.y >= 0.0 && u.y <= h - 1.0) {
            return None;
        }
        // Clamp the cell index so coordinates exactly on the far border
        // still have a valid 2x2 neighborhood.
        let x0 = (u.x.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (u.y.floor() as usize).min(self.height.saturating_sub(2));
        // Degenerate 1-wide/1-tall images: fall back to nearest pixel.
        if self.width < 2 || self.height < 2 {
            let x = u.x.round() as usize;
            let y = u.y.round() as usize;
            return Some((self.get(x, y), Vector3::zeros(), Vector3::zeros()));
        }
        let fx = u.x - x0 as f64;
        let fy = u.y - y0 as f64;
        let c00 = self.get(x0, y0);
        let c10 = self.get(x0 + 1, y0);
        let c01 = self.get(x0, y0 + 1);
        let c11 = self.get(x0 + 1, y0 + 1);
        let top = c00 * (1.0 - fx) + c10 * fx;
        let bottom = c01 * (1.0 - fx) + c11 * fx;
        let color = top * (1.0 - fy) + bottom * fy;
        let ddu = (c10 - c00) * (1.0 - fy) + (c11 - c01) * fy;
        let ddv = bottom - top;
        Some((color, ddu, ddv))
    }
}

/// BT.601 luma of an RGB color.
pub(crate) fn luma(c: &Rgb) -> f64 {
    0.299 * c.x + 0.587 * c.y + 0.114 * c.z
}
