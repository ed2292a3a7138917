use thiserror::Error;

use super::{Image, Intrinsics};

#[derive(Debug, Error)]
pub enum PyramidError {
    #[error("image {width}x{height} too small for {levels} pyramid levels")]
    ImageTooSmall {
        width: usize,
        height: usize,
        levels: usize,
    },
}

/// Image pyramid for coarse-to-fine optimization. Level 0 is full
/// resolution; every level halves the dimensions and the intrinsics.
#[derive(Clone, Debug)]
pub struct Pyramid {
    levels: Vec<(Image, Intrinsics)>,
}

impl Pyramid {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, k: usize) -> &(Image, Intrinsics) {
        &self.levels[k]
    }

    pub fn image(&self, k: usize) -> &Image {
        &self.levels[k].0
    }

    pub fn intrinsics(&self, k: usize) -> &Intrinsics {
        &self.levels[k].1
    }
}

/// Build an `n_levels` pyramid by repeated 2x2 box-filter downsampling.
/// Requires both image dimensions to be at least `2^(n_levels-1)`.
pub fn build_pyramid(
    img: &Image,
    k: &Intrinsics,
    n_levels: usize,
) -> Result<Pyramid, PyramidError> {
    assert!(n_levels >= 1, "pyramid needs at least one level");
    let min_dim = 1usize << (n_levels - 1);
    if img.width() < min_dim || img.height() < min_dim {
        return Err(PyramidError::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            levels: n_levels,
        });
    }
    let mut levels = Vec::with_capacity(n_levels);
    levels.push((img.clone(), *k));
    for _ in 1..n_levels {
        let (prev_img, prev_k) = levels.last().unwrap();
        levels.push((downsample_box2(prev_img), prev_k.halved()));
    }
    Ok(Pyramid { levels })
}

/// 2x2 box-filter downsample; odd trailing rows/columns are dropped.
fn downsample_box2(img: &Image) -> Image {
    let w = img.width() / 2;
    let h = img.height() / 2;
    Image::from_fn(w, h, |x, y| {
        (img.get(2 * x, 2 * y)
            + img.get(2 * x + 1, 2 * y)
            + img.get(2 * x, 2 * y + 1)
            + img.get(2 * x + 1, 2 * y + 1))
            * 0.25
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{project, Pose};
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;

    fn k_for(img: &Image) -> Intrinsics {
        Intrinsics::new(
            100.0,
            100.0,
            img.width() as f64 / 2.0,
            img.height() as f64 / 2.0,
            img.width(),
            img.height(),
        )
    }

    #[test]
    fn single_level_equals_input() {
        let img = Image::from_fn(8, 6, |x, y| Vector3::repeat((x + y) as f64 / 20.0));
        let k = k_for(&img);
        let pyr = build_pyramid(&img, &k, 1).unwrap();
        assert_eq!(pyr.num_levels(), 1);
        assert_eq!(pyr.image(0), &img);
        assert_eq!(pyr.intrinsics(0), &k);
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = Image::constant(16, 16, Vector3::repeat(0.37));
        let pyr = build_pyramid(&img, &k_for(&img), 3).unwrap();
        for level in 0..3 {
            let im = pyr.image(level);
            for y in 0..im.height() {
                for x in 0..im.width() {
                    assert_abs_diff_eq!(im.get(x, y).x, 0.37, epsilon = 1e-15);
                }
            }
        }
    }

    // Oracle: hand-computed 2x2 box average of a checkerboard is 0.5.
    #[test]
    fn checkerboard_averages_to_half() {
        let img = Image::from_fn(4, 4, |x, y| Vector3::repeat(((x + y) % 2) as f64));
        let pyr = build_pyramid(&img, &k_for(&img), 2).unwrap();
        let l1 = pyr.image(1);
        assert_eq!((l1.width(), l1.height()), (2, 2));
        for y in 0..2 {
            for x in 0..2 {
                assert_abs_diff_eq!(l1.get(x, y).x, 0.5, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn too_small_image_is_rejected() {
        let img = Image::new(4, 4);
        assert!(build_pyramid(&img, &k_for(&img), 4).is_err());
    }

    #[test]
    fn level_projection_scales_by_half_per_level() {
        let img = Image::new(64, 48);
        let k = Intrinsics::new(80.0, 80.0, 32.0, 24.0, 64, 48);
        let pyr = build_pyramid(&img, &k, 3).unwrap();
        let pose = Pose::identity();
        let p = Vector3::new(0.3, -0.2, 2.0);
        let u0 = project(pyr.intrinsics(0), &pose, &p).unwrap();
        for level in 1..3 {
            let ul = project(pyr.intrinsics(level), &pose, &p).unwrap();
            let scale = (1usize << level) as f64;
            assert!((ul - u0 / scale).norm() < 0.5);
        }
    }
}
