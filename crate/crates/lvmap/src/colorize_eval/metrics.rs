use crate::geometry::{luma, Image};

/// PSNR reported for a zero-MSE (identical) image pair, dB.
pub const PSNR_CAP_DB: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

fn check_dims(a: &Image, b: &Image, mask: Option<&[bool]>) -> bool {
    a.width() == b.width()
        && a.height() == b.height()
        && mask.map_or(true, |m| m.len() == a.width() * a.height())
}

/// Peak signal-to-noise ratio over the masked RGB values (channels in
/// [0, 1]): `10·log10(1 / MSE)`, capped at [`PSNR_CAP_DB`] for identical
/// inputs. `None` for mismatched dimensions or an empty mask.
pub fn psnr(a: &Image, b: &Image, mask: Option<&[bool]>) -> Option<f64> {
    if !check_dims(a, b, mask) {
        return None;
    }
    let mut se = 0.0;
    let mut count = 0usize;
    for y in 0..a.height() {
        for x in 0..a.width() {
            if let Some(m) = mask {
                if !m[y * a.width() + x] {
                    continue;
                }
            }
            let d = a.get(x, y) - b.get(x, y);
            se += d.norm_squared();
            count += 3;
        }
    }
    if count == 0 {
        return None;
    }
    let mse = se / count as f64;
    if mse <= 0.0 {
        return Some(PSNR_CAP_DB);
    }
    Some((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// Single-scale SSIM on BT.601 luma with an 11x11 Gaussian window
/// (sigma 1.5), averaged over windows whose pixels are all covered by the
/// mask. `None` for mismatched dimensions or when no window qualifies.
pub fn ssim(a: &Image, b: &Image, mask: Option<&[bool]>) -> Option<f64> {
    if !check_dims(a, b, mask) {
        return None;
    }
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return None;
    }
    let la: Vec<f64> = (0..w * h).map(|i| luma(&a.get(i % w, i / w))).collect();
    let lb: Vec<f64> = (0..w * h).map(|i| luma(&b.get(i % w, i / w))).collect();

    // Normalized Gaussian window weights.
    let half = (SSIM_WINDOW / 2) as i64;
    let mut weights = [[0.0; SSIM_WINDOW]; SSIM_WINDOW];
    let mut wsum = 0.0;
    for dy in -half..=half {
        for dx in -half..=half {
            let g = (-((dx * dx + dy * dy) as f64) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            weights[(dy + half) as usize][(dx + half) as usize] = g;
            wsum += g;
        }
    }
    for row in weights.iter_mut() {
        for v in row.iter_mut() {
            *v /= wsum;
        }
    }

    let window_masked = |cx: usize, cy: usize| -> bool {
        match mask {
            None => true,
            Some(m) => {
                for dy in -half..=half {
                    for dx in -half..=half {
                        let x = (cx as i64 + dx) as usize;
                        let y = (cy as i64 + dy) as usize;
                        if !m[y * w + x] {
                            return false;
                        }
                    }
                }
                true
            }
        }
    };

    let mut total = 0.0;
    let mut windows = 0usize;
    for cy in half as usize..h - half as usize {
        for cx in half as usize..w - half as usize {
            if !window_masked(cx, cy) {
                continue;
            }
            let mut mu_a = 0.0;
            let mut mu_b = 0.0;
            for dy in -half..=half {
                for dx in -half..=half {
                    let wgt = weights[(dy + half) as usize][(dx + half) as usize];
                    let x = (cx as i64 + dx) as usize;
                    let y = (cy as i64 + dy) as usize;
                    mu_a += wgt * la[y * w + x];
                    mu_b += wgt * lb[y * w + x];
                }
            }
            let mut var_a = 0.0;
            let mut var_b = 0.0;
            let mut cov = 0.0;
            for dy in -half..=half {
                for dx in -half..=half {
                    let wgt = weights[(dy + half) as usize][(dx + half) as usize];
                    let x = (cx as i64 + dx) as usize;
                    let y = (cy as i64 + dy) as usize;
                    let da = la[y * w + x] - mu_a;
                    let db = lb[y * w + x] - mu_b;
                    var_a += wgt * da * da;
                    var_b += wgt * db * db;
                    cov += wgt * da * db;
                }
            }
            total += ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2));
            windows += 1;
        }
    }
    if windows == 0 {
        return None;
    }
    Some(total / windows as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;

    #[test]
    fn identical_images_hit_psnr_cap() {
        let a = Image::from_fn(32, 32, |x, y| Vector3::repeat((x + y) as f64 / 64.0));
        assert_eq!(psnr(&a, &a, None).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn constant_difference_closed_forms() {
        let a = Image::constant(32, 32, Vector3::repeat(0.0));
        let b = Image::constant(32, 32, Vector3::repeat(0.1));
        // MSE = 0.01 -> 20 dB.
        assert_abs_diff_eq!(psnr(&a, &b, None).unwrap(), 20.0, epsilon = 1e-9);
        let c = Image::constant(32, 32, Vector3::repeat(0.5));
        // MSE = 0.25 -> 10*log10(4).
        assert_abs_diff_eq!(
            psnr(&a, &c, None).unwrap(),
            10.0 * 4.0_f64.log10(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn empty_mask_is_error() {
        let a = Image::constant(16, 16, Vector3::repeat(0.5));
        let mask = vec![false; 16 * 16];
        assert!(psnr(&a, &a, Some(&mask)).is_none());
    }

    #[test]
    fn ssim_of_identical_images_is_one() {
        let a = Image::from_fn(32, 32, |x, y| {
            Vector3::repeat(0.5 + 0.3 * ((x * y) as f64 * 0.01).sin())
        });
        assert_abs_diff_eq!(ssim(&a, &a, None).unwrap(), 1.0, epsilon = 1e-12);
    }

    // Oracle: closed-form SSIM of two constant images — the structure
    // term is exactly 1, leaving only the luminance ratio.
    #[test]
    fn ssim_constant_images_closed_form() {
        let a = Image::constant(32, 32, Vector3::repeat(0.2));
        let b = Image::constant(32, 32, Vector3::repeat(0.8));
        let expected = (2.0 * 0.2 * 0.8 + SSIM_C1) / (0.2 * 0.2 + 0.8 * 0.8 + SSIM_C1);
        assert_abs_diff_eq!(ssim(&a, &b, None).unwrap(), expected, epsilon = 1e-12);
    }

    // Oracle: direct windowed computation on an inverted textured image
    // gives strongly negative structure correlation.
    #[test]
    fn ssim_of_inverted_texture_is_low() {
        let a = Image::from_fn(48, 48, |x, y| {
            Vector3::repeat(0.5 + 0.4 * ((x as f64) * 0.9).sin() * ((y as f64) * 0.8).cos())
        });
        let b = Image::from_fn(48, 48, |x, y| {
            let v = a.get(x, y);
            Vector3::repeat(1.0) - v
        });
        let s = ssim(&a, &b, None).unwrap();
        assert!(s < 0.2, "inverted SSIM {s} not < 0.2");
    }

    #[test]
    fn metrics_are_symmetric() {
        let a = Image::from_fn(32, 32, |x, y| {
            Vector3::repeat(0.4 + 0.2 * ((x + 2 * y) as f64 * 0.13).sin())
        });
        let b = Image::from_fn(32, 32, |x, y| {
            Vector3::repeat(0.5 + 0.25 * ((2 * x + y) as f64 * 0.11).cos())
        });
        assert_abs_diff_eq!(
            psnr(&a, &b, None).unwrap(),
            psnr(&b, &a, None).unwrap(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            ssim(&a, &b, None).unwrap(),
            ssim(&b, &a, None).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn masking_restricts_psnr_to_covered_pixels() {
        let a = Image::constant(32, 32, Vector3::repeat(0.0));
        let mut b = Image::constant(32, 32, Vector3::repeat(0.0));
        // Corrupt the right half; mask only the left half.
        for y in 0..32 {
            for x in 16..32 {
                b.set(x, y, Vector3::repeat(1.0));
            }
        }
        let mask: Vec<bool> = (0..32 * 32).map(|i| (i % 32) < 16).collect();
        assert_eq!(psnr(&a, &b, Some(&mask)).unwrap(), PSNR_CAP_DB);
        assert!(psnr(&a, &b, None).unwrap() < 10.0);
    }
}
