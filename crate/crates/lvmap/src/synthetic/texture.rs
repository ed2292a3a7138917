use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Procedural surface textures, evaluated in rectangle coordinates
/// (meters along the two edges). Analytic, asset-free and deterministic.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Texture {
    Constant {
        color: [f64; 3],
    },
    /// Square checkerboard with the given period in meters.
    Checker {
        period: f64,
        color_a: [f64; 3],
        color_b: [f64; 3],
    },
    /// Linear ramp: `base + grad_u * s + grad_v * t`.
    Ramp {
        base: [f64; 3],
        grad_u: [f64; 3],
        grad_v: [f64; 3],
    },
    /// Smooth seeded value noise: lattice values hashed from the cell
    /// index, blended with a C1 smoothstep. `cell` is the lattice pitch
    /// in meters; output is `base ± amplitude` per channel.
    ValueNoise {
        cell: f64,
        seed: u64,
        base: [f64; 3],
        amplitude: f64,
    },
}

impl Texture {
    pub fn albedo(&self, s: f64, t: f64) -> Vector3<f64> {
        let c = match self {
            Texture::Constant { color } => Vector3::from(*color),
            Texture::Checker {
                period,
                color_a,
                color_b,
            } => {
                let i = (s / period).floor() as i64 + (t / period).floor() as i64;
                if i.rem_euclid(2) == 0 {
                    Vector3::from(*color_a)
                } else {
                    Vector3::from(*color_b)
                }
            }
            Texture::Ramp {
                base,
                grad_u,
                grad_v,
            } => Vector3::from(*base) + Vector3::from(*grad_u) * s + Vector3::from(*grad_v) * t,
            Texture::ValueNoise {
                cell,
                seed,
                base,
                amplitude,
            } => {
                let x = s / cell;
                let y = t / cell;
                let x0 = x.floor();
                let y0 = y.floor();
                let fx = smoothstep(x - x0);
                let fy = smoothstep(y - y0);
                let (ix, iy) = (x0 as i64, y0 as i64);
                let mut out = Vector3::zeros();
                for ch in 0..3 {
                    let v00 = lattice(ix, iy, *seed, ch);
                    let v10 = lattice(ix + 1, iy, *seed, ch);
                    let v01 = lattice(ix, iy + 1, *seed, ch);
                    let v11 = lattice(ix + 1, iy + 1, *seed, ch);
                    let v = (v00 * (1.0 - fx) + v10 * fx) * (1.0 - fy)
                        + (v01 * (1.0 - fx) + v11 * fx) * fy;
                    out[ch] = base[ch] + amplitude * (2.0 * v - 1.0);
                }
                out
            }
        };
        Vector3::new(c.x.clamp(0.0, 1.0), c.y.clamp(0.0, 1.0), c.z.clamp(0.0, 1.0))
    }
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Deterministic lattice value in [0, 1) from integer coordinates
/// (splitmix64-style mixing).
fn lattice(ix: i64, iy: i64, seed: u64, channel: usize) -> f64 {
    let mut z = (ix as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((iy as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(seed.wrapping_mul(0x94D0_49BB_1331_11EB))
        .wrapping_add(channel as u64);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}
