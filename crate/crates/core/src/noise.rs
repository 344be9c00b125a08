//! Seeded lattice value noise used for terrain height fields and textures.

/// SplitMix64 finalizer.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn lattice(seed: u64, ix: i64, iy: i64) -> f64 {
    let h = mix64(seed ^ mix64((ix as u64).wrapping_mul(0x51_7CC1_B727_220A) ^ mix64(iy as u64)));
    // 53 high bits -> [0, 1) -> [-1, 1)
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

#[inline]
fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Raw bilinear value noise in [-1, 1] with unit lattice spacing.
fn value_noise_raw(seed: u64, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let (ix, iy) = (x0 as i64, y0 as i64);
    let tx = smoothstep(x - x0);
    let ty = smoothstep(y - y0);
    let v00 = lattice(seed, ix, iy);
    let v10 = lattice(seed, ix + 1, iy);
    let v01 = lattice(seed, ix, iy + 1);
    let v11 = lattice(seed, ix + 1, iy + 1);
    let a = v00 + (v10 - v00) * tx;
    let b = v01 + (v11 - v01) * tx;
    a + (b - a) * ty
}

/// Empirical standard deviation of [`value_noise_raw`] over the plane.
const RAW_STD: f64 = 0.4284;

/// Value noise rescaled to approximately unit standard deviation.
pub(crate) fn unit_noise(seed: u64, x: f64, y: f64) -> f64 {
    value_noise_raw(seed, x, y) / RAW_STD
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_seed_sensitive() {
        assert_eq!(unit_noise(3, 1.25, -7.5), unit_noise(3, 1.25, -7.5));
        assert_ne!(unit_noise(3, 1.25, -7.5), unit_noise(4, 1.25, -7.5));
    }

    #[test]
    fn unit_noise_has_roughly_unit_std() {
        let mut sum = 0.0;
        let mut sq = 0.0;
        let n = 200_000;
        for k in 0..n {
            let x = (k % 500) as f64 * 0.137;
            let y = (k / 500) as f64 * 0.291;
            let v = unit_noise(11, x, y);
            sum += v;
            sq += v * v;
        }
        let mean = sum / n as f64;
        let std = (sq / n as f64 - mean * mean).sqrt();
        assert!((std - 1.0).abs() < 0.05, "std = {std}");
    }
}
