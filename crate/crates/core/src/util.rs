use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`softplus`] for positive inputs.
pub(crate) fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

/// Rounds to the nearest value representable as `f32`, so that parameters
/// survive a 32-bit checkpoint round trip unchanged.
#[inline]
pub(crate) fn round_f32(x: f64) -> f64 {
    x as f32 as f64
}

/// Derives an independent child seed from a parent seed and a stream tag.
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    crate::noise::mix64(parent ^ crate::noise::mix64(stream.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}
