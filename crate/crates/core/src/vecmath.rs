//! Small dense-vector helpers. Storage is 32-bit; every accumulation here
//! runs in 64-bit.

pub fn dot_f32(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x as f64) * (*y as f64))
        .sum()
}

pub fn dot_f64(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dot_mixed(a: &[f64], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * (*y as f64)).sum()
}

pub fn norm_f64(a: &[f64]) -> f64 {
    dot_f64(a, a).sqrt()
}

/// Scales `v` to unit norm in place and returns the pre-normalization
/// norm; callers reject degenerate inputs first.
pub fn normalize_f64(v: &mut [f64]) -> f64 {
    let norm = norm_f64(v);
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

pub fn widen(row: &[f32]) -> Vec<f64> {
    row.iter().map(|v| *v as f64).collect()
}
