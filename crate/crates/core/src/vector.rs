use std::ops::Deref;

use crate::CoreError;

/// Fixed-dimension real vector. Every element is finite; NaN/Inf are
/// rejected at construction so the store never holds them.
///
/// Storage is 32-bit; reductions over elements accumulate in 64-bit.
#[derive(Clone, PartialEq, Debug)]
pub struct Vector {
    values: Vec<f32>,
}

impl Vector {
    pub fn new(values: Vec<f32>) -> Result<Self, CoreError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("vector"));
        }
        Ok(Vector { values })
    }

    pub fn zeros(dim: usize) -> Self {
        Vector {
            values: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    /// Squared L2 norm, accumulated in f64.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|&v| (v as f64) * (v as f64)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
}

impl Deref for Vector {
    type Target = [f32];

    fn deref(&self) -> &[f32] {
        &self.values
    }
}

fn check_dims(a: &Vector, b: &Vector) -> Result<(), CoreError> {
    if a.dim() != b.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// Cosine similarity with f64 accumulation. A zero-norm operand yields 0
/// ("no similarity"); degenerate embeddings occur at initialization and
/// must not error.
pub fn cosine(a: &Vector, b: &Vector) -> Result<f32, CoreError> {
    check_dims(a, b)?;
    let mut dot = 0f64;
    let mut na = 0f64;
    let mut nb = 0f64;
    for (&x, &y) in a.iter().zip(b.iter()) {
        dot += x as f64 * y as f64;
        na += x as f64 * x as f64;
        nb += y as f64 * y as f64;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())) as f32)
}

/// Squared euclidean distance with f64 accumulation.
pub fn l2sq(a: &Vector, b: &Vector) -> Result<f32, CoreError> {
    check_dims(a, b)?;
    let mut acc = 0f64;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let d = x as f64 - y as f64;
        acc += d * d;
    }
    Ok(acc as f32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert_eq!(
            Vector::new(vec![1.0, f32::NAN]),
            Err(CoreError::NonFinite("vector"))
        );
        assert!(Vector::new(vec![f32::INFINITY]).is_err());
    }

    #[test]
    fn cosine_self_similarity_is_one() {
        let x = Vector::new(vec![0.3, -1.2, 4.0]).unwrap();
        assert!((cosine(&x, &x).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cosine_orthogonal_is_zero() {
        let a = Vector::new(vec![1.0, 0.0]).unwrap();
        let b = Vector::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(cosine(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn cosine_zero_norm_is_zero() {
        let z = Vector::zeros(3);
        let x = Vector::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(cosine(&z, &x).unwrap(), 0.0);
        assert_eq!(cosine(&x, &z).unwrap(), 0.0);
    }

    #[test]
    fn l2sq_three_four_five() {
        let a = Vector::new(vec![0.0, 0.0]).unwrap();
        let b = Vector::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(l2sq(&a, &b).unwrap(), 25.0);
    }

    #[test]
    fn dimension_mismatch_errors() {
        let a = Vector::zeros(2);
        let b = Vector::zeros(3);
        assert!(matches!(
            cosine(&a, &b),
            Err(CoreError::DimensionMismatch { expected: 2, got: 3 })
        ));
        assert!(l2sq(&a, &b).is_err());
    }
}
