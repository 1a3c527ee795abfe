//! Vector primitives for webpage and brand encodings: normalization,
//! weighted modality combination, dot products, and the trainable linear
//! projection heads that stand in for encoder fine-tuning.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Norms below this threshold are treated as zero vectors.
pub const ZERO_NORM_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MathError {
    #[error("vector norm below {ZERO_NORM_EPS:e}, cannot normalize")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vector has no components")]
    Empty,
    #[error("non-finite component at index {0}")]
    NonFinite(usize),
}

/// Dense real vector. Held as f64 internally; file formats store f32.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(components: Vec<f64>) -> Result<Self, MathError> {
        if components.is_empty() {
            return Err(MathError::Empty);
        }
        if let Some(i) = components.iter().position(|c| !c.is_finite()) {
            return Err(MathError::NonFinite(i));
        }
        Ok(Vector(components))
    }

    pub fn from_f32(components: &[f32]) -> Result<Self, MathError> {
        Self::new(components.iter().map(|&c| f64::from(c)).collect())
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.0.iter().map(|&c| c as f32).collect()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Dot product. Both operands must share a dimension; callers validate
    /// dimensions at load/build boundaries.
    pub fn dot(&self, other: &Vector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dot product dimension mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&self, factor: f64) -> Vector {
        Vector(self.0.iter().map(|c| c * factor).collect())
    }

    pub fn add(&self, other: &Vector) -> Result<Vector, MathError> {
        if self.dim() != other.dim() {
            return Err(MathError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Vector(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }
}

impl From<Vec<f64>> for Vector {
    fn from(components: Vec<f64>) -> Self {
        Vector(components)
    }
}

/// v / ||v||2. The output norm is within 1e-9 of 1.
pub fn normalize(v: &Vector) -> Result<Vector, MathError> {
    let norm = v.norm();
    if norm < ZERO_NORM_EPS {
        return Err(MathError::ZeroVector);
    }
    Ok(v.scale(1.0 / norm))
}

/// normalize(c_t * text + c_i * image); the image term is omitted when the
/// webpage or brand has no logo.
pub fn weighted_combine(
    text: &Vector,
    image: Option<&Vector>,
    c_t: f64,
    c_i: f64,
) -> Result<Vector, MathError> {
    let combined = match image {
        Some(image) => text.scale(c_t).add(&image.scale(c_i))?,
        None => text.scale(c_t),
    };
    normalize(&combined)
}

/// Weight constants for the text and image terms of the webpage (`c_w_*`)
/// and brand (`c_b_*`) encodings. All default to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalityWeights {
    pub c_w_t: f64,
    pub c_w_i: f64,
    pub c_b_t: f64,
    pub c_b_i: f64,
}

impl Default for ModalityWeights {
    fn default() -> Self {
        ModalityWeights {
            c_w_t: 1.0,
            c_w_i: 1.0,
            c_b_t: 1.0,
            c_b_i: 1.0,
        }
    }
}

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        SquareMatrix { dim, data }
    }

    pub fn zeros(dim: usize) -> Self {
        SquareMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, MathError> {
        let dim = rows.len();
        if dim == 0 {
            return Err(MathError::Empty);
        }
        let mut data = Vec::with_capacity(dim * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(MathError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        if let Some(i) = data.iter().position(|c| !c.is_finite()) {
            return Err(MathError::NonFinite(i));
        }
        Ok(SquareMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn mul_vec(&self, v: &Vector) -> Result<Vector, MathError> {
        if v.dim() != self.dim {
            return Err(MathError::DimensionMismatch {
                expected: self.dim,
                got: v.dim(),
            });
        }
        let mut out = vec![0.0; self.dim];
        for (row, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for col in 0..self.dim {
                acc += self.data[row * self.dim + col] * v.components()[col];
            }
            *slot = acc;
        }
        Ok(Vector(out))
    }

    /// Accumulate the outer product `scale * a * b^T` in place.
    pub fn add_outer(&mut self, a: &Vector, b: &Vector, scale: f64) {
        debug_assert_eq!(a.dim(), self.dim);
        debug_assert_eq!(b.dim(), self.dim);
        for row in 0..self.dim {
            let ar = scale * a.components()[row];
            for col in 0..self.dim {
                self.data[row * self.dim + col] += ar * b.components()[col];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Text,
    Image,
}

/// Trainable per-modality linear maps applied to base embeddings before
/// combination. An identity head leaves the base embeddings untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionHead {
    pub text_matrix: SquareMatrix,
    pub image_matrix: SquareMatrix,
}

impl ProjectionHead {
    pub fn identity(dim: usize) -> Self {
        ProjectionHead {
            text_matrix: SquareMatrix::identity(dim),
            image_matrix: SquareMatrix::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.text_matrix.dim()
    }

    pub fn matrix(&self, modality: Modality) -> &SquareMatrix {
        match modality {
            Modality::Text => &self.text_matrix,
            Modality::Image => &self.image_matrix,
        }
    }
}

/// Matrix-vector product with the modality's matrix.
pub fn project(head: &ProjectionHead, v: &Vector, modality: Modality) -> Result<Vector, MathError> {
    head.matrix(modality).mul_vec(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vec2(a: f64, b: f64) -> Vector {
        Vector::new(vec![a, b]).unwrap()
    }

    #[test]
    fn normalize_scales_to_unit_norm() {
        let v = normalize(&vec2(3.0, 4.0)).unwrap();
        assert!((v.components()[0] - 0.6).abs() < 1e-12);
        assert!((v.components()[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn normalize_keeps_unit_vector() {
        let v = normalize(&vec2(1.0, 0.0)).unwrap();
        assert_eq!(v.components(), &[1.0, 0.0]);
    }

    #[test]
    fn normalize_rejects_zero_vector() {
        assert_eq!(normalize(&vec2(0.0, 0.0)), Err(MathError::ZeroVector));
    }

    #[test]
    fn weighted_combine_both_modalities() {
        let out = weighted_combine(&vec2(1.0, 0.0), Some(&vec2(0.0, 1.0)), 1.0, 1.0).unwrap();
        assert!((out.components()[0] - 0.70711).abs() < 1e-5);
        assert!((out.components()[1] - 0.70711).abs() < 1e-5);
    }

    #[test]
    fn weighted_combine_without_image() {
        let out = weighted_combine(&vec2(2.0, 0.0), None, 1.0, 1.0).unwrap();
        assert_eq!(out.components(), &[1.0, 0.0]);
    }

    #[test]
    fn weighted_combine_exact_cancellation() {
        let out = weighted_combine(&vec2(1.0, 0.0), Some(&vec2(-1.0, 0.0)), 1.0, 1.0);
        assert_eq!(out, Err(MathError::ZeroVector));
    }

    #[test]
    fn weighted_combine_dimension_mismatch() {
        let three = Vector::new(vec![1.0, 0.0, 0.0]).unwrap();
        let out = weighted_combine(&vec2(1.0, 0.0), Some(&three), 1.0, 1.0);
        assert!(matches!(out, Err(MathError::DimensionMismatch { .. })));
    }

    #[test]
    fn project_identity_returns_input_exactly() {
        let head = ProjectionHead::identity(3);
        let v = Vector::new(vec![0.3, -1.7, 2.5]).unwrap();
        assert_eq!(project(&head, &v, Modality::Text).unwrap(), v);
        assert_eq!(project(&head, &v, Modality::Image).unwrap(), v);
    }

    #[test]
    fn project_scalar_matrix() {
        let mut head = ProjectionHead::identity(2);
        head.text_matrix = SquareMatrix::from_rows(vec![vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let out = project(&head, &vec2(1.0, 2.0), Modality::Text).unwrap();
        assert_eq!(out.components(), &[2.0, 4.0]);
    }

    #[test]
    fn project_matches_brute_force_oracle() {
        // Independent triple-loop multiply over a fixed random 4x4 head.
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..4).map(|_| next()).collect()).collect();
        let v = Vector::new((0..4).map(|_| next()).collect()).unwrap();
        let head = ProjectionHead {
            text_matrix: SquareMatrix::from_rows(rows.clone()).unwrap(),
            image_matrix: SquareMatrix::identity(4),
        };
        let got = project(&head, &v, Modality::Text).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let expected: f64 = row.iter().zip(v.components()).map(|(m, x)| m * x).sum();
            assert!((got.components()[i] - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn vector_rejects_non_finite() {
        assert_eq!(
            Vector::new(vec![1.0, f64::NAN]),
            Err(MathError::NonFinite(1))
        );
        assert_eq!(Vector::new(vec![]), Err(MathError::Empty));
    }

    proptest! {
        #[test]
        fn normalize_output_is_unit_norm(components in proptest::collection::vec(-1e3f64..1e3, 1..24)) {
            let v = Vector::new(components).unwrap();
            if v.norm() > ZERO_NORM_EPS {
                let n = normalize(&v).unwrap();
                prop_assert!((n.norm() - 1.0).abs() <= 1e-9);
            }
        }

        #[test]
        fn weighted_combine_invariant_under_common_rescale(
            t in proptest::collection::vec(-10.0f64..10.0, 4),
            i in proptest::collection::vec(-10.0f64..10.0, 4),
            c_t in 0.1f64..4.0,
            c_i in 0.1f64..4.0,
            factor in 0.1f64..50.0,
        ) {
            let text = Vector::new(t).unwrap();
            let image = Vector::new(i).unwrap();
            let a = weighted_combine(&text, Some(&image), c_t, c_i);
            let b = weighted_combine(&text, Some(&image), c_t * factor, c_i * factor);
            if let (Ok(a), Ok(b)) = (a, b) {
                for (x, y) in a.components().iter().zip(b.components()) {
                    prop_assert!((x - y).abs() <= 1e-9);
                }
            }
        }
    }
}
