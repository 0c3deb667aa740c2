//! Orthonormal frames of tangent hyperplanes θ⊥ and the sphere charts built on them.

use nalgebra::{DMatrix, DVector};

/// Orthonormal basis of the hyperplane orthogonal to a unit vector.
///
/// The standard frame applies Gram–Schmidt to the coordinate axes ordered by
/// increasing |⟨e_i, θ⟩| (ties broken by index), so it is a deterministic
/// function of θ alone.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    normal: DVector<f64>,
    basis: Vec<DVector<f64>>,
}

impl TangentFrame {
    pub fn new(normal: &DVector<f64>) -> Self {
        let n = normal.len();
        let unit = normal.normalize();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            unit[a]
                .abs()
                .partial_cmp(&unit[b].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n - 1);
        for &axis in order.iter() {
            if basis.len() == n - 1 {
                break;
            }
            let mut v = DVector::zeros(n);
            v[axis] = 1.0;
            v -= &unit * unit.dot(&v);
            for b in &basis {
                v -= b * b.dot(&v);
            }
            let norm = v.norm();
            if norm > 1e-8 {
                basis.push(v / norm);
            }
        }
        debug_assert_eq!(basis.len(), n - 1);
        Self { normal: unit, basis }
    }

    /// The same hyperplane with the basis order reversed; in 2D the single
    /// vector is negated instead.
    pub fn swapped(&self) -> Self {
        let basis = if self.basis.len() == 1 {
            vec![-&self.basis[0]]
        } else {
            self.basis.iter().rev().cloned().collect()
        };
        Self { normal: self.normal.clone(), basis }
    }

    pub fn normal(&self) -> &DVector<f64> {
        &self.normal
    }

    pub fn basis(&self) -> &[DVector<f64>] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// Map hyperplane coordinates into ℝⁿ.
    pub fn embed(&self, coords: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for (c, b) in coords.iter().zip(&self.basis) {
            out += b * *c;
        }
        out
    }

    /// Coordinates of the orthogonal projection of `v` onto the hyperplane.
    pub fn coords(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.basis.len(), self.basis.iter().map(|b| b.dot(v)))
    }

    /// n × (n−1) matrix whose columns are the basis vectors.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.basis)
    }

    /// Point of the unit sphere in the tangent chart at the normal:
    /// normalize(θ + Σ uᵢ eᵢ).
    pub fn chart_point(&self, u: &DVector<f64>) -> DVector<f64> {
        (&self.normal + self.embed(u)).normalize()
    }
}

/// Signed determinant of an n×n matrix assembled from columns.
pub fn det_columns(cols: &[DVector<f64>]) -> f64 {
    DMatrix::from_columns(cols).determinant()
}

/// ‖MᵀJM − J‖_∞ for a 2n×2n matrix, J = [[0, I], [−I, 0]].
pub fn symplectic_residual(m: &DMatrix<f64>) -> f64 {
    let dim = m.nrows();
    let n = dim / 2;
    let mut j = DMatrix::zeros(dim, dim);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    let r = m.transpose() * &j * m - j;
    r.amax()
}

/// Signed angle from `from` to `to` in the plane (2D only).
pub fn planar_angle(from: &DVector<f64>, to: &DVector<f64>) -> f64 {
    let cross = from[0] * to[1] - from[1] * to[0];
    cross.atan2(from.dot(to))
}

/// Rotate a 2D vector counter-clockwise by `angle`.
pub fn rotate2(v: &DVector<f64>, angle: f64) -> DVector<f64> {
    let (s, c) = angle.sin_cos();
    DVector::from_vec(vec![c * v[0] - s * v[1], s * v[0] + c * v[1]])
}
