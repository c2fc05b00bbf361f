//! Orthonormal k-frames spanning K-linear subspaces.
//!
//! A [`Frame`] is the search variable of the Grassmannian max-min problem
//! behind `δ^(k)`: an orthonormal set of columns spanning a K-linear subspace
//! `V` that contains a prescribed direction (stored first). Over the complex
//! field the real columns come in `(g, Jg)` pairs so the span is J-invariant,
//! i.e. a genuine complex subspace.

use nalgebra::DVector;
use rand::Rng;

use crate::domains::ScalarField;
use crate::error::{Error, Result};
use crate::linalg;

const GRAM_TOL: f64 = 1e-10;
const J_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct Frame {
    field: ScalarField,
    /// K-dimension of the span.
    k: usize,
    /// Real orthonormal columns; for a complex frame these are
    /// `(g_1, Jg_1, ..., g_k, Jg_k)`.
    columns: Vec<DVector<f64>>,
}

impl Frame {
    /// Build a frame from K-generators. Generators are orthonormalized in
    /// order; for complex frames each generator contributes a `(g, Jg)` pair.
    /// The first generator's direction is preserved (only normalized).
    pub fn from_generators(field: ScalarField, generators: &[DVector<f64>]) -> Result<Frame> {
        if generators.is_empty() {
            return Err(Error::InvalidInput(
                "frame needs at least one generator".into(),
            ));
        }
        let dim = generators[0].len();
        let mut columns: Vec<DVector<f64>> = Vec::new();
        for g in generators {
            if g.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: g.len(),
                });
            }
            let w = linalg::orthonormal_complement_step(g, &columns).ok_or_else(|| {
                Error::InvalidInput("frame generators are linearly dependent".into())
            })?;
            match field {
                ScalarField::Real => columns.push(w),
                ScalarField::Complex => {
                    let jw = field.complex_structure(&w)?;
                    columns.push(w);
                    columns.push(jw);
                }
            }
        }
        let frame = Frame {
            field,
            k: generators.len(),
            columns,
        };
        frame.validate()?;
        Ok(frame)
    }

    /// Frame of K-dimension `k` containing direction `v` (stored first),
    /// completed with the given candidate generators and then coordinate
    /// axes as needed.
    pub fn containing(
        field: ScalarField,
        v: &DVector<f64>,
        k: usize,
        completion: &[DVector<f64>],
    ) -> Result<Frame> {
        if v.norm() == 0.0 {
            return Err(Error::ZeroDirection);
        }
        let dim = v.len();
        let mut generators = vec![v.clone()];
        let mut real_cols = real_columns_of(field, &generators)?;
        let mut pool: Vec<DVector<f64>> = completion.to_vec();
        for i in 0..dim {
            pool.push(DVector::from_fn(dim, |j, _| if j == i { 1.0 } else { 0.0 }));
        }
        for cand in pool {
            if generators.len() == k {
                break;
            }
            if let Some(w) = linalg::orthonormal_complement_step(&cand, &real_cols) {
                generators.push(w.clone());
                real_cols.push(w.clone());
                if field == ScalarField::Complex {
                    real_cols.push(field.complex_structure(&w)?);
                }
            }
        }
        if generators.len() < k {
            return Err(Error::KOutOfRange {
                k,
                max: generators.len(),
            });
        }
        Frame::from_generators(field, &generators)
    }

    /// Random frame containing `v`, drawn from the caller's RNG.
    pub fn random_containing(
        field: ScalarField,
        v: &DVector<f64>,
        k: usize,
        rng: &mut impl Rng,
    ) -> Result<Frame> {
        let dim = v.len();
        let completion: Vec<DVector<f64>> = (0..k.saturating_sub(1) + 2)
            .map(|_| linalg::random_unit_vector(dim, rng))
            .collect();
        Frame::containing(field, v, k, &completion)
    }

    /// The 1-dimensional frame through `v`.
    pub fn line(field: ScalarField, v: &DVector<f64>) -> Result<Frame> {
        Frame::from_generators(field, std::slice::from_ref(v))
    }

    /// The full ambient frame (k = d).
    pub fn full(field: ScalarField, kdim: usize) -> Result<Frame> {
        let real_dim = kdim * field.real_dim_factor();
        let generators: Vec<DVector<f64>> = (0..kdim)
            .map(|i| {
                let idx = i * field.real_dim_factor();
                DVector::from_fn(real_dim, |j, _| if j == idx { 1.0 } else { 0.0 })
            })
            .collect();
        Frame::from_generators(field, &generators)
    }

    pub fn field(&self) -> ScalarField {
        self.field
    }

    /// K-dimension of the spanned subspace.
    pub fn dim_k(&self) -> usize {
        self.k
    }

    /// Real dimension of the spanned subspace.
    pub fn dim_real(&self) -> usize {
        self.columns.len()
    }

    pub fn ambient_real_dim(&self) -> usize {
        self.columns[0].len()
    }

    pub fn columns(&self) -> &[DVector<f64>] {
        &self.columns
    }

    /// K-generators: all columns for real frames, every first of a J-pair for
    /// complex ones.
    pub fn generators(&self) -> Vec<DVector<f64>> {
        match self.field {
            ScalarField::Real => self.columns.clone(),
            ScalarField::Complex => self.columns.iter().step_by(2).cloned().collect(),
        }
    }

    /// Orthogonal projection of `w` onto the span.
    pub fn project(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(w.len());
        for c in &self.columns {
            out += c * c.dot(w);
        }
        out
    }

    /// Map a coefficient vector (length = real span dimension) to the
    /// ambient vector it represents.
    pub fn from_coefficients(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.ambient_real_dim());
        for (c, col) in coeffs.iter().zip(&self.columns) {
            out += col * *c;
        }
        out
    }

    /// Deterministic unit-vector samples of the span's unit sphere.
    pub fn span_sphere_samples(&self, n: usize) -> Vec<DVector<f64>> {
        linalg::unit_sphere_samples(
            self.dim_real(),
            n,
            linalg::hash_floats(self.column_iter_values()),
        )
        .into_iter()
        .map(|c| self.from_coefficients(&c))
        .collect()
    }

    pub fn hash(&self) -> u64 {
        linalg::hash_floats(self.column_iter_values())
    }

    fn column_iter_values(&self) -> Vec<f64> {
        self.columns
            .iter()
            .flat_map(|c| c.iter().copied())
            .collect()
    }

    /// Check the Gram identity and, for complex frames, J-invariance of the
    /// span (projection residual of J of each column).
    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.columns.iter().enumerate() {
            for (j, b) in self.columns.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                if (a.dot(b) - target).abs() > GRAM_TOL {
                    return Err(Error::InvalidInput(format!(
                        "frame Gram residual {:.3e} at ({i},{j})",
                        (a.dot(b) - target).abs()
                    )));
                }
            }
        }
        if self.field == ScalarField::Complex {
            for c in &self.columns {
                let jc = self.field.complex_structure(c)?;
                let residual = (&jc - self.project(&jc)).norm();
                if residual > J_RESIDUAL_TOL {
                    return Err(Error::InvalidInput(format!(
                        "complex frame span is not J-invariant (residual {residual:.3e})"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn real_columns_of(field: ScalarField, generators: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let mut cols = Vec::new();
    for g in generators {
        let w = linalg::orthonormal_complement_step(g, &cols)
            .ok_or_else(|| Error::InvalidInput("dependent generators".into()))?;
        cols.push(w.clone());
        if field == ScalarField::Complex {
            cols.push(field.complex_structure(&w)?);
        }
    }
    Ok(cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(dim: usize, i: usize) -> DVector<f64> {
        DVector::from_fn(dim, |j, _| if j == i { 1.0 } else { 0.0 })
    }

    #[test]
    fn real_frame_is_orthonormal() {
        let v = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        let f = Frame::containing(ScalarField::Real, &v, 2, &[]).unwrap();
        assert_eq!(f.dim_k(), 2);
        assert_eq!(f.dim_real(), 2);
        f.validate().unwrap();
        // first column is the normalized prescribed direction
        let c0 = &f.columns()[0];
        assert!((c0 - v.normalize()).norm() < 1e-12);
    }

    #[test]
    fn complex_frame_pairs_with_j() {
        // C^2 ~ R^4, one complex generator => 2 real columns.
        let v = e(4, 0);
        let f = Frame::containing(ScalarField::Complex, &v, 1, &[]).unwrap();
        assert_eq!(f.dim_real(), 2);
        f.validate().unwrap();
        let jr = ScalarField::Complex
            .complex_structure(&f.columns()[0])
            .unwrap();
        assert!((&jr - &f.columns()[1]).norm() < 1e-12);
    }

    #[test]
    fn projection_is_identity_on_span() {
        let v = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.1]);
        let f = Frame::containing(ScalarField::Real, &v, 3, &[]).unwrap();
        let w = f.from_coefficients(&DVector::from_vec(vec![0.5, -0.2, 0.8]));
        assert!((&w - f.project(&w)).norm() < 1e-12);
    }

    #[test]
    fn dependent_generators_rejected() {
        let v = e(3, 0);
        assert!(Frame::from_generators(ScalarField::Real, &[v.clone(), v]).is_err());
    }
}
