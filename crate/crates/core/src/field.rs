//! Closed-form scalar and vector fields used as problem data.

use std::sync::Arc;

/// Pointwise scalar function on the plane.
pub type ScalarField = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Pointwise vector function on the plane.
pub type VectorField = Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>;

/// Pointwise 2x2 matrix function; row `i` holds the gradient of component `i`.
pub type TensorField = Arc<dyn Fn(f64, f64) -> [[f64; 2]; 2] + Send + Sync>;

/// Constant scalar field.
pub fn scalar_const(c: f64) -> ScalarField {
    Arc::new(move |_, _| c)
}

/// Constant vector field.
pub fn vector_const(x: f64, y: f64) -> VectorField {
    Arc::new(move |_, _| (x, y))
}

/// Zero scalar field.
pub fn scalar_zero() -> ScalarField {
    scalar_const(0.0)
}

/// Zero vector field.
pub fn vector_zero() -> VectorField {
    vector_const(0.0, 0.0)
}

/// Pointwise sum of two scalar fields.
pub fn scalar_add(a: &ScalarField, b: &ScalarField) -> ScalarField {
    let (a, b) = (a.clone(), b.clone());
    Arc::new(move |x, y| a(x, y) + b(x, y))
}

/// Scalar field scaled by a constant.
pub fn scalar_scale(s: f64, a: &ScalarField) -> ScalarField {
    let a = a.clone();
    Arc::new(move |x, y| s * a(x, y))
}

/// Pointwise sum of two vector fields.
pub fn vector_add(a: &VectorField, b: &VectorField) -> VectorField {
    let (a, b) = (a.clone(), b.clone());
    Arc::new(move |x, y| {
        let (ax, ay) = a(x, y);
        let (bx, by) = b(x, y);
        (ax + bx, ay + by)
    })
}

/// Vector field scaled by a constant.
pub fn vector_scale(s: f64, a: &VectorField) -> VectorField {
    let a = a.clone();
    Arc::new(move |x, y| {
        let (ax, ay) = a(x, y);
        (s * ax, s * ay)
    })
}
