//! Barycentric quadrature rules for error integrals on reference cells.
//! Weights sum to one and are scaled by the cell measure by the caller.

/// Barycentric point (unused trailing coordinates are zero) and weight.
pub type QuadPoint = ([f64; 3], f64);

/// Three-point Gauss rule on a segment, exact to degree 5.
pub fn gauss_segment() -> Vec<QuadPoint> {
    let s = 15f64.sqrt() / 10.0;
    [(0.5 - s, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + s, 5.0 / 18.0)]
        .iter()
        .map(|&(x, w)| ([1.0 - x, x, 0.0], w))
        .collect()
}

/// Seven-point rule on a triangle, exact to degree 5.
pub fn gauss_triangle() -> Vec<QuadPoint> {
    let r = 15f64.sqrt();
    let a = (6.0 - r) / 21.0;
    let b = (9.0 + 2.0 * r) / 21.0;
    let c = (6.0 + r) / 21.0;
    let d = (9.0 - 2.0 * r) / 21.0;
    let wa = (155.0 - r) / 1200.0;
    let wc = (155.0 + r) / 1200.0;
    vec![
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 9.0 / 40.0),
        ([a, a, b], wa),
        ([a, b, a], wa),
        ([b, a, a], wa),
        ([c, c, d], wc),
        ([c, d, c], wc),
        ([d, c, c], wc),
    ]
}

pub fn rule(dim: usize) -> Vec<QuadPoint> {
    match dim {
        1 => gauss_segment(),
        _ => gauss_triangle(),
    }
}
