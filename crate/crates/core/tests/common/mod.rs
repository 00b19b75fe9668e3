//! Helpers shared by the integration test targets: deterministic
//! random sprays, a smooth random expression generator, and the
//! finite-difference oracle the jet engine is checked against.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::Rng;

use sprayck::dsl::{Definition, Expression, SprayDefinition};
use sprayck::finsler::GeodesicSpray;
use sprayck::geom::{ExpressionSpray, Spray};

pub fn spray_of(definition: &Definition) -> Box<dyn Spray> {
    match definition {
        Definition::Spray(s) => Box::new(ExpressionSpray::new(s.clone())),
        Definition::Finsler(f) => Box::new(GeodesicSpray::new(f.clone())),
    }
}

fn constant(v: f64) -> Expression {
    Expression::Const(v)
}

fn add(a: Expression, b: Expression) -> Expression {
    Expression::Add(Box::new(a), Box::new(b))
}

fn mul(a: Expression, b: Expression) -> Expression {
    Expression::Mul(Box::new(a), Box::new(b))
}

fn div(a: Expression, b: Expression) -> Expression {
    Expression::Div(Box::new(a), Box::new(b))
}

/// A rational base coefficient (p0 + p1 x1 + ... + pn xn) / (d + |x|^2),
/// smooth on the whole base space for d >= 1.
fn rational_coefficient(dim: usize, linear: &[f64], denominator_shift: f64) -> Expression {
    let mut numerator = constant(linear[0]);
    for (k, &p) in linear[1..=dim].iter().enumerate() {
        numerator = add(numerator, mul(constant(p), Expression::Var(k)));
    }
    let mut denominator = constant(denominator_shift);
    for k in 0..dim {
        denominator = add(
            denominator,
            Expression::Pow(Box::new(Expression::Var(k)), sprayck::dsl::Exponent::integer(2)),
        );
    }
    div(numerator, denominator)
}

/// Builds the 2-homogeneous spray G^i = sum_{a<=b} c^i_{ab}(x) y^a y^b
/// from a flat coefficient slice; `coefficients` supplies
/// dim * T * (dim + 1) numbers plus one denominator shift per
/// coefficient, where T = dim (dim + 1) / 2.
pub fn quadratic_spray_from(dim: usize, coefficients: &[f64]) -> SprayDefinition {
    let pairs: Vec<(usize, usize)> =
        (0..dim).flat_map(|a| (a..dim).map(move |b| (a, b))).collect();
    let per_coefficient = dim + 2;
    assert_eq!(coefficients.len(), dim * pairs.len() * per_coefficient);
    let mut chunks = coefficients.chunks_exact(per_coefficient);
    let g = (0..dim)
        .map(|_| {
            let mut total = constant(0.0);
            for &(a, b) in &pairs {
                let chunk = chunks.next().unwrap();
                let shift = 1.0 + chunk[dim + 1].abs();
                let c = rational_coefficient(dim, &chunk[..=dim], shift);
                let term = mul(
                    c,
                    mul(Expression::Var(dim + a), Expression::Var(dim + b)),
                );
                total = add(total, term);
            }
            total
        })
        .collect();
    SprayDefinition { name: "random_quadratic".into(), dim, g, constraints: vec![] }
}

/// Draws a random quadratic spray with coefficients in [-1.5, 1.5].
pub fn random_quadratic_spray(rng: &mut StdRng, dim: usize) -> SprayDefinition {
    let pairs = dim * (dim + 1) / 2;
    let count = dim * pairs * (dim + 2);
    let coefficients: Vec<f64> = (0..count).map(|_| rng.random_range(-1.5..1.5)).collect();
    quadratic_spray_from(dim, &coefficients)
}

/// Draws a point with every coordinate in [-1.2, 1.2] and the fiber
/// part bounded away from zero.
pub fn random_point(rng: &mut StdRng, dim: usize) -> Vec<f64> {
    loop {
        let point: Vec<f64> = (0..2 * dim).map(|_| rng.random_range(-1.2..1.2)).collect();
        let fiber_norm: f64 = point[dim..].iter().map(|y| y * y).sum::<f64>();
        if fiber_norm >= 0.25 {
            return point;
        }
    }
}

/// Random expression smooth on all of R^{2 dim}: polynomials composed
/// with sine, cosine, square roots of positive arguments, and
/// divisions with positive denominators.
pub fn random_smooth_expression(rng: &mut StdRng, dim: usize, depth: usize) -> Expression {
    let leaf = |rng: &mut StdRng| -> Expression {
        if rng.random_bool(0.4) {
            constant(rng.random_range(-2.0..2.0))
        } else {
            Expression::Var(rng.random_range(0..2 * dim))
        }
    };
    if depth == 0 {
        return leaf(rng);
    }
    let left = random_smooth_expression(rng, dim, depth - 1);
    match rng.random_range(0..8) {
        0 => add(left, random_smooth_expression(rng, dim, depth - 1)),
        1 => Expression::Sub(
            Box::new(left),
            Box::new(random_smooth_expression(rng, dim, depth - 1)),
        ),
        2 => mul(left, random_smooth_expression(rng, dim, depth - 1)),
        3 => Expression::Neg(Box::new(left)),
        4 => Expression::Call(sprayck::dsl::Func::Sin, Box::new(mul(constant(0.4), left))),
        5 => Expression::Call(sprayck::dsl::Func::Cos, Box::new(mul(constant(0.4), left))),
        6 => {
            let shifted = add(
                constant(2.0),
                Expression::Pow(
                    Box::new(random_smooth_expression(rng, dim, depth - 1)),
                    sprayck::dsl::Exponent::integer(2),
                ),
            );
            div(left, shifted)
        }
        _ => {
            let shifted = add(
                constant(1.0),
                Expression::Pow(Box::new(left), sprayck::dsl::Exponent::integer(2)),
            );
            Expression::Call(sprayck::dsl::Func::Sqrt, Box::new(shifted))
        }
    }
}

fn central_difference<F: Fn(&[f64]) -> f64>(
    f: &F,
    point: &mut Vec<f64>,
    order: &mut [u8],
    h: f64,
) -> f64 {
    match order.iter().position(|&k| k > 0) {
        None => f(point),
        Some(i) => {
            order[i] -= 1;
            point[i] += h;
            let plus = central_difference(f, point, order, h);
            point[i] -= 2.0 * h;
            let minus = central_difference(f, point, order, h);
            point[i] += h;
            order[i] += 1;
            (plus - minus) / (2.0 * h)
        }
    }
}

/// Central-difference partial derivative with one step of Richardson
/// extrapolation; the error is O(h^4) in the step size.
pub fn finite_difference_partial<F: Fn(&[f64]) -> f64>(
    f: &F,
    point: &[f64],
    order: &[u8],
    h: f64,
) -> f64 {
    let mut p = point.to_vec();
    let mut m = order.to_vec();
    let coarse = central_difference(f, &mut p, &mut m, h);
    let fine = central_difference(f, &mut p, &mut m, h / 2.0);
    (4.0 * fine - coarse) / 3.0
}

/// Two Richardson levels over step sizes h, h/2, h/4; the error is
/// O(h^6) in the step size.
pub fn finite_difference_partial2<F: Fn(&[f64]) -> f64>(
    f: &F,
    point: &[f64],
    order: &[u8],
    h: f64,
) -> f64 {
    let mut p = point.to_vec();
    let mut m = order.to_vec();
    let d0 = central_difference(f, &mut p, &mut m, h);
    let d1 = central_difference(f, &mut p, &mut m, h / 2.0);
    let d2 = central_difference(f, &mut p, &mut m, h / 4.0);
    let r1 = (4.0 * d1 - d0) / 3.0;
    let r2 = (4.0 * d2 - d1) / 3.0;
    (16.0 * r2 - r1) / 15.0
}
