//! Curvature data of a spray at a point of the slit tangent bundle.
//!
//! A spray is the second-order field S = y^i ∂/∂x^i − 2G^i ∂/∂y^i. From
//! one order-4 jet evaluation of the coefficients G^i this module
//! assembles the nonlinear connection N^i_j = ∂G^i/∂y^j, the Jacobi
//! endomorphism Φ, the Ricci scalar R = TrΦ/(n−1), the isotropy
//! decomposition Φ = R·J − α⊗C, and the derivations d_J, d_h, S and
//! d∘d_J applied to them. Every derived scalar is kept as a jet, so the
//! outer derivatives are Taylor coefficients rather than numerical
//! re-differentiation.

use nalgebra::{DMatrix, DVector};

use crate::dsl::{Expression, SprayDefinition};
use crate::jet::jet_evaluate;
use crate::{Error, Jet64};

/// Relative cutoff under the largest singular value when counting the
/// numeric rank of a matrix.
pub const RANK_RTOL: f64 = 1e-8;

/// A second-order system x''^i = −2 G^i(x, x') whose coefficient jets
/// can be evaluated at a point.
pub trait Spray {
    /// Base dimension n; points of the tangent bundle have 2n
    /// coordinates.
    fn dim(&self) -> usize;

    fn name(&self) -> &str;

    /// Inequalities (expression > 0) carving out the domain of
    /// definition.
    fn constraints(&self) -> &[Expression];

    /// Jets of G^1..G^n about `point`, each to the requested order.
    fn coefficient_jets(&self, point: &[f64], order: usize) -> Result<Vec<Jet64>, Error>;
}

/// Spray whose coefficients are closed-form expressions.
pub struct ExpressionSpray {
    def: SprayDefinition,
}

impl ExpressionSpray {
    pub fn new(def: SprayDefinition) -> ExpressionSpray {
        ExpressionSpray { def }
    }

    pub fn definition(&self) -> &SprayDefinition {
        &self.def
    }
}

impl Spray for ExpressionSpray {
    fn dim(&self) -> usize {
        self.def.dim
    }

    fn name(&self) -> &str {
        &self.def.name
    }

    fn constraints(&self) -> &[Expression] {
        &self.def.constraints
    }

    fn coefficient_jets(&self, point: &[f64], order: usize) -> Result<Vec<Jet64>, Error> {
        check_point(self.def.dim, point)?;
        self.def
            .g
            .iter()
            .map(|expr| jet_evaluate(expr, point, order).map_err(Error::from))
            .collect()
    }
}

pub(crate) fn check_point(dim: usize, point: &[f64]) -> Result<(), Error> {
    if point.len() != 2 * dim {
        return Err(Error::PointLength { dim, expected: 2 * dim, found: point.len() });
    }
    Ok(())
}

/// Everything the metrizability conditions need at one point.
///
/// Value-level fields hold the objects themselves; the `*_jets` fields
/// keep their Taylor expansions for further derivations.
#[derive(Debug)]
pub struct GeometryFrame {
    pub dim: usize,
    pub point: Vec<f64>,
    /// Coefficients G^i to order 4.
    pub g_jets: Vec<Jet64>,
    /// Connection coefficients N^i_j to order 3, indexed `[i][j]`.
    pub conn_jets: Vec<Vec<Jet64>>,
    /// Jacobi endomorphism entries Φ^i_j to order 2, indexed `[i][j]`.
    pub phi_jets: Vec<Vec<Jet64>>,
    /// Trace of Φ to order 2.
    pub ric_jet: Jet64,
    /// Ricci scalar R = TrΦ/(n−1) to order 2.
    pub r_jet: Jet64,
    /// Isotropy 1-form components α_j to order 2.
    pub alpha_jets: Vec<Jet64>,

    /// N^i_j values.
    pub conn: DMatrix<f64>,
    /// Φ^i_j values.
    pub phi: DMatrix<f64>,
    pub ric: f64,
    pub r: f64,
    pub alpha: DVector<f64>,
    /// Frobenius norm of Φ − R·J + α⊗C.
    pub iso_residual: f64,
    /// (d_Jα)_{ij} = ∂α_j/∂y^i − ∂α_i/∂y^j.
    pub dj_alpha: DMatrix<f64>,
    /// (d_JR)_i = ∂R/∂y^i.
    pub dj_r: DVector<f64>,
    /// (d_hR)_i = ∂R/∂x^i − N^j_i ∂R/∂y^j.
    pub dh_r: DVector<f64>,
    /// S(R).
    pub s_r: f64,
    /// Matrix of the 2-form d(d_J TrΦ) in the frame (dx, dy).
    pub ddj_ric: DMatrix<f64>,
}

/// Computes the full curvature frame at `point`.
pub fn build_frame(spray: &dyn Spray, point: &[f64]) -> Result<GeometryFrame, Error> {
    let n = spray.dim();
    check_point(n, point)?;
    let g_jets = spray.coefficient_jets(point, 4)?;

    let conn_jets: Vec<Vec<Jet64>> = g_jets
        .iter()
        .map(|g| (0..n).map(|j| g.derivative(n + j)).collect())
        .collect();

    let mut phi_jets: Vec<Vec<Jet64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let dx = g_jets[i].derivative(j).scale(2.0);
            let sn = spray_derivative_with(&g_jets, point, &conn_jets[i][j]);
            let mut nn = conn_jets[i][0].mul(&conn_jets[0][j]);
            for r in 1..n {
                nn = nn.add(&conn_jets[i][r].mul(&conn_jets[r][j]));
            }
            row.push(dx.sub(&sn).sub(&nn));
        }
        phi_jets.push(row);
    }

    let mut ric_jet = phi_jets[0][0].clone();
    for i in 1..n {
        ric_jet = ric_jet.add(&phi_jets[i][i]);
    }
    let r_jet = ric_jet.scale(1.0 / (n as f64 - 1.0));

    let alpha_jets = isotropy_alpha_jets(n, point, &phi_jets, &r_jet)?;

    let conn = DMatrix::from_fn(n, n, |i, j| conn_jets[i][j].value());
    let phi = DMatrix::from_fn(n, n, |i, j| phi_jets[i][j].value());
    let ric = ric_jet.value();
    let r = r_jet.value();
    let alpha = DVector::from_fn(n, |j, _| alpha_jets[j].value());
    let iso = DMatrix::from_fn(n, n, |i, j| {
        let kronecker = if i == j { r } else { 0.0 };
        phi[(i, j)] - kronecker + alpha[j] * point[n + i]
    });
    let iso_residual = iso.norm();

    let dj_alpha = DMatrix::from_fn(n, n, |i, j| {
        alpha_jets[j].d1(n + i) - alpha_jets[i].d1(n + j)
    });
    let dj_r = DVector::from_fn(n, |i, _| r_jet.d1(n + i));
    let dh_r = DVector::from_fn(n, |i, _| {
        r_jet.d1(i) - (0..n).map(|j| conn[(j, i)] * r_jet.d1(n + j)).sum::<f64>()
    });
    let s_r = (0..n)
        .map(|k| point[n + k] * r_jet.d1(k) - 2.0 * g_jets[k].value() * r_jet.d1(n + k))
        .sum();
    let ddj_ric = dd_vertical_matrix(n, &ric_jet);

    Ok(GeometryFrame {
        dim: n,
        point: point.to_vec(),
        g_jets,
        conn_jets,
        phi_jets,
        ric_jet,
        r_jet,
        alpha_jets,
        conn,
        phi,
        ric,
        r,
        alpha,
        iso_residual,
        dj_alpha,
        dj_r,
        dh_r,
        s_r,
        ddj_ric,
    })
}

impl GeometryFrame {
    /// S(f) = y^k ∂f/∂x^k − 2 G^k ∂f/∂y^k, one order lower than `f`.
    pub fn spray_derivative(&self, f: &Jet64) -> Jet64 {
        spray_derivative_with(&self.g_jets, &self.point, f)
    }

    /// Components ∂f/∂y^i of the semi-basic 1-form d_Jf, one order
    /// lower than `f`.
    pub fn d_vertical(&self, f: &Jet64) -> Vec<Jet64> {
        let n = self.dim;
        (0..n).map(|i| f.derivative(n + i)).collect()
    }

    /// Components ∂f/∂x^i − N^j_i ∂f/∂y^j of d_hf, one order lower
    /// than `f`.
    pub fn d_horizontal(&self, f: &Jet64) -> Vec<Jet64> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                let mut out = f.derivative(i);
                for j in 0..n {
                    out = out.sub(&self.conn_jets[j][i].mul(&f.derivative(n + j)));
                }
                out
            })
            .collect()
    }

    /// Values (d_Jω)_{ij} = ∂ω_j/∂y^i − ∂ω_i/∂y^j of the semi-basic
    /// exterior derivative of a semi-basic 1-form.
    pub fn d_vertical_oneform(&self, omega: &[Jet64]) -> DMatrix<f64> {
        let n = self.dim;
        DMatrix::from_fn(n, n, |i, j| omega[j].d1(n + i) - omega[i].d1(n + j))
    }

    /// Matrix of d(d_Jf) in the basis (dx^1..dx^n, dy^1..dy^n).
    pub fn dd_vertical(&self, f: &Jet64) -> DMatrix<f64> {
        dd_vertical_matrix(self.dim, f)
    }
}

fn spray_derivative_with(g_jets: &[Jet64], point: &[f64], f: &Jet64) -> Jet64 {
    assert!(f.order() >= 1, "spray derivative needs a jet of order >= 1");
    let n = g_jets.len();
    let order = f.order() - 1;
    let mut out = Jet64::constant(2 * n, order, 0.0);
    for k in 0..n {
        let y_k = Jet64::variable(2 * n, order, n + k, point[n + k]);
        out = out.add(&y_k.mul(&f.derivative(k)));
        out = out.sub(&g_jets[k].truncated(order.min(g_jets[k].order())).scale(2.0).mul(&f.derivative(n + k)));
    }
    out
}

fn dd_vertical_matrix(n: usize, f: &Jet64) -> DMatrix<f64> {
    assert!(f.order() >= 2, "d d_J needs a jet of order >= 2");
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for a in 0..n {
        for b in 0..n {
            m[(a, b)] = f.d2(a, n + b) - f.d2(b, n + a);
            let c_ab = f.d2(n + a, n + b);
            m[(a, n + b)] = -c_ab;
            m[(n + a, b)] = c_ab;
        }
    }
    m
}

/// α_j as jets, by least squares along the Liouville direction:
/// α_j = −Σ_i y^i (Φ^i_j − R δ^i_j) / |y|².
fn isotropy_alpha_jets(
    n: usize,
    point: &[f64],
    phi_jets: &[Vec<Jet64>],
    r_jet: &Jet64,
) -> Result<Vec<Jet64>, Error> {
    let order = phi_jets[0][0].order();
    let y: Vec<Jet64> = (0..n)
        .map(|k| Jet64::variable(2 * n, order, n + k, point[n + k]))
        .collect();
    let mut y_sq = y[0].mul(&y[0]);
    for k in 1..n {
        y_sq = y_sq.add(&y[k].mul(&y[k]));
    }
    let mut alpha = Vec::with_capacity(n);
    for j in 0..n {
        let mut sum = Jet64::constant(2 * n, order, 0.0);
        for i in 0..n {
            let mut entry = phi_jets[i][j].clone();
            if i == j {
                entry = entry.sub(r_jet);
            }
            sum = sum.add(&y[i].mul(&entry));
        }
        alpha.push(sum.neg().div(&y_sq)?);
    }
    Ok(alpha)
}

/// α for n = 2 from single entries of Φ, picking the better-conditioned
/// of the two quotients.
///
/// Because Φ·y = 0 row by row, Φ²₂/y¹ = −Φ²₁/y² and Φ¹₁/y² = −Φ¹₂/y¹
/// identically, so the choice only affects rounding.
pub fn isotropic_alpha_2d(spray: &dyn Spray, point: &[f64]) -> Result<DVector<f64>, Error> {
    assert_eq!(spray.dim(), 2, "closed-form alpha is specific to n = 2");
    let frame = build_frame(spray, point)?;
    let jets = alpha_2d_jets(&frame)?;
    Ok(DVector::from_fn(2, |j, _| jets[j].value()))
}

/// The n = 2 closed-form α as jets, for the d_Jα test.
pub fn alpha_2d_jets(frame: &GeometryFrame) -> Result<Vec<Jet64>, Error> {
    assert_eq!(frame.dim, 2, "closed-form alpha is specific to n = 2");
    let (y1, y2) = (frame.point[2], frame.point[3]);
    let order = frame.phi_jets[0][0].order();
    let y1_jet = Jet64::variable(4, order, 2, y1);
    let y2_jet = Jet64::variable(4, order, 3, y2);
    let alpha1 = if y1.abs() >= y2.abs() {
        frame.phi_jets[1][1].div(&y1_jet)?
    } else {
        frame.phi_jets[1][0].neg().div(&y2_jet)?
    };
    let alpha2 = if y2.abs() >= y1.abs() {
        frame.phi_jets[0][0].div(&y2_jet)?
    } else {
        frame.phi_jets[0][1].neg().div(&y1_jet)?
    };
    Ok(vec![alpha1, alpha2])
}

/// N^i_j = ∂G^i/∂y^j at `point`.
pub fn connection_coefficients(spray: &dyn Spray, point: &[f64]) -> Result<DMatrix<f64>, Error> {
    let n = spray.dim();
    check_point(n, point)?;
    let g = spray.coefficient_jets(point, 1)?;
    Ok(DMatrix::from_fn(n, n, |i, j| g[i].d1(n + j)))
}

/// Φ^i_j = 2 ∂G^i/∂x^j − S(N^i_j) − N^i_r N^r_j at `point`.
pub fn jacobi_endomorphism(spray: &dyn Spray, point: &[f64]) -> Result<DMatrix<f64>, Error> {
    Ok(build_frame(spray, point)?.phi)
}

/// (TrΦ, R) at `point`.
pub fn ricci_scalar(spray: &dyn Spray, point: &[f64]) -> Result<(f64, f64), Error> {
    let frame = build_frame(spray, point)?;
    Ok((frame.ric, frame.r))
}

/// Best-fit decomposition Φ = R·J − α⊗C: returns R, α, and the
/// Frobenius norm of the mismatch.
pub fn isotropy_decomposition(
    spray: &dyn Spray,
    point: &[f64],
) -> Result<(f64, DVector<f64>, f64), Error> {
    let frame = build_frame(spray, point)?;
    Ok((frame.r, frame.alpha, frame.iso_residual))
}

/// Number of singular values above `RANK_RTOL` times the largest.
pub fn numeric_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().singular_values();
    let top = sv.max();
    if top == 0.0 || !top.is_finite() {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_RTOL * top).count()
}
