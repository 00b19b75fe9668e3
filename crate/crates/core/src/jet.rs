//! Higher-order forward automatic differentiation by truncated
//! multivariate Taylor arithmetic.
//!
//! A [`Jet`] stores the Taylor coefficients of a scalar function about
//! a point of the `2n`-dimensional slit tangent bundle, up to a chosen
//! total order. Arithmetic on jets is truncated polynomial arithmetic,
//! so one evaluation of an expression yields every mixed partial
//! derivative at once, exact to rounding. Coefficients are kept in
//! graded order (all of degree 0, then degree 1, and so on), which
//! makes an order-k jet's coefficient vector a literal prefix of the
//! order-(k+1) vector for the same function.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use crate::dsl::{render_expression, EvalError, Expression, Func};
use crate::Scalar;

/// Exponent vector of one monomial in the `2n` coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<u8>);

impl MultiIndex {
    /// Total degree, the sum of the exponents.
    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// The unit index for variable slot `v`.
    pub fn unit(n_vars: usize, v: usize) -> MultiIndex {
        let mut e = vec![0u8; n_vars];
        e[v] = 1;
        MultiIndex(e)
    }
}

/// Failure inside jet arithmetic.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum JetOpError {
    #[error("{op} applied to a jet with constant term {value}")]
    Domain { op: &'static str, value: f64 },

    #[error("multi-index degree {degree} exceeds jet order {order}")]
    DegreeOverflow { degree: usize, order: usize },
}

struct Table {
    n_vars: usize,
    order: usize,
    indices: Vec<Vec<u8>>,
    rank: HashMap<Vec<u8>, usize>,
    /// First coefficient position of each total degree, with one extra
    /// entry holding the total count.
    degree_start: Vec<usize>,
    /// Flattened `len x len` map from a pair of positions to the
    /// position of the summed multi-index, `u32::MAX` when the sum
    /// exceeds the order. Empty when the table would be too large, in
    /// which case products fall back to hash lookups.
    prod: Vec<u32>,
}

const PROD_TABLE_LIMIT: usize = 1 << 22;

impl Table {
    fn build(n_vars: usize, order: usize) -> Table {
        let mut indices: Vec<Vec<u8>> = Vec::new();
        let mut degree_start = Vec::with_capacity(order + 2);
        for degree in 0..=order {
            degree_start.push(indices.len());
            let mut current = vec![0u8; n_vars];
            emit_degree(&mut indices, &mut current, 0, degree);
        }
        degree_start.push(indices.len());
        let rank: HashMap<Vec<u8>, usize> = indices
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let len = indices.len();
        let mut prod = Vec::new();
        if len * len <= PROD_TABLE_LIMIT {
            prod = vec![u32::MAX; len * len];
            let mut sum = vec![0u8; n_vars];
            for i in 0..len {
                let di: usize = indices[i].iter().map(|&e| e as usize).sum();
                for j in 0..len {
                    let dj: usize = indices[j].iter().map(|&e| e as usize).sum();
                    if di + dj > order {
                        continue;
                    }
                    for v in 0..n_vars {
                        sum[v] = indices[i][v] + indices[j][v];
                    }
                    prod[i * len + j] = rank[&sum[..]] as u32;
                }
            }
        }
        Table { n_vars, order, indices, rank, degree_start, prod }
    }

    fn len(&self) -> usize {
        self.indices.len()
    }

    fn degree_of(&self, pos: usize) -> usize {
        match self.degree_start.binary_search(&pos) {
            Ok(d) => d.min(self.order),
            Err(d) => d - 1,
        }
    }

    fn prod_pos(&self, i: usize, j: usize, scratch: &mut Vec<u8>) -> Option<usize> {
        if !self.prod.is_empty() {
            let p = self.prod[i * self.len() + j];
            return (p != u32::MAX).then_some(p as usize);
        }
        scratch.clear();
        scratch.extend(
            self.indices[i]
                .iter()
                .zip(&self.indices[j])
                .map(|(a, b)| a + b),
        );
        self.rank.get(&scratch[..]).copied()
    }
}

fn emit_degree(out: &mut Vec<Vec<u8>>, current: &mut Vec<u8>, from: usize, remaining: usize) {
    if from + 1 == current.len() {
        current[from] = remaining as u8;
        out.push(current.clone());
        current[from] = 0;
        return;
    }
    for take in (0..=remaining).rev() {
        current[from] = take as u8;
        emit_degree(out, current, from + 1, remaining - take);
    }
    current[from] = 0;
}

fn table(n_vars: usize, order: usize) -> Arc<Table> {
    static TABLES: OnceLock<Mutex<HashMap<(usize, usize), Arc<Table>>>> = OnceLock::new();
    let cache = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("table cache lock");
    guard
        .entry((n_vars, order))
        .or_insert_with(|| Arc::new(Table::build(n_vars, order)))
        .clone()
}

/// Truncated Taylor expansion of a scalar at a point, over `n_vars`
/// coordinates up to a total order.
///
/// `coeffs[rank(m)]` is the Taylor coefficient of the monomial with
/// exponent vector `m`, so the raw mixed partial is that coefficient
/// times `m!`.
#[derive(Clone)]
pub struct Jet<T> {
    table: Arc<Table>,
    coeffs: Vec<T>,
}

impl<T: std::fmt::Debug> std::fmt::Debug for Jet<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Jet")
            .field("n_vars", &self.table.n_vars)
            .field("order", &self.table.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl<T: Scalar> PartialEq for Jet<T> {
    fn eq(&self, other: &Self) -> bool {
        self.n_vars() == other.n_vars()
            && self.order() == other.order()
            && self.coeffs == other.coeffs
    }
}

impl<T: Scalar> Jet<T> {
    /// The jet of a constant.
    pub fn constant(n_vars: usize, order: usize, value: T) -> Jet<T> {
        let table = table(n_vars, order);
        let mut coeffs = vec![T::zero(); table.len()];
        coeffs[0] = value;
        Jet { table, coeffs }
    }

    /// The jet of the coordinate in slot `v`, whose value at the point
    /// is `value`.
    pub fn variable(n_vars: usize, order: usize, v: usize, value: T) -> Jet<T> {
        assert!(v < n_vars, "variable slot {v} out of {n_vars}");
        let table = table(n_vars, order);
        let mut coeffs = vec![T::zero(); table.len()];
        coeffs[0] = value;
        if order >= 1 {
            coeffs[1 + v] = T::one();
        }
        Jet { table, coeffs }
    }

    pub fn n_vars(&self) -> usize {
        self.table.n_vars
    }

    pub fn order(&self) -> usize {
        self.table.order
    }

    /// The value of the function at the expansion point.
    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    /// Raw mixed partial derivative for the multi-index `m`, which is
    /// the stored Taylor coefficient times `m!`.
    pub fn partial(&self, m: &MultiIndex) -> Result<T, JetOpError> {
        let degree = m.degree();
        if degree > self.order() {
            return Err(JetOpError::DegreeOverflow { degree, order: self.order() });
        }
        assert_eq!(m.0.len(), self.n_vars(), "multi-index arity mismatch");
        let pos = self.table.rank[&m.0[..]];
        let mut factorial = T::one();
        for &e in &m.0 {
            for k in 2..=e as usize {
                factorial = factorial * T::from_usize(k).expect("small factorial");
            }
        }
        Ok(self.coeffs[pos] * factorial)
    }

    /// First partial derivative along variable slot `v`.
    pub fn d1(&self, v: usize) -> T {
        debug_assert!(self.order() >= 1);
        self.coeffs[1 + v]
    }

    /// Second partial derivative along slots `v` and `w`.
    pub fn d2(&self, v: usize, w: usize) -> T {
        debug_assert!(self.order() >= 2);
        let mut m = vec![0u8; self.n_vars()];
        m[v] += 1;
        m[w] += 1;
        let pos = self.table.rank[&m[..]];
        let factor = if v == w { T::from_f64(2.0).expect("two") } else { T::one() };
        self.coeffs[pos] * factor
    }

    /// The same expansion truncated to a lower order.
    pub fn truncated(&self, order: usize) -> Jet<T> {
        assert!(order <= self.order());
        if order == self.order() {
            return self.clone();
        }
        let table = table(self.n_vars(), order);
        let coeffs = self.coeffs[..table.len()].to_vec();
        Jet { table, coeffs }
    }

    /// Derivative along slot `v` as a jet of one order lower.
    pub fn derivative(&self, v: usize) -> Jet<T> {
        assert!(self.order() >= 1, "cannot differentiate an order-0 jet");
        let out_table = table(self.n_vars(), self.order() - 1);
        let mut coeffs = vec![T::zero(); out_table.len()];
        let mut shifted = vec![0u8; self.n_vars()];
        for (pos, m) in out_table.indices.iter().enumerate() {
            shifted.copy_from_slice(m);
            shifted[v] += 1;
            let src = self.table.rank[&shifted[..]];
            let mult = T::from_u8(m[v] + 1).expect("small integer");
            coeffs[pos] = self.coeffs[src] * mult;
        }
        Jet { table: out_table, coeffs }
    }

    fn aligned(&self, other: &Jet<T>) -> (Jet<T>, Jet<T>) {
        assert_eq!(self.n_vars(), other.n_vars(), "jet arity mismatch");
        let order = self.order().min(other.order());
        (self.truncated(order), other.truncated(order))
    }

    pub fn add(&self, other: &Jet<T>) -> Jet<T> {
        let (mut a, b) = self.aligned(other);
        for (x, y) in a.coeffs.iter_mut().zip(&b.coeffs) {
            *x = *x + *y;
        }
        a
    }

    pub fn sub(&self, other: &Jet<T>) -> Jet<T> {
        let (mut a, b) = self.aligned(other);
        for (x, y) in a.coeffs.iter_mut().zip(&b.coeffs) {
            *x = *x - *y;
        }
        a
    }

    pub fn neg(&self) -> Jet<T> {
        self.scale(-T::one())
    }

    pub fn scale(&self, factor: T) -> Jet<T> {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c = *c * factor;
        }
        out
    }

    pub fn add_scalar(&self, value: T) -> Jet<T> {
        let mut out = self.clone();
        out.coeffs[0] = out.coeffs[0] + value;
        out
    }

    pub fn mul(&self, other: &Jet<T>) -> Jet<T> {
        let (a, b) = self.aligned(other);
        let t = &a.table;
        let order = t.order;
        let mut coeffs = vec![T::zero(); t.len()];
        let mut scratch: Vec<u8> = Vec::with_capacity(t.n_vars);
        for i in 0..t.len() {
            let ai = a.coeffs[i];
            if ai == T::zero() {
                continue;
            }
            let remaining = order - t.degree_of(i);
            let j_end = t.degree_start[remaining + 1];
            for j in 0..j_end {
                let bj = b.coeffs[j];
                if bj == T::zero() {
                    continue;
                }
                let k = t
                    .prod_pos(i, j, &mut scratch)
                    .expect("degree bound keeps products inside the table");
                coeffs[k] = coeffs[k] + ai * bj;
            }
        }
        Jet { table: a.table.clone(), coeffs }
    }

    /// Applies a univariate analytic function given by the Taylor
    /// coefficients `series` of that function about this jet's value.
    fn compose(&self, series: &[T]) -> Jet<T> {
        debug_assert_eq!(series.len(), self.order() + 1);
        let mut h = self.clone();
        h.coeffs[0] = T::zero();
        let mut acc = Jet::constant(self.n_vars(), self.order(), series[self.order()]);
        for k in (0..self.order()).rev() {
            acc = acc.mul(&h).add_scalar(series[k]);
        }
        acc
    }

    /// Binomial series for `t^q` about the constant term.
    fn pow_series(&self, q: T, op: &'static str) -> Result<Jet<T>, JetOpError> {
        let c0 = self.value();
        if c0 <= T::zero() {
            return Err(JetOpError::Domain {
                op,
                value: num_traits::ToPrimitive::to_f64(&c0).unwrap_or(f64::NAN),
            });
        }
        let mut series = Vec::with_capacity(self.order() + 1);
        series.push(c0.powf(q));
        for k in 1..=self.order() {
            let kf = T::from_usize(k).expect("small integer");
            let prev = series[k - 1];
            series.push(prev * (q - kf + T::one()) / (kf * c0));
        }
        Ok(self.compose(&series))
    }

    pub fn recip(&self) -> Result<Jet<T>, JetOpError> {
        let c0 = self.value();
        if c0 == T::zero() {
            return Err(JetOpError::Domain { op: "division by", value: 0.0 });
        }
        let mut series = Vec::with_capacity(self.order() + 1);
        series.push(T::one() / c0);
        for k in 1..=self.order() {
            let prev = series[k - 1];
            series.push(-prev / c0);
        }
        Ok(self.compose(&series))
    }

    pub fn div(&self, other: &Jet<T>) -> Result<Jet<T>, JetOpError> {
        Ok(self.mul(&other.recip()?))
    }

    /// Integer power by repeated multiplication.
    pub fn powi(&self, n: i64) -> Result<Jet<T>, JetOpError> {
        if n < 0 {
            return self.powi(-n)?.recip();
        }
        let mut acc = Jet::constant(self.n_vars(), self.order(), T::one());
        let mut sq = self.clone();
        let mut n = n as u64;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&sq);
            }
            n >>= 1;
            if n > 0 {
                sq = sq.mul(&sq);
            }
        }
        Ok(acc)
    }

    pub fn sqrt(&self) -> Result<Jet<T>, JetOpError> {
        self.pow_series(T::from_f64(0.5).expect("half"), "sqrt of")
    }

    pub fn powf(&self, q: T) -> Result<Jet<T>, JetOpError> {
        self.pow_series(q, "rational power of")
    }

    pub fn exp(&self) -> Jet<T> {
        let e0 = self.value().exp();
        let mut series = Vec::with_capacity(self.order() + 1);
        let mut c = e0;
        series.push(c);
        for k in 1..=self.order() {
            c = c / T::from_usize(k).expect("small integer");
            series.push(c);
        }
        self.compose(&series)
    }

    pub fn ln(&self) -> Result<Jet<T>, JetOpError> {
        let c0 = self.value();
        if c0 <= T::zero() {
            return Err(JetOpError::Domain {
                op: "log of",
                value: num_traits::ToPrimitive::to_f64(&c0).unwrap_or(f64::NAN),
            });
        }
        let mut series = Vec::with_capacity(self.order() + 1);
        series.push(c0.ln());
        let mut power = T::one();
        for k in 1..=self.order() {
            power = power * c0;
            let kf = T::from_usize(k).expect("small integer");
            let sign = if k % 2 == 1 { T::one() } else { -T::one() };
            series.push(sign / (kf * power));
        }
        Ok(self.compose(&series))
    }

    pub fn sin(&self) -> Jet<T> {
        self.compose(&trig_series(self.value(), self.order(), true))
    }

    pub fn cos(&self) -> Jet<T> {
        self.compose(&trig_series(self.value(), self.order(), false))
    }

    pub fn abs(&self) -> Result<Jet<T>, JetOpError> {
        let c0 = self.value();
        if c0 == T::zero() {
            return Err(JetOpError::Domain { op: "abs of", value: 0.0 });
        }
        Ok(if c0 < T::zero() { self.neg() } else { self.clone() })
    }
}

fn trig_series<T: Scalar>(c0: T, order: usize, sine: bool) -> Vec<T> {
    let (s, c) = (c0.sin(), c0.cos());
    let cycle = if sine { [s, c, -s, -c] } else { [c, -s, -c, s] };
    let mut series = Vec::with_capacity(order + 1);
    let mut factorial = T::one();
    for k in 0..=order {
        if k > 0 {
            factorial = factorial * T::from_usize(k).expect("small integer");
        }
        series.push(cycle[k % 4] / factorial);
    }
    series
}

/// Evaluates an expression as a jet about the given point.
pub fn jet_evaluate<T: Scalar>(
    expr: &Expression,
    point: &[T],
    order: usize,
) -> Result<Jet<T>, EvalError> {
    let n_vars = point.len();
    walk(expr, point, n_vars, order, n_vars / 2)
}

fn walk<T: Scalar>(
    expr: &Expression,
    point: &[T],
    n_vars: usize,
    order: usize,
    dim: usize,
) -> Result<Jet<T>, EvalError> {
    let lift = |err: JetOpError, at: &Expression| match err {
        JetOpError::Domain { op, value } => EvalError {
            op,
            value,
            context: render_expression(at, dim),
        },
        JetOpError::DegreeOverflow { .. } => unreachable!("expression walk stays in order"),
    };
    match expr {
        Expression::Const(c) => Ok(Jet::constant(
            n_vars,
            order,
            T::from_f64(*c).expect("literal fits the scalar type"),
        )),
        Expression::Var(v) => Ok(Jet::variable(n_vars, order, *v, point[*v])),
        Expression::Neg(a) => Ok(walk(a, point, n_vars, order, dim)?.neg()),
        Expression::Add(a, b) => {
            Ok(walk(a, point, n_vars, order, dim)?.add(&walk(b, point, n_vars, order, dim)?))
        }
        Expression::Sub(a, b) => {
            Ok(walk(a, point, n_vars, order, dim)?.sub(&walk(b, point, n_vars, order, dim)?))
        }
        Expression::Mul(a, b) => {
            Ok(walk(a, point, n_vars, order, dim)?.mul(&walk(b, point, n_vars, order, dim)?))
        }
        Expression::Div(a, b) => walk(a, point, n_vars, order, dim)?
            .div(&walk(b, point, n_vars, order, dim)?)
            .map_err(|e| lift(e, expr)),
        Expression::Pow(base, exp) => {
            let b = walk(base, point, n_vars, order, dim)?;
            if exp.is_integer() {
                b.powi(exp.num).map_err(|e| lift(e, expr))
            } else {
                b.powf(T::from_f64(exp.as_f64()).expect("exponent fits the scalar type"))
                    .map_err(|e| lift(e, expr))
            }
        }
        Expression::Call(func, arg) => {
            let a = walk(arg, point, n_vars, order, dim)?;
            match func {
                Func::Sqrt => a.sqrt().map_err(|e| lift(e, expr)),
                Func::Abs => a.abs().map_err(|e| lift(e, expr)),
                Func::Sin => Ok(a.sin()),
                Func::Cos => Ok(a.cos()),
                Func::Exp => Ok(a.exp()),
                Func::Log => a.ln().map_err(|e| lift(e, expr)),
            }
        }
    }
}
