//! Coefficient tensors `a_ij^{αβ}(y)` in two space dimensions, their
//! two-phase rescaled combination, ellipticity validation and Hölder
//! seminorm estimation.
//!
//! A tensor with `m` components is stored as the `(2m) x (2m)` matrix
//! `K[(i, α), (j, β)] = a_ij^{αβ}` in row-major order, so the quadratic form
//! `a_ij^{αβ} ξ_i^α ξ_j^β` is `ξᵀ K ξ` with `ξ` flattened as `i * m + α`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial dimension. Every mesh and cell in this crate is planar.
pub const DIM: usize = 2;

/// Constant 4-index tensor `a_ij^{αβ}` for `d = 2`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor4 {
    m: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor4")
            .field("m", &self.m)
            .field("data", &self.data)
            .finish()
    }
}

#[inline]
pub(crate) fn tensor_index(m: usize, i: usize, j: usize, a: usize, b: usize) -> usize {
    (i * m + a) * (DIM * m) + j * m + b
}

impl Tensor4 {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            data: vec![0.0; (DIM * m) * (DIM * m)],
        }
    }

    /// `value · δ_ij δ^{αβ}`
    pub fn isotropic(m: usize, value: f64) -> Self {
        let mut t = Self::zeros(m);
        for k in 0..DIM * m {
            t.data[k * (DIM * m) + k] = value;
        }
        t
    }

    /// Scalar (m = 1) tensor from a 2x2 matrix `[[a11, a12], [a21, a22]]`.
    pub fn scalar(matrix: [[f64; 2]; 2]) -> Self {
        Self {
            m: 1,
            data: vec![matrix[0][0], matrix[0][1], matrix[1][0], matrix[1][1]],
        }
    }

    /// From the flattened `(2m) x (2m)` row-major block matrix.
    pub fn from_block(m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != (DIM * m) * (DIM * m) {
            return Err(Error::Domain(format!(
                "tensor with m = {m} needs {} entries, got {}",
                (DIM * m) * (DIM * m),
                data.len()
            )));
        }
        Ok(Self { m, data })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        self.data[tensor_index(self.m, i, j, a, b)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, a: usize, b: usize, v: f64) {
        let k = tensor_index(self.m, i, j, a, b);
        self.data[k] = v;
    }

    pub fn block_matrix(&self) -> DMatrix<f64> {
        let n = DIM * self.m;
        DMatrix::from_row_slice(n, n, &self.data)
    }

    /// The m x m matrix `(a_dd^{αβ})` with `d` the normal direction.
    pub fn normal_block(&self) -> DMatrix<f64> {
        let m = self.m;
        DMatrix::from_fn(m, m, |a, b| self.get(DIM - 1, DIM - 1, a, b))
    }

    /// Extremal Rayleigh quotients of the symmetric part.
    pub fn rayleigh_bounds(&self) -> (f64, f64) {
        rayleigh_bounds(self.m, &self.data)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = DIM * self.m;
        (0..n).all(|r| (0..n).all(|c| (self.data[r * n + c] - self.data[c * n + r]).abs() <= tol))
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// min/max of `ξᵀKξ / |ξ|²` for the flattened block `k`.
pub(crate) fn rayleigh_bounds(m: usize, k: &[f64]) -> (f64, f64) {
    let n = DIM * m;
    if n == 2 {
        let (a, b, c) = (k[0], 0.5 * (k[1] + k[2]), k[3]);
        let mean = 0.5 * (a + c);
        let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        return (mean - rad, mean + rad);
    }
    let mut sym = DMatrix::from_row_slice(n, n, k);
    sym = 0.5 * (&sym + sym.transpose());
    let eig = SymmetricEigen::new(sym);
    let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Field `y ↦ a(y)` writing the flattened block into `out`.
pub type TensorFn = Arc<dyn Fn([f64; 2], &mut [f64]) + Send + Sync>;

/// Piecewise-constant tensor on a uniform `n1 x n2` grid over the cell.
///
/// Text format: a header line `d m n1 n2`, then for each grid cell in
/// row-major order (cell index `i1 * n2 + i2`, `i1` along `y1`) the
/// `(d m)^2` block entries, whitespace separated.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTensor {
    pub m: usize,
    pub n1: usize,
    pub n2: usize,
    pub data: Vec<f64>,
}

impl GridTensor {
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut header = [0usize; 4];
        for (k, slot) in header.iter_mut().enumerate() {
            let tok = tokens
                .next()
                .ok_or_else(|| Error::Data(format!("grid tensor header missing field {k}")))?;
            *slot = tok
                .parse()
                .map_err(|_| Error::Data(format!("bad grid tensor header token '{tok}'")))?;
        }
        let [d, m, n1, n2] = header;
        if d != DIM {
            return Err(Error::Data(format!("grid tensor has d = {d}, only d = 2 is supported")));
        }
        if m == 0 || n1 == 0 || n2 == 0 {
            return Err(Error::Data("grid tensor dimensions must be positive".into()));
        }
        let per = (DIM * m) * (DIM * m);
        let data: Vec<f64> = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Data(format!("bad grid tensor entry '{t}'")))
            })
            .collect::<Result<_>>()?;
        if data.len() != per * n1 * n2 {
            return Err(Error::Data(format!(
                "grid tensor expects {} entries, found {}",
                per * n1 * n2,
                data.len()
            )));
        }
        Ok(Self { m, n1, n2, data })
    }

    pub fn to_text(&self) -> String {
        let per = (DIM * self.m) * (DIM * self.m);
        let mut s = format!("{} {} {} {}\n", DIM, self.m, self.n1, self.n2);
        for cell in self.data.chunks(per) {
            let row: Vec<String> = cell.iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    fn eval(&self, y: [f64; 2], cell: [f64; 2], out: &mut [f64]) {
        let per = out.len();
        let i1 = (((y[0] / cell[0]) * self.n1 as f64).floor() as isize).rem_euclid(self.n1 as isize) as usize;
        let i2 = (((y[1] / cell[1]) * self.n2 as f64).floor() as isize).rem_euclid(self.n2 as isize) as usize;
        let k = i1 * self.n2 + i2;
        out.copy_from_slice(&self.data[k * per..(k + 1) * per]);
    }
}

#[derive(Clone)]
enum Source {
    Constant(Tensor4),
    Field(TensorFn),
    Grid(Arc<GridTensor>),
}

/// Optional Hölder regularity information attached to a tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderBound {
    pub alpha: f64,
    pub seminorm: f64,
}

/// A coefficient tensor `a_ij^{αβ}(y)`, constant or varying, optionally
/// periodic on the rectangle `[0, L1) x [0, L2)`.
#[derive(Clone)]
pub struct CoefficientTensor {
    m: usize,
    cell: Option<[f64; 2]>,
    lambda: f64,
    holder: Option<HolderBound>,
    source: Source,
}

impl fmt::Debug for CoefficientTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.source {
            Source::Constant(t) => format!("constant {:?}", t.as_slice()),
            Source::Field(_) => "field".to_string(),
            Source::Grid(g) => format!("grid {}x{}", g.n1, g.n2),
        };
        f.debug_struct("CoefficientTensor")
            .field("m", &self.m)
            .field("cell", &self.cell)
            .field("lambda", &self.lambda)
            .field("source", &kind)
            .finish()
    }
}

impl CoefficientTensor {
    pub fn constant(t: Tensor4, lambda: f64) -> Self {
        Self {
            m: t.m(),
            cell: None,
            lambda,
            holder: None,
            source: Source::Constant(t),
        }
    }

    pub fn isotropic(m: usize, value: f64, lambda: f64) -> Self {
        Self::constant(Tensor4::isotropic(m, value), lambda)
    }

    /// Periodic field on `cell` given by a closure over the cell coordinate.
    pub fn periodic_fn(m: usize, cell: [f64; 2], lambda: f64, f: TensorFn) -> Self {
        Self {
            m,
            cell: Some(cell),
            lambda,
            holder: None,
            source: Source::Field(f),
        }
    }

    /// Periodic scalar isotropic field `a(y) δ_ij`.
    pub fn periodic_scalar(
        cell: [f64; 2],
        lambda: f64,
        a: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::periodic_fn(
            1,
            cell,
            lambda,
            Arc::new(move |y, out| {
                let v = a(y);
                out[0] = v;
                out[1] = 0.0;
                out[2] = 0.0;
                out[3] = v;
            }),
        )
    }

    /// Scalar two-phase laminate on the unit cell: `low` for
    /// `y_axis mod 1 < fraction`, `high` otherwise. `axis` is 0 or 1.
    pub fn laminate(axis: usize, fraction: f64, low: f64, high: f64, lambda: f64) -> Self {
        assert!(axis < DIM);
        Self::periodic_scalar([1.0, 1.0], lambda, move |y| {
            if y[axis].rem_euclid(1.0) < fraction {
                low
            } else {
                high
            }
        })
    }

    /// Scalar checkerboard on the unit cell: `a` where the two half-index
    /// parities agree, `b` elsewhere.
    pub fn checkerboard(a: f64, b: f64, lambda: f64) -> Self {
        Self::periodic_scalar([1.0, 1.0], lambda, move |y| {
            let p = (y[0].rem_euclid(1.0) < 0.5) == (y[1].rem_euclid(1.0) < 0.5);
            if p {
                a
            } else {
                b
            }
        })
    }

    pub fn grid(grid: GridTensor, cell: [f64; 2], lambda: f64) -> Self {
        Self {
            m: grid.m,
            cell: Some(cell),
            lambda,
            holder: None,
            source: Source::Grid(Arc::new(grid)),
        }
    }

    /// Non-periodic field (used for slowly varying tensors such as `A_-(x/ε)`
    /// with a cell larger than the domain).
    pub fn from_fn(m: usize, lambda: f64, f: TensorFn) -> Self {
        Self {
            m,
            cell: None,
            lambda,
            holder: None,
            source: Source::Field(f),
        }
    }

    pub fn with_holder(mut self, alpha: f64, seminorm: f64) -> Self {
        self.holder = Some(HolderBound { alpha, seminorm });
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn cell(&self) -> Option<[f64; 2]> {
        self.cell
    }

    pub fn holder(&self) -> Option<HolderBound> {
        self.holder
    }

    pub fn as_constant(&self) -> Option<&Tensor4> {
        match &self.source {
            Source::Constant(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.source, Source::Constant(_))
    }

    pub fn block_len(&self) -> usize {
        (DIM * self.m) * (DIM * self.m)
    }

    /// Writes `a(y)` into `out` (length `(2m)^2`).
    #[inline]
    pub fn eval_into(&self, y: [f64; 2], out: &mut [f64]) {
        match &self.source {
            Source::Constant(t) => out.copy_from_slice(t.as_slice()),
            Source::Field(f) => {
                let y = match self.cell {
                    Some(c) => [y[0].rem_euclid(c[0]), y[1].rem_euclid(c[1])],
                    None => y,
                };
                f(y, out)
            }
            Source::Grid(g) => g.eval(y, self.cell.unwrap_or([1.0, 1.0]), out),
        }
    }

    pub fn eval(&self, y: [f64; 2]) -> Tensor4 {
        let mut t = Tensor4::zeros(self.m);
        self.eval_into(y, t.as_mut_slice());
        t
    }

    /// Checks ellipticity on a deterministic `samples x samples` grid of
    /// midpoints over the cell (or the unit square when not periodic).
    pub fn validate_ellipticity(&self, samples: usize) -> Result<EllipticityReport> {
        if samples == 0 {
            return Err(Error::Domain("at least one sample is required".into()));
        }
        let cell = self.cell.unwrap_or([1.0, 1.0]);
        let mut buf = vec![0.0; self.block_len()];
        let mut report = EllipticityReport {
            lambda: self.lambda,
            min_quotient: f64::INFINITY,
            max_quotient: f64::NEG_INFINITY,
            argmin: [0.0; 2],
            argmax: [0.0; 2],
            valid: true,
        };
        let n = if self.is_constant() { 1 } else { samples };
        for a in 0..n {
            for b in 0..n {
                let y = [
                    (a as f64 + 0.5) / n as f64 * cell[0],
                    (b as f64 + 0.5) / n as f64 * cell[1],
                ];
                self.eval_into(y, &mut buf);
                if buf.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Evaluation {
                        what: "coefficient tensor".into(),
                        x: y[0],
                        y: y[1],
                    });
                }
                let (lo, hi) = rayleigh_bounds(self.m, &buf);
                if lo < report.min_quotient {
                    report.min_quotient = lo;
                    report.argmin = y;
                }
                if hi > report.max_quotient {
                    report.max_quotient = hi;
                    report.argmax = y;
                }
            }
        }
        report.valid = report.within(self.lambda);
        Ok(report)
    }
}

/// Result of [`CoefficientTensor::validate_ellipticity`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipticityReport {
    pub lambda: f64,
    pub min_quotient: f64,
    pub max_quotient: f64,
    pub argmin: [f64; 2],
    pub argmax: [f64; 2],
    pub valid: bool,
}

impl EllipticityReport {
    fn within(&self, lambda: f64) -> bool {
        let slack = 1e-12;
        self.min_quotient >= (1.0 / lambda) * (1.0 - slack) && self.max_quotient <= lambda * (1.0 + slack)
    }
}

/// Which side of the interface a point or element belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Plus,
    Minus,
}

impl Phase {
    pub fn sign(self) -> f64 {
        match self {
            Phase::Plus => 1.0,
            Phase::Minus => -1.0,
        }
    }
}

/// `A^ε(x) = A_±(x / ε_±)` on the two phases.
#[derive(Debug, Clone)]
pub struct PiecewiseTensor {
    pub plus: CoefficientTensor,
    pub minus: CoefficientTensor,
    pub eps_plus: f64,
    pub eps_minus: f64,
}

impl PiecewiseTensor {
    pub fn new(plus: CoefficientTensor, minus: CoefficientTensor, eps_plus: f64, eps_minus: f64) -> Result<Self> {
        if plus.m() != minus.m() {
            return Err(Error::Domain(format!(
                "phase tensors disagree on m: {} vs {}",
                plus.m(),
                minus.m()
            )));
        }
        if !(eps_plus > 0.0 && eps_minus > 0.0 && eps_plus.is_finite() && eps_minus.is_finite()) {
            return Err(Error::Domain("scales must be positive and finite".into()));
        }
        Ok(Self {
            plus,
            minus,
            eps_plus,
            eps_minus,
        })
    }

    /// Unscaled pair (`ε_± = 1`).
    pub fn unscaled(plus: CoefficientTensor, minus: CoefficientTensor) -> Result<Self> {
        Self::new(plus, minus, 1.0, 1.0)
    }

    pub fn m(&self) -> usize {
        self.plus.m()
    }

    pub fn phase(&self, phase: Phase) -> (&CoefficientTensor, f64) {
        match phase {
            Phase::Plus => (&self.plus, self.eps_plus),
            Phase::Minus => (&self.minus, self.eps_minus),
        }
    }

    #[inline]
    pub fn eval_into(&self, x: [f64; 2], phase: Phase, out: &mut [f64]) {
        let (t, eps) = self.phase(phase);
        t.eval_into([x[0] / eps, x[1] / eps], out);
    }

    pub fn eval(&self, x: [f64; 2], phase: Phase) -> Tensor4 {
        let mut t = Tensor4::zeros(self.m());
        self.eval_into(x, phase, t.as_mut_slice());
        t
    }

    pub fn lambda(&self) -> f64 {
        self.plus.lambda().max(self.minus.lambda())
    }
}

/// Finite-sample lower estimate of `[f]_{C^α}`: the largest
/// `|f(x) - f(y)| / |x - y|^α` over sampled pairs. `values` holds
/// `values.len() / points.len()` components per point. At most `10^6` pairs
/// are visited, by deterministic striding through the pair enumeration.
pub fn holder_seminorm(points: &[[f64; 2]], values: &[f64], alpha: f64) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Domain("Hölder seminorm needs at least two sample points".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("Hölder exponent {alpha} not in (0, 1)")));
    }
    if !values.len().is_multiple_of(points.len()) || values.is_empty() {
        return Err(Error::Domain("value count is not a multiple of the point count".into()));
    }
    const PAIR_CAP: u64 = 1_000_000;
    let n = points.len();
    let dim = values.len() / n;
    let total = (n as u64) * (n as u64 - 1) / 2;
    let stride = total.div_ceil(PAIR_CAP).max(1);
    let mut best = 0.0f64;
    let mut counter: u64 = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            if counter.is_multiple_of(stride) {
                let dx = points[i][0] - points[j][0];
                let dy = points[i][1] - points[j][1];
                let dist = (dx * dx + dy * dy).sqrt();
                if dist > 0.0 {
                    let df = (0..dim)
                        .map(|c| (values[i * dim + c] - values[j * dim + c]).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    best = best.max(df / dist.powf(alpha));
                }
            }
            counter += 1;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_valid_with_unit_lambda() {
        let a = CoefficientTensor::isotropic(1, 1.0, 1.0);
        let r = a.validate_ellipticity(4).unwrap();
        assert_eq!((r.min_quotient, r.max_quotient), (1.0, 1.0));
        assert!(r.valid);
    }

    #[test]
    fn doubled_identity_is_flagged() {
        let a = CoefficientTensor::isotropic(1, 2.0, 1.0);
        let r = a.validate_ellipticity(4).unwrap();
        assert_eq!(r.max_quotient, 2.0);
        assert!(!r.valid);
    }

    #[test]
    fn checkerboard_bounds() {
        let a = CoefficientTensor::checkerboard(1.0, 4.0, 4.0);
        let r = a.validate_ellipticity(8).unwrap();
        assert_eq!(r.min_quotient, 1.0);
        assert_eq!(r.max_quotient, 4.0);
        assert!(r.valid);
    }

    #[test]
    fn system_tensor_rayleigh_bounds_use_full_block() {
        let mut t = Tensor4::isotropic(2, 1.0);
        t.set(0, 0, 0, 1, 0.5);
        t.set(0, 0, 1, 0, 0.5);
        let (lo, hi) = t.rayleigh_bounds();
        assert!((lo - 0.5).abs() < 1e-12 && (hi - 1.5).abs() < 1e-12);
    }

    #[test]
    fn non_finite_entry_names_the_point() {
        let a = CoefficientTensor::periodic_scalar([1.0, 1.0], 2.0, |y| if y[0] > 0.5 { f64::NAN } else { 1.0 });
        match a.validate_ellipticity(2) {
            Err(Error::Evaluation { x, .. }) => assert!(x > 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn periodic_entries_agree_on_opposite_faces() {
        let a = CoefficientTensor::periodic_scalar([1.0, 2.0], 4.0, |y| {
            2.0 + (2.0 * std::f64::consts::PI * y[0]).sin() * (std::f64::consts::PI * y[1]).cos()
        });
        for s in [0.1, 0.37, 0.8] {
            let d0 = a.eval([0.0, s]).max_abs_diff(&a.eval([1.0, s]));
            let d1 = a.eval([s, 0.0]).max_abs_diff(&a.eval([s, 2.0]));
            assert!(d0 < 1e-12 && d1 < 1e-12);
        }
    }

    #[test]
    fn piecewise_tensor_is_scale_covariant() {
        let plus = CoefficientTensor::laminate(0, 0.5, 1.0, 4.0, 4.0);
        let minus = CoefficientTensor::laminate(1, 0.5, 2.0, 3.0, 4.0);
        let scaled = PiecewiseTensor::new(plus.clone(), minus.clone(), 0.125, 0.3).unwrap();
        let unit = PiecewiseTensor::unscaled(plus, minus).unwrap();
        for x in [[0.01, 0.2], [0.33, -0.41], [-0.77, 0.05]] {
            let a = scaled.eval(x, Phase::Plus);
            let b = unit.eval([x[0] / 0.125, x[1] / 0.125], Phase::Plus);
            assert_eq!(a, b);
            let a = scaled.eval(x, Phase::Minus);
            let b = unit.eval([x[0] / 0.3, x[1] / 0.3], Phase::Minus);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn grid_tensor_round_trips_text() {
        let g = GridTensor {
            m: 1,
            n1: 2,
            n2: 1,
            data: vec![1.0, 0.0, 0.0, 1.0, 4.0, 0.0, 0.0, 4.0],
        };
        let parsed = GridTensor::parse(&g.to_text()).unwrap();
        assert_eq!(parsed, g);
        let a = CoefficientTensor::grid(parsed, [1.0, 1.0], 4.0);
        assert_eq!(a.eval([0.25, 0.5]).get(0, 0, 0, 0), 1.0);
        assert_eq!(a.eval([0.75, 0.5]).get(1, 1, 0, 0), 4.0);
        assert!(GridTensor::parse("2 1 2 2 1 2 3").is_err());
    }

    #[test]
    fn holder_of_constant_is_zero() {
        let pts: Vec<[f64; 2]> = (0..20).map(|k| [k as f64 / 19.0, 0.3]).collect();
        let vals = vec![3.0; 20];
        assert_eq!(holder_seminorm(&pts, &vals, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn holder_of_linear_pair() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.5]];
        let vals: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        assert!(holder_seminorm(&pts, &vals, 0.5).unwrap() >= 1.0);
    }

    #[test]
    fn holder_of_square_root_profile() {
        // sup is attained against the origin: |x|^{1/2} / |x|^{1/2} = 1
        let n = 1000;
        let pts: Vec<[f64; 2]> = (0..n).map(|k| [k as f64 / (n - 1) as f64, 0.0]).collect();
        let vals: Vec<f64> = pts.iter().map(|p| p[0].abs().sqrt()).collect();
        let est = holder_seminorm(&pts, &vals, 0.5).unwrap();
        assert!((est - 1.0).abs() <= 0.05, "{est}");
    }

    #[test]
    fn holder_rejects_single_point() {
        assert!(holder_seminorm(&[[0.0, 0.0]], &[1.0], 0.5).is_err());
        assert!(holder_seminorm(&[[0.0, 0.0], [1.0, 0.0]], &[1.0, 2.0], 1.5).is_err());
    }
}
