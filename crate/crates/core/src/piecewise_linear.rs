//! Piecewise linear solutions of the flat-interface problem with constant
//! coefficients, the transmission-data map `𝒯`, and the best fit of a field
//! by such functions.
//!
//! An element `ℓ` is stored by the slope `M_-` below the interface, the jump
//! coefficient `q_d` and an offset `q_0`; the slope above is
//! `M_+ = M_- + q_d ⊗ e_d`, so continuity across `{x_d = 0}` holds by
//! construction.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::FieldFunction;
use crate::mesh::Region;
use crate::tensor::{Phase, Tensor4, DIM};

const D: usize = DIM - 1;

/// `ℓ(x) = M_+ x 𝟙{x_d ≥ 0} + M_- x 𝟙{x_d < 0} + q_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearSolution {
    /// `m x d` slope on the minus side.
    pub m_minus: DMatrix<f64>,
    pub q_d: DVector<f64>,
    pub q0: DVector<f64>,
}

impl PiecewiseLinearSolution {
    pub fn new(m_minus: DMatrix<f64>, q_d: DVector<f64>, q0: DVector<f64>) -> Result<Self> {
        let m = m_minus.nrows();
        if m_minus.ncols() != DIM || q_d.len() != m || q0.len() != m {
            return Err(Error::Domain("inconsistent piecewise linear parameter sizes".into()));
        }
        Ok(Self { m_minus, q_d, q0 })
    }

    pub fn zero(m: usize) -> Self {
        Self {
            m_minus: DMatrix::zeros(m, DIM),
            q_d: DVector::zeros(m),
            q0: DVector::zeros(m),
        }
    }

    pub fn m(&self) -> usize {
        self.q0.len()
    }

    pub fn m_plus(&self) -> DMatrix<f64> {
        let mut p = self.m_minus.clone();
        for a in 0..self.m() {
            p[(a, D)] += self.q_d[a];
        }
        p
    }

    pub fn slope(&self, phase: Phase) -> DMatrix<f64> {
        match phase {
            Phase::Plus => self.m_plus(),
            Phase::Minus => self.m_minus.clone(),
        }
    }

    /// Value at `x` (coordinates relative to the interface point).
    pub fn eval(&self, x: [f64; 2]) -> DVector<f64> {
        self.eval_branch(x, if x[D] >= 0.0 { Phase::Plus } else { Phase::Minus })
    }

    /// Value of the affine branch belonging to `phase` at `x`.
    pub fn eval_branch(&self, x: [f64; 2], phase: Phase) -> DVector<f64> {
        let mut v = &self.m_minus * DVector::from_column_slice(&x) + &self.q0;
        if phase == Phase::Plus {
            v += &self.q_d * x[D];
        }
        v
    }

    /// Largest `|ℓ_+ − ℓ_-|` over `samples` tangential points in `[-1, 1]`.
    pub fn continuity_defect(&self, samples: usize) -> f64 {
        (0..samples.max(1))
            .map(|k| {
                let s = -1.0 + 2.0 * k as f64 / (samples.max(2) - 1) as f64;
                let mut x = [0.0; 2];
                x[0] = s;
                (self.eval_branch(x, Phase::Plus) - self.eval_branch(x, Phase::Minus)).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Flat parameter list `{M_- row-major, q_d, q_0}`.
    pub fn params(&self) -> Vec<f64> {
        let m = self.m();
        let mut out = Vec::with_capacity(m * DIM + 2 * m);
        for a in 0..m {
            for j in 0..DIM {
                out.push(self.m_minus[(a, j)]);
            }
        }
        out.extend(self.q_d.iter());
        out.extend(self.q0.iter());
        out
    }

    pub fn from_params(m: usize, p: &[f64]) -> Result<Self> {
        if p.len() != m * DIM + 2 * m {
            return Err(Error::Domain("wrong parameter count".into()));
        }
        Ok(Self {
            m_minus: DMatrix::from_row_slice(m, DIM, &p[..m * DIM]),
            q_d: DVector::from_column_slice(&p[m * DIM..m * DIM + m]),
            q0: DVector::from_column_slice(&p[m * DIM + m..]),
        })
    }

    /// `self + other`
    pub fn add(&self, other: &Self) -> Self {
        Self {
            m_minus: &self.m_minus + &other.m_minus,
            q_d: &self.q_d + &other.q_d,
            q0: &self.q0 + &other.q0,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            m_minus: &self.m_minus * s,
            q_d: &self.q_d * s,
            q0: &self.q0 * s,
        }
    }
}

/// Returns `q_d` when `M_+ − M_-` has the form `q_d ⊗ e_d` within `tol`.
///
/// Both the column form and the projected form
/// `(I − e_d ⊗ e_d)(M_+^* − M_-^*) = 0` are evaluated; they agree.
pub fn jump_condition_check(m_plus: &DMatrix<f64>, m_minus: &DMatrix<f64>, tol: f64) -> Option<DVector<f64>> {
    assert_eq!(m_plus.shape(), m_minus.shape());
    let diff = m_plus - m_minus;
    let columns_vanish = (0..diff.ncols()).filter(|&j| j != D).all(|j| diff.column(j).iter().all(|v| v.abs() <= tol));
    let mut proj = DMatrix::<f64>::identity(DIM, DIM);
    proj[(D, D)] = 0.0;
    let projected = &proj * diff.transpose();
    let projected_vanish = projected.iter().all(|v| v.abs() <= tol);
    debug_assert_eq!(columns_vanish, projected_vanish);
    (columns_vanish && projected_vanish).then(|| diff.column(D).into_owned())
}

/// `(𝒯ℓ)^α = a_{dj,+}^{αβ} (M_+)_{βj} − a_{dj,-}^{αβ} (M_-)_{βj}`.
pub fn transmission_data(ell: &PiecewiseLinearSolution, a_plus: &Tensor4, a_minus: &Tensor4) -> DVector<f64> {
    let m = ell.m();
    let mp = ell.m_plus();
    DVector::from_fn(m, |a, _| {
        let mut acc = 0.0;
        for b in 0..m {
            for j in 0..DIM {
                acc += a_plus.get(D, j, a, b) * mp[(b, j)] - a_minus.get(D, j, a, b) * ell.m_minus[(b, j)];
            }
        }
        acc
    })
}

/// `ℓ(x) = [(e_d·A_+ e_d)^{-1} g_0] x_d 𝟙{x_d ≥ 0}`: a piecewise linear
/// solution with `𝒯ℓ = g_0`.
pub fn lift_from_g0(g0: &DVector<f64>, a_plus: &Tensor4) -> Result<PiecewiseLinearSolution> {
    let m = a_plus.m();
    if g0.len() != m {
        return Err(Error::Domain("g0 has the wrong length".into()));
    }
    let q_d = a_plus
        .normal_block()
        .lu()
        .solve(g0)
        .filter(|q| q.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Invariant("normal block e_d·A_+e_d is singular".into()))?;
    Ok(PiecewiseLinearSolution {
        m_minus: DMatrix::zeros(m, DIM),
        q_d,
        q0: DVector::zeros(m),
    })
}

/// Outcome of [`best_fit_excess`].
#[derive(Debug, Clone, PartialEq)]
pub struct BestFit {
    /// Minimizer, in coordinates relative to the region centre.
    pub ell: PiecewiseLinearSolution,
    /// `H(u; t)`
    pub value: f64,
    pub l2_term: f64,
    pub data_term: f64,
    /// One phase was empty and an ordinary affine fit was used.
    pub degenerate: bool,
}

/// Objective value and L² / data terms of `Φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantFit {
    pub value: f64,
    pub l2_term: f64,
    pub data_term: f64,
}

/// Quadratic moments of `u` against the basis `{x_1, x_2, x_2 𝟙_+, 1}`.
struct Moments {
    gram: DMatrix<f64>,
    /// `b[α]` = moments of component α.
    rhs: Vec<DVector<f64>>,
    area: f64,
    has_plus: bool,
    has_minus: bool,
}

fn moments(u: &FieldFunction, region: &Region) -> Moments {
    let mesh = u.mesh();
    let m = u.m();
    let c = region.selector.center;
    let mut gram = DMatrix::zeros(4, 4);
    let mut rhs = vec![DVector::zeros(4); m];
    for (t, plus) in region
        .plus_elements
        .iter()
        .map(|&t| (t, true))
        .chain(region.minus_elements.iter().map(|&t| (t, false)))
    {
        let pts = mesh.triangle_points(t);
        let tri = mesh.triangles[t];
        let w = mesh.area(t) / 3.0;
        for k in 0..3 {
            let l = (k + 1) % 3;
            let q = [0.5 * (pts[k][0] + pts[l][0]) - c[0], 0.5 * (pts[k][1] + pts[l][1]) - c[1]];
            let phi = [q[0], q[1], if plus { q[1] } else { 0.0 }, 1.0];
            for a in 0..4 {
                for b in 0..4 {
                    gram[(a, b)] += w * phi[a] * phi[b];
                }
            }
            for al in 0..m {
                let uq = 0.5 * (u.values()[tri[k] * m + al] + u.values()[tri[l] * m + al]);
                for a in 0..4 {
                    rhs[al][a] += w * uq * phi[a];
                }
            }
        }
    }
    Moments {
        gram,
        rhs,
        area: region.area(),
        has_plus: !region.plus_elements.is_empty(),
        has_minus: !region.minus_elements.is_empty(),
    }
}

/// `Σ_α ∫ |u^α − φ·c^α|²` with the same quadrature as [`moments`];
/// `coef` holds the four basis coefficients of each component.
fn residual_sq(u: &FieldFunction, region: &Region, coef: &[f64]) -> f64 {
    let mesh = u.mesh();
    let m = u.m();
    let c = region.selector.center;
    let mut total = 0.0;
    for (t, plus) in region
        .plus_elements
        .iter()
        .map(|&t| (t, true))
        .chain(region.minus_elements.iter().map(|&t| (t, false)))
    {
        let pts = mesh.triangle_points(t);
        let tri = mesh.triangles[t];
        let w = mesh.area(t) / 3.0;
        for k in 0..3 {
            let l = (k + 1) % 3;
            let q = [0.5 * (pts[k][0] + pts[l][0]) - c[0], 0.5 * (pts[k][1] + pts[l][1]) - c[1]];
            let phi = [q[0], q[1], if plus { q[1] } else { 0.0 }, 1.0];
            for al in 0..m {
                let uq = 0.5 * (u.values()[tri[k] * m + al] + u.values()[tri[l] * m + al]);
                let fit: f64 = (0..4).map(|a| phi[a] * coef[4 * al + a]).sum();
                total += w * (uq - fit).powi(2);
            }
        }
    }
    total
}

fn params_from_blocks(m: usize, p: &DVector<f64>) -> PiecewiseLinearSolution {
    // p holds per-component coefficients of (x_1, x_2, x_2 𝟙_+, 1)
    let mut ell = PiecewiseLinearSolution::zero(m);
    for a in 0..m {
        ell.m_minus[(a, 0)] = p[4 * a];
        ell.m_minus[(a, 1)] = p[4 * a + 1];
        ell.q_d[a] = p[4 * a + 2];
        ell.q0[a] = p[4 * a + 3];
    }
    ell
}

/// Rows of the linear map `p ↦ 𝒯ℓ(p)` in the block parameterisation.
fn transmission_matrix(m: usize, a_plus: &Tensor4, a_minus: &Tensor4) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(m, 4 * m);
    for a in 0..m {
        for b in 0..m {
            for j in 0..DIM {
                t[(a, 4 * b + j)] += a_plus.get(D, j, a, b) - a_minus.get(D, j, a, b);
            }
            t[(a, 4 * b + 2)] += a_plus.get(D, D, a, b);
        }
    }
    t
}

fn data_term(g: &[DVector<f64>], tau: &DVector<f64>) -> f64 {
    g.iter().map(|gk| (gk - tau).norm()).fold(0.0, f64::max)
}

/// `Φ(u; t) = (1/t)(⨍_{Q_t} |u − ū|²)^{1/2} + ‖g‖_{L∞(S_t)}` with the
/// region mean `ū`, using the quadrature of [`best_fit_excess`].
pub fn constant_fit(u: &FieldFunction, region: &Region, g: &[f64]) -> Result<ConstantFit> {
    if region.is_empty() {
        return Err(Error::Domain("empty integration region".into()));
    }
    let mo = moments(u, region);
    let t = region.selector.t;
    let gs = edge_values(u.m(), region, g)?;
    let area = mo.gram[(3, 3)];
    let mut coef = vec![0.0; 4 * u.m()];
    for a in 0..u.m() {
        coef[4 * a + 3] = mo.rhs[a][3] / area;
    }
    let q = residual_sq(u, region, &coef);
    let l2 = (q / mo.area).sqrt() / t;
    let data = data_term(&gs, &DVector::zeros(u.m()));
    Ok(ConstantFit {
        value: l2 + data,
        l2_term: l2,
        data_term: data,
    })
}

fn edge_values(m: usize, region: &Region, g: &[f64]) -> Result<Vec<DVector<f64>>> {
    region
        .interface_edges
        .iter()
        .map(|&e| {
            g.get(e * m..(e + 1) * m)
                .map(DVector::from_column_slice)
                .ok_or_else(|| Error::Data(format!("no g sample on interface edge {e}")))
        })
        .collect()
}

/// `H(u; t) = inf_ℓ (1/t)(⨍_{Q_t}|u − ℓ|²)^{1/2} + ‖g − 𝒯ℓ‖_{L∞(S_t)}`.
///
/// `g` holds `m` samples per interface edge of the mesh; only the edges of
/// the region enter. Coordinates of `ℓ` are relative to the region centre,
/// and the plus branch of `ℓ` is used on plus-phase elements.
///
/// For a fixed value `τ = 𝒯ℓ` the L² term is a quadratic problem with a
/// linear constraint and closed-form solution, which reduces the search to
/// the `m`-dimensional convex function
/// `τ ↦ (1/t)((Q_min + (τ−τ_0)ᵀS⁻¹(τ−τ_0))/|Q_t|)^{1/2} + max_e |g_e − τ|`.
/// It is minimised by golden-section search for `m = 1` and by subgradient
/// descent (2000 steps) otherwise. The constant fit defining `Φ` is always
/// among the candidates, so `H ≤ Φ` holds exactly.
pub fn best_fit_excess(
    u: &FieldFunction,
    region: &Region,
    g: &[f64],
    a_plus: &Tensor4,
    a_minus: &Tensor4,
) -> Result<BestFit> {
    if region.is_empty() {
        return Err(Error::Domain("empty integration region".into()));
    }
    let m = u.m();
    let t = region.selector.t;
    let gs = edge_values(m, region, g)?;
    let mo = moments(u, region);
    let constant = constant_fit(u, region, g)?;
    let constant_ell = {
        let mut ell = PiecewiseLinearSolution::zero(m);
        for a in 0..m {
            ell.q0[a] = mo.rhs[a][3] / mo.gram[(3, 3)];
        }
        ell
    };
    let mut best = BestFit {
        ell: constant_ell,
        value: constant.value,
        l2_term: constant.l2_term,
        data_term: constant.data_term,
        degenerate: false,
    };
    let n = 4 * m;
    // block-diagonal Gram over all components
    let degenerate = !(mo.has_plus && mo.has_minus);
    let basis: Vec<usize> = if degenerate { vec![0, 1, 3] } else { vec![0, 1, 2, 3] };
    let nb = basis.len();
    let g_small = DMatrix::from_fn(nb, nb, |r, c| mo.gram[(basis[r], basis[c])]);
    let Some(chol) = g_small.clone().cholesky() else {
        best.degenerate = degenerate;
        return Ok(best);
    };
    let tfull = transmission_matrix(m, a_plus, a_minus);
    // restrict to the active basis
    let idx: Vec<usize> = (0..m).flat_map(|a| basis.iter().map(move |&b| 4 * a + b)).collect();
    let tmat = DMatrix::from_fn(m, idx.len(), |r, c| tfull[(r, idx[c])]);
    let ginv_apply = |v: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for a in 0..m {
            let blk = v.rows(a * nb, nb).into_owned();
            out.rows_mut(a * nb, nb).copy_from(&chol.solve(&blk));
        }
        out
    };
    let bvec = DVector::from_fn(m * nb, |r, _| mo.rhs[r / nb][basis[r % nb]]);
    let p0 = ginv_apply(&bvec);
    let expand = |p: &DVector<f64>| -> DVector<f64> {
        let mut full = DVector::zeros(n);
        for (k, &i) in idx.iter().enumerate() {
            full[i] = p[k];
        }
        full
    };
    let qmin = residual_sq(u, region, expand(&p0).as_slice());
    let tau0 = &tmat * &p0;
    // S = T G⁻¹ Tᵀ
    let mut ginv_tt = DMatrix::zeros(m * nb, m);
    for r in 0..m {
        let col = ginv_apply(&tmat.row(r).transpose());
        ginv_tt.set_column(r, &col);
    }
    let s = &tmat * &ginv_tt;
    let full_rank = s.clone().cholesky();
    let l2_of = |extra: f64| ((qmin + extra).max(0.0) / mo.area).sqrt() / t;
    let consider = |best: &mut BestFit, p: DVector<f64>, l2: f64, tau: &DVector<f64>| {
        let data = data_term(&gs, tau);
        let value = l2 + data;
        if value < best.value {
            *best = BestFit {
                ell: params_from_blocks(m, &expand(&p)),
                value,
                l2_term: l2,
                data_term: data,
                degenerate,
            };
        }
    };
    match full_rank {
        Some(schol) => {
            let f = |tau: &DVector<f64>| {
                let d = tau - &tau0;
                l2_of(d.dot(&schol.solve(&d))) + data_term(&gs, tau)
            };
            let tau_star = minimize_tau(&f, &tau0, &gs, &schol, &tau0, qmin, mo.area, t);
            let d = &tau_star - &tau0;
            let p = &p0 + &ginv_tt * schol.solve(&d);
            let l2 = l2_of(d.dot(&schol.solve(&d)));
            consider(&mut best, p, l2, &tau_star);
        }
        None => {
            // 𝒯 vanishes on the admissible set: the L² optimum is best
            consider(&mut best, p0.clone(), l2_of(0.0), &tau0);
        }
    }
    best.degenerate = degenerate;
    Ok(best)
}

#[allow(clippy::too_many_arguments)]
fn minimize_tau(
    f: &dyn Fn(&DVector<f64>) -> f64,
    start: &DVector<f64>,
    gs: &[DVector<f64>],
    schol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    tau0: &DVector<f64>,
    qmin: f64,
    area: f64,
    t: f64,
) -> DVector<f64> {
    let m = start.len();
    if gs.is_empty() {
        return start.clone();
    }
    if m == 1 {
        let lo = gs.iter().map(|g| g[0]).fold(start[0], f64::min);
        let hi = gs.iter().map(|g| g[0]).fold(start[0], f64::max);
        let phi = |x: f64| f(&DVector::from_element(1, x));
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (lo, hi);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let (mut fc, mut fd) = (phi(c), phi(d));
        for _ in 0..200 {
            if b - a <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = phi(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = phi(d);
            }
        }
        let cands = [lo, hi, 0.5 * (a + b), start[0]];
        let x = cands
            .into_iter()
            .min_by(|x, y| phi(*x).total_cmp(&phi(*y)))
            .unwrap_or(start[0]);
        return DVector::from_element(1, x);
    }
    // subgradient descent with diminishing steps, keeping the best iterate
    let mut x = start.clone();
    let mut best = x.clone();
    let mut fbest = f(&x);
    let scale = gs.iter().map(|g| (g - start).norm()).fold(0.0, f64::max).max(1e-12);
    let mut prev = fbest;
    for k in 0..2000 {
        let d = &x - tau0;
        let sd = schol.solve(&d);
        let quad = (qmin + d.dot(&sd)).max(0.0);
        let mut grad = if quad > 0.0 {
            sd * (1.0 / (t * (area * quad).sqrt()))
        } else {
            DVector::zeros(m)
        };
        let (kmax, dmax) = gs
            .iter()
            .enumerate()
            .map(|(k, g)| (k, (&x - g).norm()))
            .fold((0, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        if dmax > 0.0 {
            grad += (&x - &gs[kmax]) / dmax;
        }
        let gn = grad.norm();
        if gn == 0.0 {
            break;
        }
        let step = scale / ((k + 1) as f64).sqrt();
        x -= grad * (step / gn);
        let fx = f(&x);
        if fx < fbest {
            fbest = fx;
            best = x.clone();
        }
        if k > 100 && (prev - fbest).abs() <= 1e-9 * fbest.abs().max(1e-300) && k % 100 == 0 {
            break;
        }
        if k % 100 == 0 {
            prev = fbest;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_interface_fitted_mesh, select_region, BoxDomain, InterfaceGeometry, RegionSelector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn mesh(h: f64) -> Arc<crate::mesh::Mesh> {
        Arc::new(
            build_interface_fitted_mesh(
                BoxDomain::new([-0.5, -0.5], [0.5, 0.5]).unwrap(),
                &InterfaceGeometry::flat(),
                h,
            )
            .unwrap(),
        )
    }

    fn row(v: [f64; 2]) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, 2, &v)
    }

    #[test]
    fn jump_check_examples() {
        let q = jump_condition_check(&row([1.0, 3.0]), &row([1.0, 1.0]), 1e-12).unwrap();
        assert_eq!(q[0], 2.0);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 4.0]);
        assert_eq!(jump_condition_check(&m, &m, 0.0).unwrap().norm(), 0.0);
        assert!(jump_condition_check(&row([2.0, 3.0]), &row([1.0, 1.0]), 1e-12).is_none());
    }

    #[test]
    fn jump_check_agrees_with_tangential_continuity() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let mm = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
            let mut mp = mm.clone();
            if rng.gen_bool(0.5) {
                mp[(0, 1)] += rng.gen_range(-1.0..1.0);
            } else {
                mp[(1, 0)] += rng.gen_range(0.1..1.0);
            }
            let continuous = (0..100).all(|k| {
                let x = DVector::from_column_slice(&[-1.0 + 0.02 * k as f64, 0.0]);
                (&mp * &x - &mm * &x).norm() < 1e-12
            });
            assert_eq!(continuous, jump_condition_check(&mp, &mm, 1e-12).is_some());
        }
    }

    #[test]
    fn transmission_examples() {
        let a3 = Tensor4::isotropic(1, 3.0);
        let ell = PiecewiseLinearSolution::new(row([0.0, 0.0]), DVector::from_element(1, 0.7), DVector::zeros(1)).unwrap();
        assert!((transmission_data(&ell, &a3, &Tensor4::isotropic(1, 1.0))[0] - 2.1).abs() < 1e-15);
        let same = PiecewiseLinearSolution::new(row([1.0, -2.0]), DVector::zeros(1), DVector::zeros(1)).unwrap();
        assert_eq!(transmission_data(&same, &a3, &a3)[0], 0.0);
    }

    #[test]
    fn lift_examples() {
        let ell = lift_from_g0(&DVector::from_element(1, 2.0), &Tensor4::isotropic(1, 1.0)).unwrap();
        assert_eq!(ell.eval([0.3, 0.25])[0], 0.5);
        assert_eq!(ell.eval([0.3, -0.25])[0], 0.0);
        let zero = lift_from_g0(&DVector::zeros(1), &Tensor4::isotropic(1, 5.0)).unwrap();
        assert_eq!(zero, PiecewiseLinearSolution::zero(1));
        let mut a = Tensor4::isotropic(2, 1.0);
        a.set(1, 1, 0, 0, 2.0);
        a.set(1, 1, 1, 1, 4.0);
        let ell = lift_from_g0(&DVector::from_column_slice(&[2.0, 4.0]), &a).unwrap();
        assert!((ell.q_d[0] - 1.0).abs() < 1e-15 && (ell.q_d[1] - 1.0).abs() < 1e-15);
        assert!(matches!(
            lift_from_g0(&DVector::zeros(1), &Tensor4::zeros(1)),
            Err(Error::Invariant(_))
        ));
    }

    #[test]
    fn stored_solutions_are_continuous() {
        let ell = PiecewiseLinearSolution::from_params(2, &[1.0, 2.0, -3.0, 0.5, 4.0, -1.0, 0.25, 0.75]).unwrap();
        assert!(ell.continuity_defect(50) <= 1e-12);
        assert_eq!(PiecewiseLinearSolution::from_params(2, &ell.params()).unwrap(), ell);
        assert!(jump_condition_check(&ell.m_plus(), &ell.m_minus, 0.0).is_some());
    }

    fn nodal(mesh: &Arc<crate::mesh::Mesh>, ell: &PiecewiseLinearSolution, c: [f64; 2]) -> FieldFunction {
        FieldFunction::interpolate(mesh.clone(), ell.m(), |x, o| {
            let v = ell.eval([x[0] - c[0], x[1] - c[1]]);
            o.copy_from_slice(v.as_slice());
        })
    }

    #[test]
    fn exact_piecewise_linear_has_zero_excess() {
        let mesh = mesh(1.0 / 32.0);
        let ap = Tensor4::isotropic(1, 3.0);
        let am = Tensor4::isotropic(1, 1.0);
        let ell = PiecewiseLinearSolution::from_params(1, &[0.4, -1.0, 2.0, 0.3]).unwrap();
        let u = nodal(&mesh, &ell, [0.0, 0.0]);
        let g = transmission_data(&ell, &ap, &am)[0];
        let region = select_region(&mesh, RegionSelector::cylinder([0.0, 0.0], 0.25));
        let gs = vec![g; mesh.interface_edges.len()];
        let fit = best_fit_excess(&u, &region, &gs, &ap, &am).unwrap();
        assert!(fit.value < 1e-8, "{}", fit.value);
        for (a, b) in fit.ell.params().iter().zip(ell.params()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn continuous_linear_field_has_zero_excess() {
        let mesh = mesh(1.0 / 16.0);
        let id = Tensor4::isotropic(1, 1.0);
        let u = FieldFunction::interpolate(mesh.clone(), 1, |x, o| o[0] = x[0]);
        let region = select_region(&mesh, RegionSelector::cylinder([0.0, 0.0], 0.25));
        let gs = vec![0.0; mesh.interface_edges.len()];
        let fit = best_fit_excess(&u, &region, &gs, &id, &id).unwrap();
        assert!(fit.value < 1e-10);
        assert!((fit.ell.m_minus[(0, 0)] - 1.0).abs() < 1e-10 && fit.ell.q_d[0].abs() < 1e-10);
    }

    #[test]
    fn zero_field_with_data_agrees_with_grid_search() {
        let mesh = mesh(1.0 / 16.0);
        let ap = Tensor4::isotropic(1, 3.0);
        let am = Tensor4::isotropic(1, 1.0);
        let u = FieldFunction::zeros(mesh.clone(), 1);
        let t = 0.25;
        let region = select_region(&mesh, RegionSelector::cylinder([0.0, 0.0], t));
        let g0 = 0.5;
        let gs = vec![g0; mesh.interface_edges.len()];
        let fit = best_fit_excess(&u, &region, &gs, &ap, &am).unwrap();
        assert!(fit.value <= g0 + 1e-14);
        // brute force at resolution 0.01 over (M_-2, q_d, q_0); the x_1 slope
        // only adds to the L² term
        let mut brute = f64::INFINITY;
        for i in 0..=60 {
            for k in 0..=60 {
                for l in 0..=20 {
                    let p = [0.0, -0.3 + 0.01 * i as f64, -0.1 + 0.01 * k as f64, -0.1 + 0.01 * l as f64];
                    let ell = PiecewiseLinearSolution::from_params(1, &p).unwrap();
                    let v = nodal(&mesh, &ell, [0.0, 0.0]);
                    let r = crate::fem::region_norms(&v, &region).unwrap();
                    let val = r.l2 / t + (g0 - transmission_data(&ell, &ap, &am)[0]).abs();
                    brute = brute.min(val);
                }
            }
        }
        assert!(fit.value <= brute + 1e-12, "{} vs {}", fit.value, brute);
        assert!(fit.value >= 0.98 * brute - 0.01, "{} vs {}", fit.value, brute);
    }

    #[test]
    fn system_fit_recovers_exact_solution() {
        let mesh = mesh(1.0 / 16.0);
        let ap = Tensor4::isotropic(2, 2.0);
        let am = Tensor4::isotropic(2, 1.0);
        let ell = PiecewiseLinearSolution::from_params(2, &[0.1, 0.2, -0.3, 0.4, 1.0, -1.0, 0.0, 2.0]).unwrap();
        let u = nodal(&mesh, &ell, [0.0, 0.0]);
        let tau = transmission_data(&ell, &ap, &am);
        let gs: Vec<f64> = (0..mesh.interface_edges.len()).flat_map(|_| tau.iter().copied()).collect();
        let region = select_region(&mesh, RegionSelector::cylinder([0.0, 0.0], 0.25));
        let fit = best_fit_excess(&u, &region, &gs, &ap, &am).unwrap();
        assert!(fit.value < 1e-8, "{}", fit.value);
    }

    #[test]
    fn one_sided_region_is_flagged() {
        let mesh = mesh(1.0 / 16.0);
        let id = Tensor4::isotropic(1, 1.0);
        let u = FieldFunction::interpolate(mesh.clone(), 1, |x, o| o[0] = x[0] + 2.0 * x[1]);
        let region = select_region(&mesh, RegionSelector::cylinder([0.0, 0.3], 0.1));
        let fit = best_fit_excess(&u, &region, &[], &id, &id).unwrap();
        assert!(fit.degenerate);
        assert!(fit.value < 1e-10);
    }
}
