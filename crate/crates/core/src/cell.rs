//! Periodic cell problems: correctors `χ_j^β`, the homogenized tensor `Â`,
//! the flux field `b` and the antisymmetric flux correctors `φ_kij`.
//!
//! The cell `[0, L1) x [0, L2)` carries a structured periodic P1 grid with
//! the same diagonal split as [`crate::mesh`]. Coefficients are frozen at
//! element centroids, so every cell quantity derived from gradients is
//! piecewise constant per element.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::p1_gradients;
use crate::sparse::{CgOptions, CsrMatrix, GridDofs, GridSolver};
use crate::tensor::{rayleigh_bounds, tensor_index, CoefficientTensor, Tensor4, DIM};

/// Default cell mesh size.
pub const DEFAULT_H_CELL: f64 = 1.0 / 128.0;

/// Structured periodic triangulation of a rectangular cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodicCell {
    pub size: [f64; 2],
    pub n: [usize; 2],
}

impl PeriodicCell {
    pub fn new(size: [f64; 2], h: f64) -> Result<Self> {
        if !(h > 0.0 && size[0] > 0.0 && size[1] > 0.0) {
            return Err(Error::Domain("cell size and mesh size must be positive".into()));
        }
        let n = [
            (size[0] / h).round().max(2.0) as usize,
            (size[1] / h).round().max(2.0) as usize,
        ];
        Ok(Self { size, n })
    }

    pub fn spacing(&self) -> [f64; 2] {
        [self.size[0] / self.n[0] as f64, self.size[1] / self.n[1] as f64]
    }

    /// Largest grid spacing.
    pub fn h(&self) -> f64 {
        let s = self.spacing();
        s[0].max(s[1])
    }

    pub fn node_count(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn triangle_count(&self) -> usize {
        2 * self.node_count()
    }

    #[inline]
    fn node(&self, i: usize, j: usize) -> usize {
        (j % self.n[1]) * self.n[0] + (i % self.n[0])
    }

    /// Node indices and unwrapped corner coordinates of triangle `t`.
    pub fn triangle(&self, t: usize) -> ([usize; 3], [[f64; 2]; 3]) {
        let c = t / 2;
        let (i, j) = (c % self.n[0], c / self.n[0]);
        let [hx, hy] = self.spacing();
        let p = |a: usize, b: usize| [a as f64 * hx, b as f64 * hy];
        if t.is_multiple_of(2) {
            (
                [self.node(i, j), self.node(i + 1, j), self.node(i + 1, j + 1)],
                [p(i, j), p(i + 1, j), p(i + 1, j + 1)],
            )
        } else {
            (
                [self.node(i, j), self.node(i + 1, j + 1), self.node(i, j + 1)],
                [p(i, j), p(i + 1, j + 1), p(i, j + 1)],
            )
        }
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let (_, p) = self.triangle(t);
        [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
    }

    pub fn triangle_area(&self) -> f64 {
        let [hx, hy] = self.spacing();
        0.5 * hx * hy
    }

    /// P1 gradients of the three hat functions; identical for all even and
    /// for all odd triangles.
    fn gradients(&self, t: usize) -> [[f64; 2]; 3] {
        p1_gradients(self.triangle(t).1).0
    }

    fn dofs(&self, m: usize) -> GridDofs {
        GridDofs {
            nx: self.n[0],
            ny: self.n[1],
            periodic: true,
            m,
        }
    }

    fn pattern(&self, m: usize) -> CsrMatrix {
        let n = self.node_count();
        let offsets: [(isize, isize); 7] = [(-1, -1), (0, -1), (-1, 0), (0, 0), (1, 0), (0, 1), (1, 1)];
        let mut rows = Vec::with_capacity(n * m);
        for j in 0..self.n[1] as isize {
            for i in 0..self.n[0] as isize {
                let mut cols = Vec::with_capacity(7 * m);
                for (di, dj) in offsets {
                    let w = self.node(
                        (i + di).rem_euclid(self.n[0] as isize) as usize,
                        (j + dj).rem_euclid(self.n[1] as isize) as usize,
                    );
                    cols.extend((0..m).map(|b| w * m + b));
                }
                for _ in 0..m {
                    rows.push(cols.clone());
                }
            }
        }
        CsrMatrix::from_pattern(n * m, n * m, rows)
    }

    /// Value of a nodal periodic field (`m` interleaved components) at `y`.
    pub fn interpolate_into(&self, nodal: &[f64], m: usize, y: [f64; 2], out: &mut [f64]) {
        let [hx, hy] = self.spacing();
        let u = y[0].rem_euclid(self.size[0]) / hx;
        let v = y[1].rem_euclid(self.size[1]) / hy;
        let i = (u.floor() as usize).min(self.n[0] - 1);
        let j = (v.floor() as usize).min(self.n[1] - 1);
        let (s, r) = (u - i as f64, v - j as f64);
        let (n00, n10, n11, n01) = (self.node(i, j), self.node(i + 1, j), self.node(i + 1, j + 1), self.node(i, j + 1));
        // lower-right triangle when s >= r
        let (w, nodes) = if s >= r {
            ([1.0 - s, s - r, r], [n00, n10, n11])
        } else {
            ([1.0 - r, s, r - s], [n00, n11, n01])
        };
        for (a, o) in out.iter_mut().enumerate().take(m) {
            *o = w[0] * nodal[nodes[0] * m + a] + w[1] * nodal[nodes[1] * m + a] + w[2] * nodal[nodes[2] * m + a];
        }
    }

    /// Element index containing `y` (periodically wrapped).
    pub fn element_at(&self, y: [f64; 2]) -> usize {
        let [hx, hy] = self.spacing();
        let u = y[0].rem_euclid(self.size[0]) / hx;
        let v = y[1].rem_euclid(self.size[1]) / hy;
        let i = (u.floor() as usize).min(self.n[0] - 1);
        let j = (v.floor() as usize).min(self.n[1] - 1);
        let c = j * self.n[0] + i;
        if u - i as f64 >= v - j as f64 {
            2 * c
        } else {
            2 * c + 1
        }
    }
}

/// Coefficient tensor frozen at the element centroids of a cell grid.
#[derive(Debug, Clone)]
pub struct CellTensor {
    pub cell: PeriodicCell,
    pub m: usize,
    /// `(2m)^2` entries per element.
    pub blocks: Vec<f64>,
}

impl CellTensor {
    pub fn sample(a: &CoefficientTensor, h_cell: f64) -> Result<Self> {
        let size = a.cell().unwrap_or([1.0, 1.0]);
        let cell = PeriodicCell::new(size, h_cell)?;
        let m = a.m();
        let bl = a.block_len();
        let mut blocks = vec![0.0; cell.triangle_count() * bl];
        for (t, chunk) in blocks.chunks_mut(bl).enumerate() {
            let c = cell.centroid(t);
            a.eval_into(c, chunk);
            if chunk.iter().any(|v| !v.is_finite()) {
                return Err(Error::Evaluation {
                    what: "cell tensor".into(),
                    x: c[0],
                    y: c[1],
                });
            }
        }
        Ok(Self { cell, m, blocks })
    }

    fn block(&self, t: usize) -> &[f64] {
        let bl = (DIM * self.m) * (DIM * self.m);
        &self.blocks[t * bl..(t + 1) * bl]
    }

    fn stiffness(&self) -> CsrMatrix {
        let m = self.m;
        let mut k = self.cell.pattern(m);
        let area = self.cell.triangle_area();
        let w = DIM * m;
        for t in 0..self.cell.triangle_count() {
            let (tri, _) = self.cell.triangle(t);
            let g = self.cell.gradients(t);
            let blk = self.block(t);
            for a in 0..3 {
                for b in 0..3 {
                    for al in 0..m {
                        for be in 0..m {
                            let mut acc = 0.0;
                            for i in 0..DIM {
                                for j in 0..DIM {
                                    acc += blk[(i * m + al) * w + j * m + be] * g[b][j] * g[a][i];
                                }
                            }
                            k.add_at(tri[a] * m + al, tri[b] * m + be, area * acc);
                        }
                    }
                }
            }
        }
        k
    }
}

/// Index of corrector `χ_j^β` in [`CellSolution::correctors`].
#[inline]
pub fn corrector_index(m: usize, j: usize, beta: usize) -> usize {
    j * m + beta
}

/// Index of `φ_kij^{αβ}` within one element's block of flux correctors.
#[inline]
pub fn flux_corrector_index(m: usize, k: usize, i: usize, j: usize, alpha: usize, beta: usize) -> usize {
    (((k * DIM + i) * DIM + j) * m + alpha) * m + beta
}

/// Diagnostics of a cell solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellDiagnostics {
    /// Largest relative CG residual over all corrector solves.
    pub corrector_residual: f64,
    /// Largest `|mean χ| / ‖χ‖` after mean removal.
    pub corrector_mean: f64,
    /// `|∫_Y b| / ‖b‖`, worst component.
    pub flux_mean: f64,
    /// Extremal Rayleigh quotients of `Â`.
    pub homogenized_bounds: (f64, f64),
    /// `Â` satisfies the ellipticity bounds of the input tensor.
    pub homogenized_elliptic: bool,
}

/// Correctors, homogenized tensor and flux field of one periodic tensor.
#[derive(Debug, Clone)]
pub struct CellSolution {
    pub cell: PeriodicCell,
    pub m: usize,
    /// `χ_j^β` as nodal arrays with `m` interleaved components `γ`, indexed
    /// by [`corrector_index`].
    pub correctors: Vec<Vec<f64>>,
    pub homogenized: Tensor4,
    /// `b_ij^{αβ}` per element, `(2m)^2` entries laid out like a tensor block.
    pub flux: Vec<f64>,
    pub flux_correctors: Option<FluxCorrectors>,
    pub diagnostics: CellDiagnostics,
    lambda: f64,
}

/// Solves the `d m` periodic corrector problems
/// `∇·(A∇χ_j^β) = −∇·(A e_j^β)` on a cell grid of size `h_cell`.
pub fn solve_correctors(a: &CoefficientTensor, h_cell: f64, opts: &CgOptions) -> Result<(CellTensor, Vec<Vec<f64>>, f64)> {
    let ct = CellTensor::sample(a, h_cell)?;
    let m = ct.m;
    let cell = ct.cell;
    let k = ct.stiffness();
    let solver = GridSolver::new(k, cell.dofs(m), *opts)?;
    let area = cell.triangle_area();
    let w = DIM * m;
    let results: Vec<Result<(Vec<f64>, f64)>> = (0..DIM * m)
        .into_par_iter()
        .map(|jb| {
            let (j, beta) = (jb / m, jb % m);
            let mut rhs = vec![0.0; cell.node_count() * m];
            for t in 0..cell.triangle_count() {
                let (tri, _) = cell.triangle(t);
                let g = cell.gradients(t);
                let blk = ct.block(t);
                for (kk, &v) in tri.iter().enumerate() {
                    for al in 0..m {
                        let mut acc = 0.0;
                        for i in 0..DIM {
                            acc += blk[(i * m + al) * w + j * m + beta] * g[kk][i];
                        }
                        rhs[v * m + al] -= area * acc;
                    }
                }
            }
            let (x, stats) = solver.solve(&rhs)?;
            Ok((x, stats.relative_residual))
        })
        .collect();
    let mut correctors = Vec::with_capacity(DIM * m);
    let mut worst = 0.0f64;
    for r in results {
        let (x, res) = r?;
        worst = worst.max(res);
        correctors.push(x);
    }
    if worst > opts.tolerance * 10.0 {
        return Err(Error::Solver {
            iterations: 0,
            residual: worst,
            history: vec![worst],
        });
    }
    Ok((ct, correctors, worst))
}

/// `a_ij^{αβ} + a_ik^{αγ} ∂_k χ_j^{γβ}` on element `t`, into `out`.
fn corrected_block(ct: &CellTensor, correctors: &[Vec<f64>], t: usize, out: &mut [f64]) {
    let m = ct.m;
    let (tri, _) = ct.cell.triangle(t);
    let g = ct.cell.gradients(t);
    let blk = ct.block(t);
    out.copy_from_slice(blk);
    for j in 0..DIM {
        for beta in 0..m {
            let chi = &correctors[corrector_index(m, j, beta)];
            // grad[γ][k] = ∂_k χ_j^{γβ}
            let mut grad = vec![[0.0; 2]; m];
            for (kk, &v) in tri.iter().enumerate() {
                for (ga, gr) in grad.iter_mut().enumerate() {
                    gr[0] += chi[v * m + ga] * g[kk][0];
                    gr[1] += chi[v * m + ga] * g[kk][1];
                }
            }
            for i in 0..DIM {
                for al in 0..m {
                    let mut acc = 0.0;
                    for k in 0..DIM {
                        for (ga, gr) in grad.iter().enumerate() {
                            acc += blk[tensor_index(m, i, k, al, ga)] * gr[k];
                        }
                    }
                    out[tensor_index(m, i, j, al, beta)] += acc;
                }
            }
        }
    }
}

/// `Â = ⨍_Y (a + a ∇χ)` computed element-wise.
pub fn homogenized_tensor(ct: &CellTensor, correctors: &[Vec<f64>]) -> Tensor4 {
    let bl = (DIM * ct.m) * (DIM * ct.m);
    let mut sum = vec![0.0; bl];
    let mut buf = vec![0.0; bl];
    let nt = ct.cell.triangle_count();
    for t in 0..nt {
        corrected_block(ct, correctors, t, &mut buf);
        sum.iter_mut().zip(&buf).for_each(|(s, b)| *s += b);
    }
    sum.iter_mut().for_each(|s| *s /= nt as f64);
    Tensor4::from_block(ct.m, sum).expect("block length matches m")
}

/// `b = a + a∇χ − Â` per element.
pub fn flux_field(ct: &CellTensor, correctors: &[Vec<f64>], hom: &Tensor4) -> Vec<f64> {
    let bl = (DIM * ct.m) * (DIM * ct.m);
    let mut out = vec![0.0; ct.cell.triangle_count() * bl];
    for (t, chunk) in out.chunks_mut(bl).enumerate() {
        corrected_block(ct, correctors, t, chunk);
        chunk.iter_mut().zip(hom.as_slice()).for_each(|(c, h)| *c -= h);
    }
    out
}

/// Antisymmetric potentials `φ_kij^{αβ}` of the flux field, piecewise
/// constant per element.
#[derive(Debug, Clone)]
pub struct FluxCorrectors {
    pub m: usize,
    /// `(2)^3 m^2` entries per element, indexed by [`flux_corrector_index`].
    pub values: Vec<f64>,
    /// Lumped dual norm of the weak residual of `∂_k φ_kij = b_ij`, worst
    /// over `(i, j, α, β)`.
    pub residual: f64,
    /// `‖b‖_{L²(Y)}` over all components.
    pub flux_norm: f64,
}

impl FluxCorrectors {
    pub fn element(&self, t: usize) -> &[f64] {
        let bl = DIM * DIM * DIM * self.m * self.m;
        &self.values[t * bl..(t + 1) * bl]
    }

    /// Largest `|φ_kij + φ_ikj|` over all entries.
    pub fn antisymmetry_defect(&self) -> f64 {
        let m = self.m;
        let bl = DIM * DIM * DIM * m * m;
        let mut worst = 0.0f64;
        for e in self.values.chunks(bl) {
            for k in 0..DIM {
                for i in 0..DIM {
                    for j in 0..DIM {
                        for a in 0..m {
                            for b in 0..m {
                                let s = e[flux_corrector_index(m, k, i, j, a, b)] + e[flux_corrector_index(m, i, k, j, a, b)];
                                worst = worst.max(s.abs());
                            }
                        }
                    }
                }
            }
        }
        worst
    }
}

/// Builds `φ_kij = ∂_k f_ij − ∂_i f_kj` from periodic Poisson solves
/// `Δ f_ij^{αβ} = b_ij^{αβ}`.
pub fn flux_correctors(cell: &PeriodicCell, m: usize, b: &[f64], opts: &CgOptions) -> Result<FluxCorrectors> {
    let bl = (DIM * m) * (DIM * m);
    let nt = cell.triangle_count();
    if b.len() != nt * bl {
        return Err(Error::Data("flux field does not match the cell grid".into()));
    }
    let area = cell.triangle_area();
    let norm_sq: f64 = b.iter().map(|v| v * v).sum::<f64>() * area;
    let flux_norm = norm_sq.sqrt();
    for c in 0..bl {
        let mean: f64 = b.iter().skip(c).step_by(bl).sum::<f64>() * area;
        if mean.abs() > 1e-8 * flux_norm.max(1e-6) * (cell.size[0] * cell.size[1]).sqrt() {
            return Err(Error::Domain(format!(
                "flux field component {c} has nonzero cell integral {mean:.3e}"
            )));
        }
    }
    let lap = CellTensor {
        cell: *cell,
        m: 1,
        blocks: std::iter::repeat_n([1.0, 0.0, 0.0, 1.0], nt).flatten().collect(),
    };
    let solver = GridSolver::new(lap.stiffness(), cell.dofs(1), *opts)?;
    // f_ij^{αβ} for every block entry c = tensor_index(m, i, j, α, β)
    let potentials: Vec<Result<Vec<f64>>> = (0..bl)
        .into_par_iter()
        .map(|c| {
            let mut rhs = vec![0.0; cell.node_count()];
            for t in 0..nt {
                let v = b[t * bl + c];
                if v != 0.0 {
                    let (tri, _) = cell.triangle(t);
                    for &n in &tri {
                        rhs[n] -= v * area / 3.0;
                    }
                }
            }
            Ok(solver.solve(&rhs)?.0)
        })
        .collect();
    let potentials: Vec<Vec<f64>> = potentials.into_iter().collect::<Result<_>>()?;
    let pl = DIM * DIM * DIM * m * m;
    let mut values = vec![0.0; nt * pl];
    let grad = |f: &[f64], t: usize| {
        let (tri, _) = cell.triangle(t);
        let g = cell.gradients(t);
        let mut out = [0.0; 2];
        for (k, &n) in tri.iter().enumerate() {
            out[0] += f[n] * g[k][0];
            out[1] += f[n] * g[k][1];
        }
        out
    };
    for t in 0..nt {
        let e = &mut values[t * pl..(t + 1) * pl];
        for i in 0..DIM {
            for j in 0..DIM {
                for a in 0..m {
                    for bb in 0..m {
                        let gij = grad(&potentials[tensor_index(m, i, j, a, bb)], t);
                        for k in 0..DIM {
                            let gkj = grad(&potentials[tensor_index(m, k, j, a, bb)], t);
                            e[flux_corrector_index(m, k, i, j, a, bb)] = gij[k] - gkj[i];
                        }
                    }
                }
            }
        }
    }
    // weak residual R_v = ∫ b_ij v + Σ_k ∫ φ_kij ∂_k v, lumped dual norm
    let lumped = 6.0 * area / 3.0;
    let mut residual = 0.0f64;
    let mut r = vec![0.0; cell.node_count()];
    for i in 0..DIM {
        for j in 0..DIM {
            for a in 0..m {
                for bb in 0..m {
                    r.iter_mut().for_each(|x| *x = 0.0);
                    for t in 0..nt {
                        let (tri, _) = cell.triangle(t);
                        let g = cell.gradients(t);
                        let bv = b[t * bl + tensor_index(m, i, j, a, bb)];
                        let e = &values[t * pl..(t + 1) * pl];
                        for (kk, &n) in tri.iter().enumerate() {
                            let mut acc = bv / 3.0;
                            for k in 0..DIM {
                                acc += e[flux_corrector_index(m, k, i, j, a, bb)] * g[kk][k];
                            }
                            r[n] += area * acc;
                        }
                    }
                    let dual = (r.iter().map(|x| x * x).sum::<f64>() / lumped).sqrt();
                    residual = residual.max(dual);
                }
            }
        }
    }
    Ok(FluxCorrectors {
        m,
        values,
        residual,
        flux_norm,
    })
}

impl CellSolution {
    /// Correctors, `Â` and `b` for `a` on a cell grid of size `h_cell`.
    pub fn compute(a: &CoefficientTensor, h_cell: f64, opts: &CgOptions) -> Result<Self> {
        let (ct, mut correctors, residual) = solve_correctors(a, h_cell, opts)?;
        let m = ct.m;
        // zero cell mean: the grid is uniform, so the nodal mean is the P1 mean
        let mut worst_mean = 0.0f64;
        for chi in correctors.iter_mut() {
            crate::sparse::project_mean(chi, m);
            let norm = chi.iter().map(|v| v * v).sum::<f64>().sqrt();
            for g in 0..m {
                let mean = chi.iter().skip(g).step_by(m).sum::<f64>() / ct.cell.node_count() as f64;
                if norm > 0.0 {
                    worst_mean = worst_mean.max(mean.abs() * (ct.cell.node_count() as f64).sqrt() / norm);
                }
            }
        }
        let homogenized = homogenized_tensor(&ct, &correctors);
        let flux = flux_field(&ct, &correctors, &homogenized);
        let bl = (DIM * m) * (DIM * m);
        let area = ct.cell.triangle_area();
        let bnorm = (flux.iter().map(|v| v * v).sum::<f64>() * area).sqrt();
        let mut flux_mean = 0.0f64;
        if bnorm > 0.0 {
            for c in 0..bl {
                let s: f64 = flux.iter().skip(c).step_by(bl).sum::<f64>() * area;
                flux_mean = flux_mean.max(s.abs() / bnorm);
            }
        }
        let bounds = rayleigh_bounds(m, homogenized.as_slice());
        let lambda = a.lambda();
        let elliptic = bounds.0 >= (1.0 / lambda) * (1.0 - 1e-9) && bounds.1 <= lambda * (1.0 + 1e-9);
        Ok(Self {
            cell: ct.cell,
            m,
            correctors,
            homogenized,
            flux,
            flux_correctors: None,
            diagnostics: CellDiagnostics {
                corrector_residual: residual,
                corrector_mean: worst_mean,
                flux_mean,
                homogenized_bounds: bounds,
                homogenized_elliptic: elliptic,
            },
            lambda,
        })
    }

    /// Also computes the flux correctors.
    pub fn with_flux_correctors(mut self, opts: &CgOptions) -> Result<Self> {
        self.flux_correctors = Some(flux_correctors(&self.cell, self.m, &self.flux, opts)?);
        Ok(self)
    }

    pub fn h_cell(&self) -> f64 {
        self.cell.h()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `χ_j^{γβ}(y)` for all `(j, β, γ)`, written to
    /// `out[corrector_index(m, j, β) * m + γ]`.
    pub fn correctors_at(&self, y: [f64; 2], out: &mut [f64]) {
        let m = self.m;
        for (c, chi) in self.correctors.iter().enumerate() {
            self.cell.interpolate_into(chi, m, y, &mut out[c * m..(c + 1) * m]);
        }
    }

    /// `b_ij^{αβ}` on the element containing `y`.
    pub fn flux_at(&self, y: [f64; 2]) -> &[f64] {
        let bl = (DIM * self.m) * (DIM * self.m);
        let t = self.cell.element_at(y);
        &self.flux[t * bl..(t + 1) * bl]
    }

    /// `Â` as a `2m x 2m` table, rows `(i, α)`, columns `(j, β)`.
    pub fn table(&self) -> String {
        let n = DIM * self.m;
        let s = self.homogenized.as_slice();
        let mut out = String::new();
        for r in 0..n {
            let row: Vec<String> = (0..n).map(|c| format!("{:>16.10}", s[r * n + c])).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    /// Writes `summary.json`, one nodal file per corrector and `flux.txt`.
    pub fn write_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let summary = serde_json::json!({
            "m": self.m,
            "cell": self.cell,
            "h_cell": self.h_cell(),
            "homogenized": self.homogenized.as_slice(),
            "diagnostics": self.diagnostics,
            "flux_corrector_residual": self.flux_correctors.as_ref().map(|f| f.residual),
        });
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
        for j in 0..DIM {
            for b in 0..self.m {
                let chi = &self.correctors[corrector_index(self.m, j, b)];
                let mut s = format!("periodic-nodal {} {} {}\n", self.cell.n[0], self.cell.n[1], self.m);
                for chunk in chi.chunks(self.m) {
                    let line: Vec<String> = chunk.iter().map(|v| format!("{v:.17e}")).collect();
                    s.push_str(&line.join(" "));
                    s.push('\n');
                }
                std::fs::write(dir.join(format!("chi_{}_{}.txt", j + 1, b + 1)), s)?;
            }
        }
        let bl = (DIM * self.m) * (DIM * self.m);
        let mut s = format!("elements {} {}\n", self.cell.triangle_count(), bl);
        for chunk in self.flux.chunks(bl) {
            let line: Vec<String> = chunk.iter().map(|v| format!("{v:.17e}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        std::fs::write(dir.join("flux.txt"), s)
    }
}

/// Harmonic and arithmetic means of a one-dimensional profile on `[0, 1)`
/// by the midpoint rule with `n` points: the closed-form homogenized
/// coefficients of a scalar laminate across and along its layers.
pub fn laminate_means(a: impl Fn(f64) -> f64, n: usize) -> (f64, f64) {
    let (mut inv, mut sum) = (0.0, 0.0);
    for k in 0..n {
        let y = (k as f64 + 0.5) / n as f64;
        let v = a(y);
        inv += 1.0 / v;
        sum += v;
    }
    (n as f64 / inv, sum / n as f64)
}
