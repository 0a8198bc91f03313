//! Compressed sparse row matrices and the preconditioned conjugate gradient
//! solver shared by every finite element solve in the crate.
//!
//! Two preconditioners are available: diagonal (Jacobi) scaling and a
//! Galerkin multigrid V-cycle built on the structured vertex topology of the
//! meshes produced by [`crate::mesh`]. Both are symmetric, so CG stays valid.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Square or rectangular matrix in CSR layout.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a zero matrix with the given sparsity pattern. Each row's column
    /// list is sorted and deduplicated.
    pub fn from_pattern(nrows: usize, ncols: usize, mut rows: Vec<Vec<usize>>) -> Self {
        assert_eq!(rows.len(), nrows);
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        let total: usize = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(total);
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            indices.extend(row.iter().map(|&c| {
                debug_assert!(c < ncols);
                c as u32
            }));
            indptr.push(indices.len());
        }
        let nnz = indices.len();
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values: vec![0.0; nnz],
        }
    }

    /// Builds a matrix from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); nrows];
        for &(r, c, _) in triplets {
            rows[r].push(c);
        }
        let mut m = Self::from_pattern(nrows, ncols, rows);
        for &(r, c, v) in triplets {
            m.add_at(r, c, v);
        }
        m
    }

    /// Zero matrix from a ready CSR structure with sorted, unique columns.
    pub(crate) fn from_structure(nrows: usize, ncols: usize, indptr: Vec<usize>, indices: Vec<u32>) -> Self {
        debug_assert_eq!(indptr.len(), nrows + 1);
        let nnz = indices.len();
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values: vec![0.0; nnz],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn position(&self, row: usize, col: usize) -> Option<usize> {
        let (lo, hi) = (self.indptr[row], self.indptr[row + 1]);
        let target = col as u32;
        self.indices[lo..hi]
            .binary_search(&target)
            .ok()
            .map(|k| lo + k)
    }

    /// Adds `value` to entry (row, col). Panics if the entry is outside the pattern.
    #[inline]
    pub fn add_at(&mut self, row: usize, col: usize, value: f64) {
        let k = self
            .position(row, col)
            .unwrap_or_else(|| panic!("entry ({row}, {col}) not in sparsity pattern"));
        self.values[k] += value;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.position(row, col).map_or(0.0, |k| self.values[k])
    }

    /// Iterates over the stored entries of one row.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.indptr[row], self.indptr[row + 1]);
        self.indices[lo..hi]
            .iter()
            .zip(&self.values[lo..hi])
            .map(|(&c, &v)| (c as usize, v))
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.indptr[r], self.indptr[r + 1]);
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.values[k] * x[self.indices[k] as usize];
            }
            *yr = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.get(r, r)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c as usize + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0u32; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k] as usize;
                let dst = next[c];
                indices[dst] = r as u32;
                values[dst] = self.values[k];
                next[c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            values,
        }
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &CsrMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0; other.ncols];
        let mut marker = vec![usize::MAX; other.ncols];
        let mut cols: Vec<usize> = Vec::new();
        for r in 0..self.nrows {
            cols.clear();
            for k in self.indptr[r]..self.indptr[r + 1] {
                let mid = self.indices[k] as usize;
                let a = self.values[k];
                for kk in other.indptr[mid]..other.indptr[mid + 1] {
                    let c = other.indices[kk] as usize;
                    if marker[c] != r {
                        marker[c] = r;
                        acc[c] = 0.0;
                        cols.push(c);
                    }
                    acc[c] += a * other.values[kk];
                }
            }
            cols.sort_unstable();
            for &c in &cols {
                indices.push(c as u32);
                values.push(acc[c]);
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: self.nrows,
            ncols: other.ncols,
            indptr,
            indices,
            values,
        }
    }

    /// Principal submatrix on `keep` (indices into rows/cols, ascending).
    pub fn principal_submatrix(&self, keep: &[usize]) -> Self {
        let mut map = vec![u32::MAX; self.ncols];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new as u32;
        }
        let mut indptr = Vec::with_capacity(keep.len() + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for &r in keep {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = map[self.indices[k] as usize];
                if c != u32::MAX {
                    indices.push(c);
                    values.push(self.values[k]);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: keep.len(),
            ncols: keep.len(),
            indptr,
            indices,
            values,
        }
    }

    /// Largest |A_ij - A_ji| relative to the largest |A_ij|.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst / scale
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                d[(r, c)] += v;
            }
        }
        d
    }
}

/// Something that approximately inverts a symmetric positive operator.
pub trait Preconditioner: Send + Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// Diagonal scaling.
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &CsrMatrix) -> Self {
        let inv_diag = a
            .diagonal()
            .into_iter()
            .map(|d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
            .collect();
        Self { inv_diag }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

/// Structured vertex grid that carries unknowns.
///
/// `Dirichlet` grids number the interior vertices `(i, j)` with
/// `1 <= i < nx`, `1 <= j < ny` lexicographically (j slowest). `Periodic`
/// grids number all `nx * ny` vertices with wraparound. Each vertex carries
/// `m` interleaved components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridDofs {
    pub nx: usize,
    pub ny: usize,
    pub periodic: bool,
    pub m: usize,
}

impl GridDofs {
    pub fn node_count(&self) -> usize {
        if self.periodic {
            self.nx * self.ny
        } else {
            (self.nx - 1) * (self.ny - 1)
        }
    }

    pub fn dof_count(&self) -> usize {
        self.node_count() * self.m
    }

    /// Node number of vertex (i, j) or None for a Dirichlet boundary vertex.
    fn node(&self, i: isize, j: isize) -> Option<usize> {
        if self.periodic {
            let i = i.rem_euclid(self.nx as isize) as usize;
            let j = j.rem_euclid(self.ny as isize) as usize;
            Some(j * self.nx + i)
        } else {
            if i <= 0 || j <= 0 || i >= self.nx as isize || j >= self.ny as isize {
                return None;
            }
            Some((j as usize - 1) * (self.nx - 1) + (i as usize - 1))
        }
    }

    fn can_coarsen(&self) -> bool {
        let min_cells = 4;
        self.nx.is_multiple_of(2) && self.ny.is_multiple_of(2) && self.nx >= min_cells && self.ny >= min_cells
    }

    fn coarse(&self) -> Self {
        Self {
            nx: self.nx / 2,
            ny: self.ny / 2,
            ..*self
        }
    }

    /// Linear interpolation from the coarse grid (half resolution) to this
    /// grid, consistent with triangles split along the (i, j)-(i+1, j+1)
    /// diagonal.
    pub fn prolongation(&self) -> CsrMatrix {
        let coarse = self.coarse();
        let m = self.m;
        let mut triplets = Vec::with_capacity(self.dof_count() * 2);
        let (imax, jmax, start) = if self.periodic {
            (self.nx as isize, self.ny as isize, 0)
        } else {
            (self.nx as isize, self.ny as isize, 1)
        };
        for j in start..jmax {
            for i in start..imax {
                let Some(fine) = self.node(i, j) else { continue };
                let parents: [(isize, isize); 2] = match (i % 2 == 0, j % 2 == 0) {
                    (true, true) => [(i / 2, j / 2), (i / 2, j / 2)],
                    (false, true) => [((i - 1) / 2, j / 2), ((i + 1) / 2, j / 2)],
                    (true, false) => [(i / 2, (j - 1) / 2), (i / 2, (j + 1) / 2)],
                    (false, false) => [((i - 1) / 2, (j - 1) / 2), ((i + 1) / 2, (j + 1) / 2)],
                };
                for (ci, cj) in parents {
                    if let Some(c) = coarse.node(ci, cj) {
                        for a in 0..m {
                            triplets.push((fine * m + a, c * m + a, 0.5));
                        }
                    }
                }
            }
        }
        CsrMatrix::from_triplets(self.dof_count(), coarse.dof_count(), &triplets)
    }
}

struct Level {
    a: CsrMatrix,
    inv_diag: Vec<f64>,
    p: Option<CsrMatrix>,
    r: Option<CsrMatrix>,
}

enum CoarseSolve {
    Dense(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Smooth(usize),
}

/// Galerkin multigrid V-cycle (symmetric Gauss-Seidel smoothing).
pub struct Multigrid {
    levels: Vec<Level>,
    coarse: CoarseSolve,
    sweeps: usize,
    null_components: Option<usize>,
}

const DENSE_COARSE_LIMIT: usize = 1500;

impl Multigrid {
    /// Builds the hierarchy for `a`, whose unknowns are laid out as `dofs`.
    /// Periodic grids are treated as singular with per-component constants
    /// in the null space.
    pub fn new(a: CsrMatrix, dofs: GridDofs) -> Result<Self> {
        assert_eq!(a.nrows(), dofs.dof_count());
        let mut levels = Vec::new();
        let mut grid = dofs;
        let mut current = a;
        loop {
            let inv_diag = current
                .diagonal()
                .into_iter()
                .map(|d| if d > 0.0 { 1.0 / d } else { 0.0 })
                .collect();
            if grid.can_coarsen() && grid.dof_count() > DENSE_COARSE_LIMIT / 2 {
                let p = grid.prolongation();
                let r = p.transpose();
                let coarse = r.matmul(&current).matmul(&p);
                levels.push(Level {
                    a: current,
                    inv_diag,
                    p: Some(p),
                    r: Some(r),
                });
                current = coarse;
                grid = grid.coarse();
            } else {
                levels.push(Level {
                    a: current,
                    inv_diag,
                    p: None,
                    r: None,
                });
                break;
            }
        }
        let last = &levels.last().expect("at least one level").a;
        let n = last.nrows();
        let coarse = if n <= DENSE_COARSE_LIMIT {
            let mut dense = last.to_dense();
            if dofs.periodic {
                // pin the constant modes
                let m = dofs.m;
                let scale = dense.diagonal().max();
                for a in 0..m {
                    for r in (a..n).step_by(m) {
                        for c in (a..n).step_by(m) {
                            dense[(r, c)] += scale / (n / m) as f64;
                        }
                    }
                }
            }
            let chol = nalgebra::Cholesky::new(dense).ok_or_else(|| {
                Error::Invariant("coarse operator is not positive definite".into())
            })?;
            CoarseSolve::Dense(chol)
        } else {
            CoarseSolve::Smooth(40)
        };
        Ok(Self {
            levels,
            coarse,
            sweeps: 2,
            null_components: dofs.periodic.then_some(dofs.m),
        })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    fn gauss_seidel(level: &Level, b: &[f64], x: &mut [f64], forward: bool) {
        let a = &level.a;
        let n = a.nrows();
        let mut step = |r: usize| {
            let mut acc = b[r];
            for (c, v) in a.row(r) {
                if c != r {
                    acc -= v * x[c];
                }
            }
            x[r] = acc * level.inv_diag[r];
        };
        if forward {
            (0..n).for_each(&mut step);
        } else {
            (0..n).rev().for_each(&mut step);
        }
    }

    fn cycle(&self, k: usize, b: &[f64], x: &mut [f64]) {
        let level = &self.levels[k];
        x.iter_mut().for_each(|v| *v = 0.0);
        let (Some(p), Some(r)) = (&level.p, &level.r) else {
            match &self.coarse {
                CoarseSolve::Dense(chol) => {
                    let mut rhs = DVector::from_column_slice(b);
                    if let Some(m) = self.null_components {
                        project_mean(rhs.as_mut_slice(), m);
                    }
                    let sol = chol.solve(&rhs);
                    x.copy_from_slice(sol.as_slice());
                }
                CoarseSolve::Smooth(n) => {
                    for _ in 0..*n {
                        Self::gauss_seidel(level, b, x, true);
                        Self::gauss_seidel(level, b, x, false);
                    }
                }
            }
            return;
        };
        for _ in 0..self.sweeps {
            Self::gauss_seidel(level, b, x, true);
        }
        let mut res = level.a.mul_vec(x);
        res.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
        let bc = r.mul_vec(&res);
        let mut xc = vec![0.0; bc.len()];
        self.cycle(k + 1, &bc, &mut xc);
        let corr = p.mul_vec(&xc);
        x.iter_mut().zip(&corr).for_each(|(xi, ci)| *xi += ci);
        for _ in 0..self.sweeps {
            Self::gauss_seidel(level, b, x, false);
        }
    }
}

impl Preconditioner for Multigrid {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.cycle(0, r, z);
    }
}

/// Removes the mean of each of the `m` interleaved components.
pub fn project_mean(v: &mut [f64], m: usize) {
    let nodes = v.len() / m;
    if nodes == 0 {
        return;
    }
    for a in 0..m {
        let mean = v.iter().skip(a).step_by(m).sum::<f64>() / nodes as f64;
        v.iter_mut().skip(a).step_by(m).for_each(|x| *x -= mean);
    }
}

/// Which preconditioner the CG solver uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreconditionerKind {
    Jacobi,
    Multigrid,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CgOptions {
    /// Relative residual target ‖b − Ax‖ / ‖b‖.
    pub tolerance: f64,
    /// Overrides the default iteration cap `20 sqrt(n) + 10^4`.
    pub max_iterations: Option<usize>,
    pub preconditioner: PreconditionerKind,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: None,
            preconditioner: PreconditionerKind::Multigrid,
        }
    }
}

impl CgOptions {
    pub fn iteration_cap(&self, n: usize) -> usize {
        self.max_iterations
            .unwrap_or_else(|| (20.0 * (n as f64).sqrt()) as usize + 10_000)
    }
}

/// Convergence record of one CG solve.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients. When `null_components` is set the
/// operator is treated as singular with per-component constants in its null
/// space; right-hand side, residuals and iterates are projected to mean zero.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    precond: &dyn Preconditioner,
    opts: &CgOptions,
    null_components: Option<usize>,
) -> Result<SolveStats> {
    let n = b.len();
    let mut rhs = b.to_vec();
    if let Some(m) = null_components {
        project_mean(&mut rhs, m);
        project_mean(x, m);
    }
    let bnorm = dot(&rhs, &rhs).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats::default());
    }
    let mut r = a.mul_vec(x);
    r.iter_mut().zip(&rhs).for_each(|(ri, bi)| *ri = bi - *ri);
    if let Some(m) = null_components {
        project_mean(&mut r, m);
    }
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    if let Some(m) = null_components {
        project_mean(&mut z, m);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let cap = opts.iteration_cap(n);
    let mut history = Vec::new();
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    history.push(rel);
    let mut it = 0;
    while rel > opts.tolerance {
        if it >= cap {
            return Err(Error::Solver {
                iterations: it,
                residual: rel,
                history,
            });
        }
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Solver {
                iterations: it,
                residual: rel,
                history,
            });
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        if let Some(m) = null_components {
            project_mean(&mut r, m);
        }
        precond.apply(&r, &mut z);
        if let Some(m) = null_components {
            project_mean(&mut z, m);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
        it += 1;
        rel = dot(&r, &r).sqrt() / bnorm;
        history.push(rel);
    }
    // guard against drift of the recursive residual
    let mut true_r = a.mul_vec(x);
    true_r.iter_mut().zip(&rhs).for_each(|(ri, bi)| *ri = bi - *ri);
    if let Some(m) = null_components {
        project_mean(&mut true_r, m);
        project_mean(x, m);
    }
    let true_rel = dot(&true_r, &true_r).sqrt() / bnorm;
    Ok(SolveStats {
        iterations: it,
        relative_residual: true_rel.max(rel),
        history,
    })
}

/// Solves `a x = b` on a structured grid, choosing the preconditioner from
/// `opts`.
pub fn solve_grid_system(
    a: CsrMatrix,
    b: &[f64],
    dofs: GridDofs,
    opts: &CgOptions,
) -> Result<(Vec<f64>, SolveStats)> {
    let mut x = vec![0.0; b.len()];
    let null = dofs.periodic.then_some(dofs.m);
    let stats = match opts.preconditioner {
        PreconditionerKind::Jacobi => {
            let pre = Jacobi::new(&a);
            pcg(&a, b, &mut x, &pre, opts, null)?
        }
        PreconditionerKind::Multigrid => {
            let mg = Multigrid::new(a, dofs)?;
            let a0 = &mg.levels[0].a;
            pcg(a0, b, &mut x, &mg, opts, null)?
        }
    };
    Ok((x, stats))
}

/// A reusable factorized solver for many right-hand sides on one grid.
pub struct GridSolver {
    mg: Option<Multigrid>,
    jacobi: Option<(CsrMatrix, Jacobi)>,
    dofs: GridDofs,
    opts: CgOptions,
}

impl GridSolver {
    pub fn new(a: CsrMatrix, dofs: GridDofs, opts: CgOptions) -> Result<Self> {
        Ok(match opts.preconditioner {
            PreconditionerKind::Multigrid => Self {
                mg: Some(Multigrid::new(a, dofs)?),
                jacobi: None,
                dofs,
                opts,
            },
            PreconditionerKind::Jacobi => {
                let pre = Jacobi::new(&a);
                Self {
                    mg: None,
                    jacobi: Some((a, pre)),
                    dofs,
                    opts,
                }
            }
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        match (&self.mg, &self.jacobi) {
            (Some(mg), _) => &mg.levels[0].a,
            (None, Some((a, _))) => a,
            _ => unreachable!(),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        let mut x = vec![0.0; b.len()];
        let null = self.dofs.periodic.then_some(self.dofs.m);
        let stats = match (&self.mg, &self.jacobi) {
            (Some(mg), _) => pcg(&mg.levels[0].a, b, &mut x, mg, &self.opts, null)?,
            (None, Some((a, pre))) => pcg(a, b, &mut x, pre, &self.opts, null)?,
            _ => unreachable!(),
        };
        Ok((x, stats))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 5-point Laplacian on the interior of an n x n cell grid (Dirichlet),
    /// which is also the P1 stiffness of the diagonal-split triangulation.
    fn laplacian(n: usize) -> (CsrMatrix, GridDofs) {
        let dofs = GridDofs {
            nx: n,
            ny: n,
            periodic: false,
            m: 1,
        };
        let mut trip = Vec::new();
        for j in 1..n as isize {
            for i in 1..n as isize {
                let r = dofs.node(i, j).unwrap();
                trip.push((r, r, 4.0));
                for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    if let Some(c) = dofs.node(i + di, j + dj) {
                        trip.push((r, c, -1.0));
                    }
                }
            }
        }
        (CsrMatrix::from_triplets(dofs.dof_count(), dofs.dof_count(), &trip), dofs)
    }

    #[test]
    fn transpose_and_matmul_agree_with_dense() {
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0), (0, 2, 1.0)]);
        assert_eq!(a.get(0, 2), 3.0);
        let at = a.transpose();
        let prod = a.matmul(&at).to_dense();
        let dense = a.to_dense();
        let expected = &dense * dense.transpose();
        assert!((prod - expected).norm() < 1e-14);
    }

    #[test]
    fn prolongation_reproduces_linear_functions() {
        let dofs = GridDofs {
            nx: 8,
            ny: 8,
            periodic: false,
            m: 1,
        };
        let p = dofs.prolongation();
        // coarse interior nodes of a 4x4 grid, f(i, j) = 2i + 3j evaluated at
        // the fine index scale; zero on the boundary is not linear, so test a
        // node far from it.
        let coarse = dofs.coarse();
        let mut xc = vec![0.0; coarse.dof_count()];
        for j in 1..4 {
            for i in 1..4 {
                xc[coarse.node(i, j).unwrap()] = (2 * 2 * i + 3 * 2 * j) as f64;
            }
        }
        let xf = p.mul_vec(&xc);
        for (i, j) in [(3, 3), (3, 4), (4, 3), (5, 5), (4, 4)] {
            let v = xf[dofs.node(i, j).unwrap()];
            assert!((v - (2 * i + 3 * j) as f64).abs() < 1e-12, "({i},{j}) -> {v}");
        }
    }

    #[test]
    fn multigrid_pcg_converges_fast_on_laplacian() {
        let (a, dofs) = laplacian(64);
        let b = vec![1.0; a.nrows()];
        let opts = CgOptions::default();
        let (x, stats) = solve_grid_system(a.clone(), &b, dofs, &opts).unwrap();
        assert!(stats.iterations < 30, "{} iterations", stats.iterations);
        let r = a.mul_vec(&x);
        let res: f64 = r.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        assert!(res / (b.len() as f64).sqrt() < 1e-9);

        let jac = CgOptions {
            preconditioner: PreconditionerKind::Jacobi,
            ..opts
        };
        let (xj, _) = solve_grid_system(a, &b, dofs, &jac).unwrap();
        let diff = x.iter().zip(&xj).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-7);
    }

    #[test]
    fn stagnation_reports_history() {
        let (a, dofs) = laplacian(32);
        let b = vec![1.0; a.nrows()];
        let opts = CgOptions {
            tolerance: 1e-14,
            max_iterations: Some(3),
            preconditioner: PreconditionerKind::Jacobi,
        };
        match solve_grid_system(a, &b, dofs, &opts) {
            Err(Error::Solver { iterations, history, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(history.len(), 4);
            }
            other => panic!("expected stagnation, got {other:?}"),
        }
    }
}
