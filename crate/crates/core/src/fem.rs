//! P1 finite elements for the transmission problem
//!
//! ```text
//! ∇·(A∇u) = F + ∇·h   in Ω_±,     u = f on ∂Ω,
//! n·(A∇u)_+ − n·(A∇u)_- = g        on S,
//! ```
//!
//! where `n` is the unit normal on `S` pointing from `Ω_-` into `Ω_+`.
//! Testing with `φ` vanishing on `∂Ω` gives the weak form
//!
//! ```text
//! ∫ A∇u·∇φ = −∫_S (g − n·h_+ + n·h_-)·φ dσ − Σ_± ∫ F_±·φ + Σ_± ∫ h_±·∇φ.
//! ```

use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{p1_gradients, Mesh, Region};
use crate::sparse::{solve_grid_system, CgOptions, CsrMatrix, GridDofs, SolveStats};
use crate::tensor::{rayleigh_bounds, PiecewiseTensor, Phase, DIM};

/// Vector-valued function of position writing its components into the
/// output slice.
pub type VectorFn = Arc<dyn Fn([f64; 2], &mut [f64]) + Send + Sync>;

/// Wraps a scalar closure as a one-component [`VectorFn`].
pub fn scalar_fn(f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> VectorFn {
    Arc::new(move |x, out| out[0] = f(x))
}

/// Constant vector field.
pub fn constant_fn(values: Vec<f64>) -> VectorFn {
    Arc::new(move |_, out| out.copy_from_slice(&values))
}

/// Nodal P1 function with `m` components, stored interleaved
/// (`values[v * m + α]`).
#[derive(Clone)]
pub struct FieldFunction {
    mesh: Arc<Mesh>,
    m: usize,
    values: Vec<f64>,
}

impl std::fmt::Debug for FieldFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldFunction")
            .field("m", &self.m)
            .field("vertices", &self.mesh.vertex_count())
            .finish()
    }
}

impl FieldFunction {
    pub fn new(mesh: Arc<Mesh>, m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.vertex_count() * m {
            return Err(Error::Data(format!(
                "field has {} values, mesh needs {} x {m}",
                values.len(),
                mesh.vertex_count()
            )));
        }
        Ok(Self { mesh, m, values })
    }

    pub fn zeros(mesh: Arc<Mesh>, m: usize) -> Self {
        let n = mesh.vertex_count() * m;
        Self {
            mesh,
            m,
            values: vec![0.0; n],
        }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: Arc<Mesh>, m: usize, f: impl Fn([f64; 2], &mut [f64])) -> Self {
        let mut values = vec![0.0; mesh.vertex_count() * m];
        for (v, chunk) in values.chunks_mut(m).enumerate() {
            f(mesh.vertices[v], chunk);
        }
        Self { mesh, m, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn nodal(&self, v: usize) -> &[f64] {
        &self.values[v * self.m..(v + 1) * self.m]
    }

    /// Nodal array of component `alpha`.
    pub fn component(&self, alpha: usize) -> Vec<f64> {
        self.values.iter().skip(alpha).step_by(self.m).copied().collect()
    }

    /// Constant gradient on triangle `t`: `grad[α][i] = ∂_i u^α`.
    pub fn gradient(&self, t: usize) -> Vec<[f64; 2]> {
        let (g, _) = p1_gradients(self.mesh.triangle_points(t));
        let tri = self.mesh.triangles[t];
        (0..self.m)
            .map(|a| {
                let mut out = [0.0; 2];
                for k in 0..3 {
                    let u = self.values[tri[k] * self.m + a];
                    out[0] += u * g[k][0];
                    out[1] += u * g[k][1];
                }
                out
            })
            .collect()
    }

    /// Value at an arbitrary point of the mesh domain.
    pub fn eval(&self, x: [f64; 2]) -> Option<Vec<f64>> {
        let (t, bary) = self.mesh.locate(x)?;
        let tri = self.mesh.triangles[t];
        Some(
            (0..self.m)
                .map(|a| (0..3).map(|k| bary[k] * self.values[tri[k] * self.m + a]).sum())
                .collect(),
        )
    }

    fn same_mesh(&self, other: &FieldFunction) -> Result<()> {
        if !Arc::ptr_eq(&self.mesh, &other.mesh) && self.mesh.vertex_count() != other.mesh.vertex_count() {
            return Err(Error::Data("fields live on different meshes".into()));
        }
        if self.m != other.m {
            return Err(Error::Data("fields have different component counts".into()));
        }
        Ok(())
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &FieldFunction) -> Result<FieldFunction> {
        self.same_mesh(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect();
        Ok(Self {
            mesh: self.mesh.clone(),
            m: self.m,
            values,
        })
    }

    pub fn sub(&self, other: &FieldFunction) -> Result<FieldFunction> {
        self.axpy(-1.0, other)
    }

    /// `∫_t |u|²` (exact for P1) and `∫_t |∇u|²`.
    pub fn element_squares(&self, t: usize) -> (f64, f64) {
        let (g, area) = p1_gradients(self.mesh.triangle_points(t));
        let tri = self.mesh.triangles[t];
        let (mut l2, mut h1) = (0.0, 0.0);
        for a in 0..self.m {
            let u = [
                self.values[tri[0] * self.m + a],
                self.values[tri[1] * self.m + a],
                self.values[tri[2] * self.m + a],
            ];
            l2 += area / 6.0 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + u[0] * u[1] + u[0] * u[2] + u[1] * u[2]);
            let gx = u[0] * g[0][0] + u[1] * g[1][0] + u[2] * g[2][0];
            let gy = u[0] * g[0][1] + u[1] * g[1][1] + u[2] * g[2][1];
            h1 += area * (gx * gx + gy * gy);
        }
        (l2, h1)
    }

    /// `‖u‖_{L²(Ω)}`
    pub fn l2_norm(&self) -> f64 {
        (0..self.mesh.triangle_count()).map(|t| self.element_squares(t).0).sum::<f64>().sqrt()
    }

    /// `‖∇u‖_{L²(Ω)}`
    pub fn gradient_norm(&self) -> f64 {
        (0..self.mesh.triangle_count()).map(|t| self.element_squares(t).1).sum::<f64>().sqrt()
    }

    pub fn h1_norm(&self) -> f64 {
        let (a, b) = (0..self.mesh.triangle_count())
            .map(|t| self.element_squares(t))
            .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
        (a + b).sqrt()
    }

    /// `(∫ |u|², ∫ |∇u|²)` over a list of elements.
    pub fn squares_over(&self, elements: impl IntoIterator<Item = usize>) -> (f64, f64) {
        elements
            .into_iter()
            .map(|t| self.element_squares(t))
            .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1))
    }

    /// Plain-text nodal array: header `nodal <vertices> <m>`, then one line
    /// per vertex.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nodal {} {}", self.mesh.vertex_count(), self.m);
        for chunk in self.values.chunks(self.m) {
            let line: Vec<String> = chunk.iter().map(|v| format!("{v:.17e}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }
}

/// Interface transmission data `g`.
#[derive(Clone, Default)]
pub enum InterfaceData {
    #[default]
    Zero,
    /// Evaluated at interface edge midpoints.
    Function(VectorFn),
    /// `m` values per interface edge in mesh order; `NaN` marks a missing
    /// sample.
    EdgeSamples(Vec<f64>),
}

/// Right-hand side data `F_±`, `h_±`, `g` and boundary values `f`.
#[derive(Clone)]
pub struct ProblemData {
    m: usize,
    source: [Option<VectorFn>; 2],
    flux: [Option<VectorFn>; 2],
    pub interface: InterfaceData,
    boundary: Option<VectorFn>,
    /// Hölder exponent of `h` and `g`, used by reports only.
    pub alpha: Option<f64>,
}

impl std::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemData").field("m", &self.m).finish_non_exhaustive()
    }
}

fn phase_slot(phase: Phase) -> usize {
    match phase {
        Phase::Plus => 0,
        Phase::Minus => 1,
    }
}

impl ProblemData {
    /// All data zero.
    pub fn new(m: usize) -> Self {
        Self {
            m,
            source: [None, None],
            flux: [None, None],
            interface: InterfaceData::Zero,
            boundary: None,
            alpha: None,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Volumetric source `F` on one phase (`m` components).
    pub fn with_source(mut self, phase: Phase, f: VectorFn) -> Self {
        self.source[phase_slot(phase)] = Some(f);
        self
    }

    /// Flux source `h` on one phase (`2m` components, `h_i^α` at `i * m + α`).
    pub fn with_flux(mut self, phase: Phase, h: VectorFn) -> Self {
        self.flux[phase_slot(phase)] = Some(h);
        self
    }

    pub fn with_interface(mut self, g: VectorFn) -> Self {
        self.interface = InterfaceData::Function(g);
        self
    }

    pub fn with_interface_samples(mut self, samples: Vec<f64>) -> Self {
        self.interface = InterfaceData::EdgeSamples(samples);
        self
    }

    pub fn with_boundary(mut self, f: VectorFn) -> Self {
        self.boundary = Some(f);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn source(&self, phase: Phase) -> Option<&VectorFn> {
        self.source[phase_slot(phase)].as_ref()
    }

    pub fn flux(&self, phase: Phase) -> Option<&VectorFn> {
        self.flux[phase_slot(phase)].as_ref()
    }

    pub fn boundary(&self) -> Option<&VectorFn> {
        self.boundary.as_ref()
    }

    /// `g` at every interface edge midpoint (`m` values per edge).
    pub fn interface_samples(&self, mesh: &Mesh) -> Result<Vec<f64>> {
        let m = self.m;
        let n = mesh.interface_edges.len();
        match &self.interface {
            InterfaceData::Zero => Ok(vec![0.0; n * m]),
            InterfaceData::Function(g) => {
                let mut out = vec![0.0; n * m];
                for (e, chunk) in mesh.interface_edges.iter().zip(out.chunks_mut(m)) {
                    g(e.midpoint, chunk);
                    check_finite(chunk, "interface data g", e.midpoint)?;
                }
                Ok(out)
            }
            InterfaceData::EdgeSamples(s) => {
                for e in 0..n {
                    let missing = s.get(e * m..(e + 1) * m).is_none_or(|c| c.iter().any(|v| !v.is_finite()));
                    if missing {
                        let mid = mesh.interface_edges[e].midpoint;
                        return Err(Error::Data(format!(
                            "no g sample on interface edge {e} (midpoint ({:.6}, {:.6}))",
                            mid[0], mid[1]
                        )));
                    }
                }
                Ok(s[..n * m].to_vec())
            }
        }
    }

    /// Boundary values as a full nodal vector (interior entries zero).
    pub fn boundary_nodal(&self, mesh: &Mesh) -> Result<Vec<f64>> {
        let m = self.m;
        let mut out = vec![0.0; mesh.vertex_count() * m];
        if let Some(f) = &self.boundary {
            for &v in &mesh.boundary_vertices {
                let chunk = &mut out[v * m..(v + 1) * m];
                f(mesh.vertices[v], chunk);
                check_finite(chunk, "boundary data f", mesh.vertices[v])?;
            }
        }
        Ok(out)
    }
}

fn check_finite(values: &[f64], what: &str, x: [f64; 2]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Evaluation {
            what: what.into(),
            x: x[0],
            y: x[1],
        })
    }
}

/// CSR structure of the vertex graph of a structured mesh with `m`
/// interleaved components per vertex.
fn structured_pattern(mesh: &Mesh, m: usize) -> CsrMatrix {
    let (nx, ny) = (mesh.grid.nx as isize, mesh.grid.ny as isize);
    let nv = mesh.vertex_count();
    let offsets: [(isize, isize); 7] = [(-1, -1), (0, -1), (-1, 0), (0, 0), (1, 0), (0, 1), (1, 1)];
    let mut indptr = Vec::with_capacity(nv * m + 1);
    indptr.push(0);
    let mut indices = Vec::with_capacity(nv * m * 7 * m);
    for j in 0..=ny {
        for i in 0..=nx {
            let start = indices.len();
            for (di, dj) in offsets {
                let (ii, jj) = (i + di, j + dj);
                if ii < 0 || jj < 0 || ii > nx || jj > ny {
                    continue;
                }
                let w = (jj * (nx + 1) + ii) as usize;
                for b in 0..m {
                    indices.push((w * m + b) as u32);
                }
            }
            let len = indices.len() - start;
            for _ in 0..m {
                indptr.push(*indptr.last().unwrap() + len);
            }
            for _ in 1..m {
                indices.extend_from_within(start..start + len);
            }
        }
    }
    CsrMatrix::from_structure(nv * m, nv * m, indptr, indices)
}

/// Element matrix `K[(a, α), (b, β)] = area · a_ij^{αβ} ∂_j φ_b ∂_i φ_a` of a
/// P1 triangle for the flattened tensor block `k`, row-major `3m x 3m`.
pub fn element_stiffness(points: [[f64; 2]; 3], k: &[f64], m: usize) -> Vec<f64> {
    let (g, area) = p1_gradients(points);
    let n = 3 * m;
    let mut out = vec![0.0; n * n];
    let w = DIM * m;
    for a in 0..3 {
        for b in 0..3 {
            for al in 0..m {
                for be in 0..m {
                    let mut acc = 0.0;
                    for i in 0..DIM {
                        for j in 0..DIM {
                            acc += k[(i * m + al) * w + j * m + be] * g[b][j] * g[a][i];
                        }
                    }
                    out[(a * m + al) * n + b * m + be] = area * acc;
                }
            }
        }
    }
    out
}

/// Global stiffness over all vertex unknowns (boundary included), with the
/// tensor evaluated at element centroids.
pub fn assemble_stiffness(mesh: &Mesh, tensor: &PiecewiseTensor) -> Result<CsrMatrix> {
    assemble_stiffness_with(mesh, tensor.m(), tensor.lambda(), |x, phase, out| {
        tensor.eval_into(x, phase, out)
    })
}

/// Stiffness for an arbitrary per-phase tensor field.
pub fn assemble_stiffness_with(
    mesh: &Mesh,
    m: usize,
    lambda: f64,
    tensor: impl Fn([f64; 2], Phase, &mut [f64]),
) -> Result<CsrMatrix> {
    let mut k = structured_pattern(mesh, m);
    let mut buf = vec![0.0; (DIM * m) * (DIM * m)];
    let (lo_ok, hi_ok) = ((1.0 / lambda) * (1.0 - 1e-9), lambda * (1.0 + 1e-9));
    for t in 0..mesh.triangle_count() {
        let c = mesh.centroid(t);
        tensor(c, mesh.phases[t], &mut buf);
        if buf.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                what: "coefficient tensor".into(),
                x: c[0],
                y: c[1],
            });
        }
        let (lo, hi) = rayleigh_bounds(m, &buf);
        if lo < lo_ok || hi > hi_ok {
            return Err(Error::Assembly(format!(
                "ellipticity violated at ({:.6}, {:.6}): Rayleigh quotients [{lo:.4e}, {hi:.4e}] outside [1/Λ, Λ] with Λ = {lambda}",
                c[0], c[1]
            )));
        }
        let ke = element_stiffness(mesh.triangle_points(t), &buf, m);
        let tri = mesh.triangles[t];
        let n = 3 * m;
        for a in 0..3 {
            for al in 0..m {
                let row = tri[a] * m + al;
                for b in 0..3 {
                    for be in 0..m {
                        k.add_at(row, tri[b] * m + be, ke[(a * m + al) * n + b * m + be]);
                    }
                }
            }
        }
    }
    Ok(k)
}

/// Load vector over all vertex unknowns.
pub fn assemble_load(mesh: &Mesh, data: &ProblemData) -> Result<Vec<f64>> {
    let m = data.m();
    let mut load = vec![0.0; mesh.vertex_count() * m];
    let mut fbuf = vec![0.0; m];
    let mut hbuf = vec![0.0; DIM * m];
    for t in 0..mesh.triangle_count() {
        let phase = mesh.phases[t];
        let src = data.source(phase);
        let flux = data.flux(phase);
        if src.is_none() && flux.is_none() {
            continue;
        }
        let c = mesh.centroid(t);
        let (g, area) = p1_gradients(mesh.triangle_points(t));
        let tri = mesh.triangles[t];
        if let Some(f) = src {
            f(c, &mut fbuf);
            check_finite(&fbuf, "source F", c)?;
            for &v in &tri {
                for a in 0..m {
                    load[v * m + a] -= fbuf[a] * area / 3.0;
                }
            }
        }
        if let Some(h) = flux {
            h(c, &mut hbuf);
            check_finite(&hbuf, "flux source h", c)?;
            for (k, &v) in tri.iter().enumerate() {
                for a in 0..m {
                    load[v * m + a] += area * (hbuf[a] * g[k][0] + hbuf[m + a] * g[k][1]);
                }
            }
        }
    }
    let gs = data.interface_samples(mesh)?;
    let mut hp = vec![0.0; DIM * m];
    let mut hm = vec![0.0; DIM * m];
    for (e, edge) in mesh.interface_edges.iter().enumerate() {
        hp.iter_mut().for_each(|v| *v = 0.0);
        hm.iter_mut().for_each(|v| *v = 0.0);
        if let Some(h) = data.flux(Phase::Plus) {
            h(edge.midpoint, &mut hp);
            check_finite(&hp, "flux trace h+", edge.midpoint)?;
        }
        if let Some(h) = data.flux(Phase::Minus) {
            h(edge.midpoint, &mut hm);
            check_finite(&hm, "flux trace h-", edge.midpoint)?;
        }
        let n = edge.normal;
        for a in 0..m {
            let nhp = n[0] * hp[a] + n[1] * hp[m + a];
            let nhm = n[0] * hm[a] + n[1] * hm[m + a];
            let val = gs[e * m + a] - nhp + nhm;
            for &v in &edge.vertices {
                load[v * m + a] -= 0.5 * edge.length * val;
            }
        }
    }
    Ok(load)
}

/// Result of a Dirichlet solve.
#[derive(Debug, Clone)]
pub struct DirichletSolve {
    pub field: FieldFunction,
    pub stats: SolveStats,
}

fn interior_dofs(mesh: &Mesh, m: usize) -> Vec<usize> {
    let (nx, ny) = (mesh.grid.nx, mesh.grid.ny);
    let mut keep = Vec::with_capacity((nx - 1) * (ny - 1) * m);
    for j in 1..ny {
        for i in 1..nx {
            let v = j * (nx + 1) + i;
            for a in 0..m {
                keep.push(v * m + a);
            }
        }
    }
    keep
}

/// Solves `K u = load` with `u = boundary` on boundary vertices, by
/// elimination of the boundary unknowns. `boundary` is a full nodal vector
/// of which only the boundary entries are read.
pub fn solve_dirichlet(
    mesh: &Arc<Mesh>,
    k: &CsrMatrix,
    load: &[f64],
    boundary: &[f64],
    opts: &CgOptions,
) -> Result<DirichletSolve> {
    let nv = mesh.vertex_count();
    let m = k.nrows() / nv;
    if m == 0 || k.nrows() != nv * m || load.len() != nv * m || boundary.len() != nv * m {
        return Err(Error::Data("operator, load and boundary sizes disagree with the mesh".into()));
    }
    if mesh.grid.nx < 2 || mesh.grid.ny < 2 {
        return Err(Error::Mesh("mesh has no interior vertices".into()));
    }
    let mut fb = vec![0.0; nv * m];
    for &v in &mesh.boundary_vertices {
        fb[v * m..(v + 1) * m].copy_from_slice(&boundary[v * m..(v + 1) * m]);
    }
    let kf = k.mul_vec(&fb);
    let keep = interior_dofs(mesh, m);
    let rhs: Vec<f64> = keep.iter().map(|&d| load[d] - kf[d]).collect();
    let kii = k.principal_submatrix(&keep);
    let dofs = GridDofs {
        nx: mesh.grid.nx,
        ny: mesh.grid.ny,
        periodic: false,
        m,
    };
    let (x, stats) = solve_grid_system(kii, &rhs, dofs, opts)?;
    let mut values = fb;
    for (&d, &xv) in keep.iter().zip(&x) {
        values[d] = xv;
    }
    Ok(DirichletSolve {
        field: FieldFunction::new(mesh.clone(), m, values)?,
        stats,
    })
}

/// `‖u‖_{H¹}` divided by a computable data norm
/// `‖f‖_{L²(∂Ω)} + ‖g‖_{L²(S)} + Σ‖F_±‖_{L²} + Σ‖h_±‖_{L²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub solution_h1: f64,
    pub data_norm: f64,
    pub constant: f64,
}

pub fn energy_report(u: &FieldFunction, data: &ProblemData) -> Result<EnergyReport> {
    let mesh = u.mesh();
    let m = data.m();
    let mut data_sq = 0.0;
    let gs = data.interface_samples(mesh)?;
    let mut g_sq = 0.0;
    for (e, edge) in mesh.interface_edges.iter().enumerate() {
        g_sq += edge.length * gs[e * m..(e + 1) * m].iter().map(|v| v * v).sum::<f64>();
    }
    data_sq += g_sq.sqrt();
    let mut vol = [0.0f64; 4];
    let mut buf = vec![0.0; DIM * m];
    for t in 0..mesh.triangle_count() {
        let c = mesh.centroid(t);
        let area = mesh.area(t);
        let p = mesh.phases[t];
        if let Some(f) = data.source(p) {
            f(c, &mut buf[..m]);
            vol[phase_slot(p)] += area * buf[..m].iter().map(|v| v * v).sum::<f64>();
        }
        if let Some(h) = data.flux(p) {
            h(c, &mut buf);
            vol[2 + phase_slot(p)] += area * buf.iter().map(|v| v * v).sum::<f64>();
        }
    }
    data_sq += vol.iter().map(|v| v.sqrt()).sum::<f64>();
    // boundary trace norm by the trapezoid rule along boundary edges
    let fb = data.boundary_nodal(mesh)?;
    let (nx, ny) = (mesh.grid.nx, mesh.grid.ny);
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut edges = Vec::new();
    for i in 0..nx {
        edges.push((vid(i, 0), vid(i + 1, 0)));
        edges.push((vid(i, ny), vid(i + 1, ny)));
    }
    for j in 0..ny {
        edges.push((vid(0, j), vid(0, j + 1)));
        edges.push((vid(nx, j), vid(nx, j + 1)));
    }
    let mut f_sq = 0.0;
    for (a, b) in edges {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let len = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
        for c in 0..m {
            let (x, y) = (fb[a * m + c], fb[b * m + c]);
            f_sq += len / 3.0 * (x * x + x * y + y * y);
        }
    }
    data_sq += f_sq.sqrt();
    let h1 = u.h1_norm();
    Ok(EnergyReport {
        solution_h1: h1,
        data_norm: data_sq,
        constant: if data_sq > 0.0 { h1 / data_sq } else { 0.0 },
    })
}

/// Assembles and solves the transmission problem for `tensor` and `data`.
pub fn solve_problem(
    mesh: &Arc<Mesh>,
    tensor: &PiecewiseTensor,
    data: &ProblemData,
    opts: &CgOptions,
) -> Result<DirichletSolve> {
    if tensor.m() != data.m() {
        return Err(Error::Data(format!(
            "tensor has m = {} but data has m = {}",
            tensor.m(),
            data.m()
        )));
    }
    let k = assemble_stiffness(mesh, tensor)?;
    let load = assemble_load(mesh, data)?;
    let fb = data.boundary_nodal(mesh)?;
    solve_dirichlet(mesh, &k, &load, &fb, opts)
}

/// Region-averaged norms of a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionNorms {
    /// `(⨍ |u|²)^{1/2}`
    pub l2: f64,
    /// `(⨍ |∇u|²)^{1/2}`
    pub grad: f64,
    pub l2_plus: f64,
    pub grad_plus: f64,
    pub l2_minus: f64,
    pub grad_minus: f64,
}

impl RegionNorms {
    /// CSV rows `region,phase,L2,H1avg`.
    pub fn csv_rows(&self, label: &str) -> String {
        format!(
            "{label},all,{:.12e},{:.12e}\n{label},plus,{:.12e},{:.12e}\n{label},minus,{:.12e},{:.12e}\n",
            self.l2, self.grad, self.l2_plus, self.grad_plus, self.l2_minus, self.grad_minus
        )
    }
}

pub fn region_norms(u: &FieldFunction, region: &Region) -> Result<RegionNorms> {
    if region.is_empty() {
        return Err(Error::Domain("empty integration region".into()));
    }
    let (lp, gp) = u.squares_over(region.plus_elements.iter().copied());
    let (lm, gm) = u.squares_over(region.minus_elements.iter().copied());
    let avg = |v: f64, a: f64| if a > 0.0 { (v / a).sqrt() } else { 0.0 };
    let area = region.area();
    Ok(RegionNorms {
        l2: avg(lp + lm, area),
        grad: avg(gp + gm, area),
        l2_plus: avg(lp, region.area_plus),
        grad_plus: avg(gp, region.area_plus),
        l2_minus: avg(lm, region.area_minus),
        grad_minus: avg(gm, region.area_minus),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_interface_fitted_mesh, select_region, BoxDomain, InterfaceGeometry, RegionSelector};
    use crate::tensor::{CoefficientTensor, Tensor4};

    fn unit_box() -> BoxDomain {
        BoxDomain::new([-0.5, -0.5], [0.5, 0.5]).unwrap()
    }

    fn flat_mesh(h: f64) -> Arc<Mesh> {
        Arc::new(build_interface_fitted_mesh(unit_box(), &InterfaceGeometry::flat(), h).unwrap())
    }

    fn scalar_pair(ap: f64, am: f64) -> PiecewiseTensor {
        PiecewiseTensor::unscaled(
            CoefficientTensor::isotropic(1, ap, ap.max(am).max(1.0 / ap.min(am))),
            CoefficientTensor::isotropic(1, am, ap.max(am).max(1.0 / ap.min(am))),
        )
        .unwrap()
    }

    #[test]
    fn reference_element_matrix() {
        let ke = element_stiffness([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], Tensor4::isotropic(1, 1.0).as_slice(), 1);
        let expect = [1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5];
        for (a, b) in ke.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn quadratic_form_of_linear_field_is_mesh_independent() {
        let a = PiecewiseTensor::unscaled(
            CoefficientTensor::constant(Tensor4::scalar([[2.0, 0.5], [0.5, 1.0]]), 3.0),
            CoefficientTensor::constant(Tensor4::scalar([[2.0, 0.5], [0.5, 1.0]]), 3.0),
        )
        .unwrap();
        let form = |h: f64| {
            let mesh = flat_mesh(h);
            let k = assemble_stiffness(&mesh, &a).unwrap();
            let u = FieldFunction::interpolate(mesh, 1, |x, o| o[0] = 0.3 * x[0] - 1.1 * x[1]);
            let ku = k.mul_vec(u.values());
            u.values().iter().zip(&ku).map(|(a, b)| a * b).sum::<f64>()
        };
        let (c, f) = (form(0.25), form(0.125));
        let exact = 2.0 * 0.09 + 2.0 * 0.5 * 0.3 * -1.1 + 1.21;
        assert!((c - exact).abs() < 1e-12 && (f - exact).abs() < 1e-12);
    }

    #[test]
    fn stiffness_is_symmetric() {
        let mesh = Arc::new(
            build_interface_fitted_mesh(unit_box(), &InterfaceGeometry::sine(0.05, 1.0, 0.5), 1.0 / 16.0).unwrap(),
        );
        let a = PiecewiseTensor::new(
            CoefficientTensor::checkerboard(1.0, 4.0, 4.0),
            CoefficientTensor::laminate(0, 0.5, 1.0, 4.0, 4.0),
            0.25,
            0.5,
        )
        .unwrap();
        let k = assemble_stiffness(&mesh, &a).unwrap();
        assert!(k.asymmetry() < 1e-13);
    }

    #[test]
    fn ellipticity_violation_is_an_assembly_error() {
        let mesh = flat_mesh(0.25);
        let a = scalar_pair(1.0, 1.0);
        let bad = PiecewiseTensor::unscaled(CoefficientTensor::isotropic(1, 5.0, 2.0), a.minus.clone()).unwrap();
        assert!(matches!(assemble_stiffness(&mesh, &bad), Err(Error::Assembly(_))));
    }

    #[test]
    fn zero_data_gives_zero_load_and_field() {
        let mesh = flat_mesh(0.125);
        let data = ProblemData::new(1);
        let load = assemble_load(&mesh, &data).unwrap();
        assert!(load.iter().all(|v| *v == 0.0));
        let sol = solve_problem(&mesh, &scalar_pair(3.0, 1.0), &data, &CgOptions::default()).unwrap();
        assert!(sol.field.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unit_interface_data_loads_the_interface_length() {
        let mesh = flat_mesh(1.0 / 16.0);
        let data = ProblemData::new(1).with_interface(scalar_fn(|_| 1.0));
        let load = assemble_load(&mesh, &data).unwrap();
        let total: f64 = load.iter().sum();
        // n points into Ω_+, so g enters with a minus sign
        assert!((total + mesh.interface_length()).abs() < 1e-12);
        let on_interface: f64 = mesh
            .interface_edges
            .iter()
            .flat_map(|e| e.vertices)
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .map(|v| load[v])
            .sum();
        assert!((on_interface + 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_edge_sample_names_the_edge() {
        let mesh = flat_mesh(0.25);
        let data = ProblemData::new(1).with_interface_samples(vec![1.0, 1.0, f64::NAN, 1.0]);
        match assemble_load(&mesh, &data) {
            Err(Error::Data(msg)) => assert!(msg.contains("edge 2"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn matched_constant_flux_is_a_null_load() {
        let mesh = flat_mesh(1.0 / 8.0);
        let h0 = constant_fn(vec![0.7, -0.2]);
        let data = ProblemData::new(1)
            .with_flux(Phase::Plus, h0.clone())
            .with_flux(Phase::Minus, h0);
        let load = assemble_load(&mesh, &data).unwrap();
        let mut direct = vec![0.0; mesh.vertex_count()];
        for t in 0..mesh.triangle_count() {
            let (g, area) = p1_gradients(mesh.triangle_points(t));
            for (k, &v) in mesh.triangles[t].iter().enumerate() {
                direct[v] += area * (0.7 * g[k][0] - 0.2 * g[k][1]);
            }
        }
        for (a, b) in load.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-14);
        }
        let sol = solve_problem(&mesh, &scalar_pair(3.0, 1.0), &data, &CgOptions::default()).unwrap();
        // a uniform flux with matched traces drives nothing when A is constant per phase
        let u_max = sol.field.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(u_max < 1e-9, "{u_max}");
    }

    #[test]
    fn two_slope_strip_is_reproduced() {
        let (a1, a2) = (5.0, 0.5);
        let exact = move |x: [f64; 2]| if x[1] >= 0.0 { x[1] / a1 } else { x[1] / a2 };
        let mesh = flat_mesh(1.0 / 32.0);
        let data = ProblemData::new(1).with_boundary(scalar_fn(exact));
        let sol = solve_problem(&mesh, &scalar_pair(a1, a2), &data, &CgOptions::default()).unwrap();
        for (v, p) in mesh.vertices.iter().enumerate() {
            assert!((sol.field.values()[v] - exact(*p)).abs() < 1e-8);
        }
    }

    #[test]
    fn region_norm_fixtures() {
        let mesh = flat_mesh(1.0 / 16.0);
        let region = select_region(&mesh, RegionSelector::cylinder([0.0, 0.0], 0.25));
        let c = FieldFunction::interpolate(mesh.clone(), 1, |_, o| o[0] = -2.0);
        let n = region_norms(&c, &region).unwrap();
        assert!((n.l2 - 2.0).abs() < 1e-12 && n.grad == 0.0);
        let x1 = FieldFunction::interpolate(mesh.clone(), 1, |x, o| o[0] = x[0]);
        assert!((region_norms(&x1, &region).unwrap().grad - 1.0).abs() < 1e-12);
        let l = FieldFunction::interpolate(mesh.clone(), 1, |x, o| {
            o[0] = if x[1] >= 0.0 { x[0] + 3.0 * x[1] } else { x[0] + x[1] }
        });
        let n = region_norms(&l, &region).unwrap();
        assert!((n.grad.powi(2) - (10.0 + 2.0) / 2.0).abs() < 1e-10);
        let empty = select_region(&mesh, RegionSelector::cylinder([0.0, 0.0], 1e-4));
        assert!(region_norms(&l, &empty).is_err());
    }

    #[test]
    fn manufactured_solution_converges_at_optimal_orders() {
        let (ap, am) = (3.0, 1.0);
        let p = |x: [f64; 2]| (std::f64::consts::PI * x[0]).sin() * (x[1]).exp() + x[1] * x[1];
        let grad = |x: [f64; 2]| {
            let pi = std::f64::consts::PI;
            [
                pi * (pi * x[0]).cos() * x[1].exp(),
                (pi * x[0]).sin() * x[1].exp() + 2.0 * x[1],
            ]
        };
        let lap = |x: [f64; 2]| {
            let pi = std::f64::consts::PI;
            (1.0 - pi * pi) * (pi * x[0]).sin() * x[1].exp() + 2.0
        };
        let errors = |h: f64| {
            let mesh = flat_mesh(h);
            let data = ProblemData::new(1)
                .with_source(Phase::Plus, scalar_fn(move |x| ap * lap(x)))
                .with_source(Phase::Minus, scalar_fn(move |x| am * lap(x)))
                .with_interface(scalar_fn(move |x| (ap - am) * grad(x)[1]))
                .with_boundary(scalar_fn(p));
            let sol = solve_problem(&mesh, &scalar_pair(ap, am), &data, &CgOptions::default()).unwrap();
            let (mut l2, mut h1) = (0.0, 0.0);
            for t in 0..mesh.triangle_count() {
                let pts = mesh.triangle_points(t);
                let area = mesh.area(t);
                let tri = mesh.triangles[t];
                // three-point edge-midpoint rule, exact for quadratics
                for k in 0..3 {
                    let q = [(pts[k][0] + pts[(k + 1) % 3][0]) / 2.0, (pts[k][1] + pts[(k + 1) % 3][1]) / 2.0];
                    let uh = 0.5 * (sol.field.values()[tri[k]] + sol.field.values()[tri[(k + 1) % 3]]);
                    l2 += area / 3.0 * (uh - p(q)).powi(2);
                }
                let g = sol.field.gradient(t)[0];
                let ge = grad(mesh.centroid(t));
                h1 += area * ((g[0] - ge[0]).powi(2) + (g[1] - ge[1]).powi(2));
            }
            (l2.sqrt(), h1.sqrt())
        };
        let (l_a, h_a) = errors(1.0 / 16.0);
        let (l_b, h_b) = errors(1.0 / 32.0);
        let (l_c, h_c) = errors(1.0 / 64.0);
        let ol = [(l_a / l_b).log2(), (l_b / l_c).log2()];
        let oh = [(h_a / h_b).log2(), (h_b / h_c).log2()];
        assert!(ol.iter().all(|o| *o >= 1.8), "{ol:?}");
        assert!(oh.iter().all(|o| *o >= 0.9), "{oh:?}");
    }

    #[test]
    fn energy_constant_is_stable_under_refinement() {
        let data = ProblemData::new(1)
            .with_interface(scalar_fn(|x| 1.0 + x[0]))
            .with_boundary(scalar_fn(|x| x[0] * x[1]));
        let consts: Vec<f64> = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0]
            .iter()
            .map(|&h| {
                let mesh = flat_mesh(h);
                let sol = solve_problem(&mesh, &scalar_pair(3.0, 1.0), &data, &CgOptions::default()).unwrap();
                energy_report(&sol.field, &data).unwrap().constant
            })
            .collect();
        assert!(consts.iter().all(|c| c.is_finite() && *c > 0.0));
        assert!((consts[2] / consts[1] - 1.0).abs() < 0.05, "{consts:?}");
    }

    #[test]
    fn eval_matches_nodal_values_and_interpolates_linears() {
        let mesh = Arc::new(
            build_interface_fitted_mesh(unit_box(), &InterfaceGeometry::sine(0.05, 1.0, 0.5), 1.0 / 16.0).unwrap(),
        );
        let u = FieldFunction::interpolate(mesh.clone(), 2, |x, o| {
            o[0] = 2.0 * x[0] - x[1];
            o[1] = 1.0;
        });
        let v = u.eval([0.123, -0.321]).unwrap();
        assert!((v[0] - (0.246 + 0.321)).abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12);
        assert_eq!(u.component(1).len(), mesh.vertex_count());
    }
}
