//! Interface-fitted triangulations of an axis-aligned box.
//!
//! The mesh is a structured grid of `nx x ny` cells, each split along the
//! diagonal from its lower-left to its upper-right corner. One grid row is
//! moved vertically onto the graph `x_2 = ψ(x_1)`; the displacement is
//! blended linearly to zero at the top and bottom of the box, so the
//! topology never changes and every triangle lies in a single phase.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Phase;

/// `[min[0], max[0]] x [min[1], max[1]]`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl BoxDomain {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Result<Self> {
        if !(max[0] > min[0] && max[1] > min[1]) {
            return Err(Error::Domain(format!("degenerate box {min:?} - {max:?}")));
        }
        Ok(Self { min, max })
    }

    /// `[-r, r]^2` around `center`.
    pub fn centered(center: [f64; 2], r: f64) -> Self {
        Self {
            min: [center[0] - r, center[1] - r],
            max: [center[0] + r, center[1] + r],
        }
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].clamp(self.min[0], self.max[0]), p[1].clamp(self.min[1], self.max[1])]
    }

    pub fn distance_to_boundary(&self, p: [f64; 2]) -> f64 {
        (p[0] - self.min[0])
            .min(self.max[0] - p[0])
            .min(p[1] - self.min[1])
            .min(self.max[1] - p[1])
    }
}

/// Interface `S = {x_2 = ψ(x_1)}` with a `C^{1,α}` bound on `ψ'`.
#[derive(Clone)]
pub struct InterfaceGeometry {
    psi: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub alpha: f64,
    pub bound: f64,
    flat: bool,
}

impl std::fmt::Debug for InterfaceGeometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InterfaceGeometry")
            .field("flat", &self.flat)
            .field("alpha", &self.alpha)
            .field("bound", &self.bound)
            .finish()
    }
}

impl InterfaceGeometry {
    pub fn flat() -> Self {
        Self {
            psi: Arc::new(|_| 0.0),
            alpha: 1.0,
            bound: 0.0,
            flat: true,
        }
    }

    pub fn from_fn(psi: impl Fn(f64) -> f64 + Send + Sync + 'static, alpha: f64, bound: f64) -> Self {
        Self {
            psi: Arc::new(psi),
            alpha,
            bound,
            flat: false,
        }
    }

    /// `ψ(x) = a sin(2π k x)`. Its `C^{1,α}` seminorm is bounded by
    /// `a (2πk)^{1+α} 2^{1-α}`.
    pub fn sine(amplitude: f64, frequency: f64, alpha: f64) -> Self {
        let w = 2.0 * std::f64::consts::PI * frequency;
        let bound = amplitude.abs() * w.powf(1.0 + alpha) * 2f64.powf(1.0 - alpha);
        let mut g = Self::from_fn(move |x| amplitude * (w * x).sin(), alpha, bound);
        g.flat = amplitude == 0.0;
        g
    }

    pub fn is_flat(&self) -> bool {
        self.flat
    }

    #[inline]
    pub fn psi(&self, x: f64) -> f64 {
        (self.psi)(x)
    }

    /// Largest `|ψ(x)| / |x|^{1+α}` over `samples` points of `(-extent, extent)`,
    /// to compare against `bound`.
    pub fn normalization_ratio(&self, extent: f64, samples: usize) -> f64 {
        (1..=samples)
            .flat_map(|k| {
                let x = extent * k as f64 / samples as f64;
                [x, -x]
            })
            .map(|x| self.psi(x).abs() / x.abs().powf(1.0 + self.alpha))
            .fold(0.0, f64::max)
    }
}

/// Interface edge between a `+` and a `-` triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterfaceEdge {
    pub vertices: [usize; 2],
    /// Unit normal pointing from `Ω_-` into `Ω_+`.
    pub normal: [f64; 2],
    pub length: f64,
    pub midpoint: [f64; 2],
    pub plus_triangle: usize,
    pub minus_triangle: usize,
}

/// Structured topology underlying a [`Mesh`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridInfo {
    pub nx: usize,
    pub ny: usize,
    pub interface_row: usize,
    pub domain: BoxDomain,
}

/// Conforming P1 triangulation with phase tags.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub phases: Vec<Phase>,
    pub interface_edges: Vec<InterfaceEdge>,
    pub boundary_vertices: Vec<usize>,
    is_boundary: Vec<bool>,
    pub h: f64,
    pub grid: GridInfo,
    geometry: InterfaceGeometry,
}

/// Minimum interior angle allowed after fitting, in degrees.
pub const MIN_ANGLE_DEG: f64 = 15.0;

/// Builds the interface-fitted mesh of `domain` with cells of size about `h`.
pub fn build_interface_fitted_mesh(domain: BoxDomain, geom: &InterfaceGeometry, h: f64) -> Result<Mesh> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Mesh(format!("mesh size {h} must be positive")));
    }
    let nx = (domain.width() / h).round().max(1.0) as usize;
    let ny = (domain.height() / h).round().max(2.0) as usize;
    let hx = domain.width() / nx as f64;
    let hy = domain.height() / ny as f64;
    let xs: Vec<f64> = (0..=nx).map(|i| domain.min[0] + i as f64 * hx).collect();
    let psis: Vec<f64> = xs.iter().map(|&x| geom.psi(x)).collect();
    if psis.iter().any(|p| !p.is_finite()) {
        return Err(Error::Mesh("ψ is not finite on the grid".into()));
    }
    for w in psis.windows(2) {
        if (w[1] - w[0]).abs() >= hy {
            return Err(Error::Mesh(format!(
                "interface varies by {:.3e} across one cell (h = {hy:.3e}); use a smaller h",
                (w[1] - w[0]).abs()
            )));
        }
    }
    let mean_psi = psis.iter().sum::<f64>() / psis.len() as f64;
    let row = ((mean_psi - domain.min[1]) / hy).round() as isize;
    if row < 1 || row >= ny as isize {
        return Err(Error::Mesh("interface does not cross the interior of the box".into()));
    }
    let row = row as usize;
    let y_row = domain.min[1] + row as f64 * hy;

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let w = if j <= row {
            j as f64 / row as f64
        } else {
            (ny - j) as f64 / (ny - row) as f64
        };
        let y = domain.min[1] + j as f64 * hy;
        for i in 0..=nx {
            let shift = if geom.is_flat() { 0.0 } else { (psis[i] - y_row) * w };
            vertices.push([xs[i], y + shift]);
        }
    }
    if geom.is_flat() && y_row.abs() > 1e-12 * domain.height() {
        return Err(Error::Mesh(format!(
            "flat interface x_2 = 0 is not a grid line (nearest row at {y_row}); adjust box or h"
        )));
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    let mut phases = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        let phase = if j >= row { Phase::Plus } else { Phase::Minus };
        for i in 0..nx {
            triangles.push([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)]);
            triangles.push([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)]);
            phases.push(phase);
            phases.push(phase);
        }
    }
    let mut interface_edges = Vec::with_capacity(nx);
    for i in 0..nx {
        let a = vid(i, row);
        let b = vid(i + 1, row);
        let (pa, pb) = (vertices[a], vertices[b]);
        let t = [pb[0] - pa[0], pb[1] - pa[1]];
        let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
        interface_edges.push(InterfaceEdge {
            vertices: [a, b],
            normal: [-t[1] / len, t[0] / len],
            length: len,
            midpoint: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
            plus_triangle: 2 * (row * nx + i),
            minus_triangle: 2 * ((row - 1) * nx + i) + 1,
        });
    }
    let mut is_boundary = vec![false; vertices.len()];
    let mut boundary_vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            if i == 0 || j == 0 || i == nx || j == ny {
                is_boundary[vid(i, j)] = true;
                boundary_vertices.push(vid(i, j));
            }
        }
    }
    let mesh = Mesh {
        vertices,
        triangles,
        phases,
        interface_edges,
        boundary_vertices,
        is_boundary,
        h: hx.max(hy),
        grid: GridInfo {
            nx,
            ny,
            interface_row: row,
            domain,
        },
        geometry: geom.clone(),
    };
    let angle = mesh.min_angle_deg();
    if angle < MIN_ANGLE_DEG {
        return Err(Error::Mesh(format!(
            "minimum angle {angle:.2}° below {MIN_ANGLE_DEG}° after fitting; use a smaller h"
        )));
    }
    Ok(mesh)
}

/// P1 basis gradients and area of a triangle.
#[inline]
pub fn p1_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let area = 0.5 * det.abs();
    let inv = 1.0 / det;
    let g = [
        [(p[1][1] - p[2][1]) * inv, (p[2][0] - p[1][0]) * inv],
        [(p[2][1] - p[0][1]) * inv, (p[0][0] - p[2][0]) * inv],
        [(p[0][1] - p[1][1]) * inv, (p[1][0] - p[0][0]) * inv],
    ];
    (g, area)
}

fn angles_deg(p: [[f64; 2]; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        let a = p[k];
        let b = p[(k + 1) % 3];
        let c = p[(k + 2) % 3];
        let u = [b[0] - a[0], b[1] - a[1]];
        let v = [c[0] - a[0], c[1] - a[1]];
        let cos = (u[0] * v[0] + u[1] * v[1]) / ((u[0] * u[0] + u[1] * u[1]).sqrt() * (v[0] * v[0] + v[1] * v[1]).sqrt());
        out[k] = cos.clamp(-1.0, 1.0).acos().to_degrees();
    }
    out
}

impl Mesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn geometry(&self) -> &InterfaceGeometry {
        &self.geometry
    }

    pub fn domain(&self) -> BoxDomain {
        self.grid.domain
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.is_boundary[v]
    }

    pub fn triangle_points(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let p = self.triangle_points(t);
        [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
    }

    pub fn area(&self, t: usize) -> f64 {
        p1_gradients(self.triangle_points(t)).1
    }

    pub fn min_angle_deg(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let a = angles_deg(self.triangle_points(t));
                a[0].min(a[1]).min(a[2])
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn phase_area(&self, phase: Phase) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| self.phases[t] == phase)
            .map(|t| self.area(t))
            .sum()
    }

    pub fn interface_length(&self) -> f64 {
        self.interface_edges.iter().map(|e| e.length).sum()
    }

    /// Lumped mass (area of support / 3) per vertex.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let a = self.area(t) / 3.0;
            for &v in tri {
                m[v] += a;
            }
        }
        m
    }

    /// Triangle containing `p` and its barycentric coordinates. Points
    /// outside the box return `None`.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let d = self.grid.domain;
        let tol = 1e-12 * d.width().max(d.height());
        if p[0] < d.min[0] - tol || p[0] > d.max[0] + tol || p[1] < d.min[1] - tol || p[1] > d.max[1] + tol {
            return None;
        }
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let hx = d.width() / nx as f64;
        let i = (((p[0] - d.min[0]) / hx).floor() as isize).clamp(0, nx as isize - 1) as usize;
        let s = ((p[0] - d.min[0]) / hx - i as f64).clamp(0.0, 1.0);
        let line_y = |j: usize| {
            let a = self.vertices[j * (nx + 1) + i][1];
            let b = self.vertices[j * (nx + 1) + i + 1][1];
            a + s * (b - a)
        };
        // largest j with line_y(j) <= p.y, limited to 0..ny-1
        let (mut lo, mut hi) = (0usize, ny);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if line_y(mid) <= p[1] {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let j = lo;
        let cell = j * nx + i;
        for t in [2 * cell, 2 * cell + 1] {
            let bary = barycentric(self.triangle_points(t), p);
            if bary.iter().all(|&b| b >= -1e-10) {
                return Some((t, bary));
            }
        }
        // numerically on an edge: pick the closer triangle
        let t0 = 2 * cell;
        let b0 = barycentric(self.triangle_points(t0), p);
        let b1 = barycentric(self.triangle_points(t0 + 1), p);
        let m0 = b0.iter().cloned().fold(f64::INFINITY, f64::min);
        let m1 = b1.iter().cloned().fold(f64::INFINITY, f64::min);
        Some(if m0 >= m1 { (t0, b0) } else { (t0 + 1, b1) })
    }

    /// Plain-text export: `vertices`, `triangles`, `tags` and
    /// `interface-edges` sections, each introduced by its name and count.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", v[0], v[1]);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "tags {}", self.phases.len());
        for p in &self.phases {
            s.push_str(if *p == Phase::Plus { "+\n" } else { "-\n" });
        }
        let _ = writeln!(s, "interface-edges {}", self.interface_edges.len());
        for e in &self.interface_edges {
            let _ = writeln!(
                s,
                "{} {} {:.17e} {:.17e} {:.17e}",
                e.vertices[0], e.vertices[1], e.normal[0], e.normal[1], e.length
            );
        }
        s
    }
}

pub(crate) fn barycentric(p: [[f64; 2]; 3], x: [f64; 2]) -> [f64; 3] {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let l1 = ((x[0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (x[1] - p[0][1])) / det;
    let l2 = ((p[1][0] - p[0][0]) * (x[1] - p[0][1]) - (x[0] - p[0][0]) * (p[1][1] - p[0][1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Integration region shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    /// `Q_t = {|x_1 - c_1| < t, |x_2 - c_2| < t}`
    Cylinder,
    /// `B_t(c)`
    Ball,
}

/// Region centred at a point of `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSelector {
    pub kind: RegionKind,
    pub center: [f64; 2],
    pub t: f64,
}

impl RegionSelector {
    pub fn cylinder(center: [f64; 2], t: f64) -> Self {
        Self {
            kind: RegionKind::Cylinder,
            center,
            t,
        }
    }

    pub fn ball(center: [f64; 2], t: f64) -> Self {
        Self {
            kind: RegionKind::Ball,
            center,
            t,
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        match self.kind {
            RegionKind::Cylinder => dx.abs() < self.t && dy.abs() < self.t,
            RegionKind::Ball => dx * dx + dy * dy < self.t * self.t,
        }
    }
}

/// Element and edge subsets selected by barycentre membership.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub selector: RegionSelector,
    pub plus_elements: Vec<usize>,
    pub minus_elements: Vec<usize>,
    /// Interface edges whose midpoint lies in the region (`S_t`).
    pub interface_edges: Vec<usize>,
    pub area_plus: f64,
    pub area_minus: f64,
    pub interface_length: f64,
    /// Length of the flat trace `T_t = Q_t ∩ {x_2 = c_2}` inside the box.
    pub flat_trace_length: f64,
    /// The selector reaches outside the mesh domain.
    pub clipped: bool,
}

impl Region {
    pub fn area(&self) -> f64 {
        self.area_plus + self.area_minus
    }

    pub fn elements(&self) -> impl Iterator<Item = usize> + '_ {
        self.plus_elements.iter().chain(&self.minus_elements).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.plus_elements.is_empty() && self.minus_elements.is_empty()
    }
}

pub fn select_region(mesh: &Mesh, selector: RegionSelector) -> Region {
    let d = mesh.domain();
    let c = selector.center;
    let t = selector.t;
    let tol = 1e-12 * d.width().max(d.height());
    let clipped = c[0] - t < d.min[0] - tol || c[0] + t > d.max[0] + tol || c[1] - t < d.min[1] - tol || c[1] + t > d.max[1] + tol;
    let mut plus_elements = Vec::new();
    let mut minus_elements = Vec::new();
    let (mut area_plus, mut area_minus) = (0.0, 0.0);
    for tri in 0..mesh.triangles.len() {
        if selector.contains(mesh.centroid(tri)) {
            let a = mesh.area(tri);
            match mesh.phases[tri] {
                Phase::Plus => {
                    plus_elements.push(tri);
                    area_plus += a;
                }
                Phase::Minus => {
                    minus_elements.push(tri);
                    area_minus += a;
                }
            }
        }
    }
    let mut interface_edges = Vec::new();
    let mut interface_length = 0.0;
    for (k, e) in mesh.interface_edges.iter().enumerate() {
        if selector.contains(e.midpoint) {
            interface_edges.push(k);
            interface_length += e.length;
        }
    }
    let half = match selector.kind {
        RegionKind::Cylinder => t,
        RegionKind::Ball => t,
    };
    let flat_trace_length = ((c[0] + half).min(d.max[0]) - (c[0] - half).max(d.min[0])).max(0.0);
    Region {
        selector,
        plus_elements,
        minus_elements,
        interface_edges,
        area_plus,
        area_minus,
        interface_length,
        flat_trace_length,
        clipped,
    }
}
