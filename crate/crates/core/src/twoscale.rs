//! Mollification `S_t`, boundary-layer cutoffs `η_±` and the first-order
//! two-scale approximant.
//!
//! The approximant compared against `u^ε` is
//!
//! ```text
//! w^ε = u^ε − u^0 − Σ_± ε_± η_± χ_±(x/ε_±) S_{ε_±}(∇u^0)
//! ```
//!
//! evaluated nodally, with the smoothed gradient of `u^0` taken phase by
//! phase.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{corrector_index, CellSolution};
use crate::error::{Error, Result};
use crate::fem::FieldFunction;
use crate::mesh::{p1_gradients, BoxDomain, Mesh};
use crate::solver::{cell_solution, solve_homogenized_on, solve_oscillating_on, ExperimentConfig};
use crate::tensor::{Phase, DIM};

/// Odd grid resolution of the mollifier stencil.
pub const MOLLIFIER_POINTS: usize = 17;

/// Radial bump `exp(−1/(1−|y|²))` on the unit disc, sampled on an `n × n`
/// tensor grid over `[−1, 1]²` and normalised so the weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Mollifier {
    offsets: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

impl Default for Mollifier {
    fn default() -> Self {
        Self::new(MOLLIFIER_POINTS)
    }
}

impl Mollifier {
    /// # Panics
    /// If `n` is even or smaller than 3.
    pub fn new(n: usize) -> Self {
        assert!(n >= 3 && n % 2 == 1, "mollifier grid must be odd and at least 3");
        let step = 2.0 / (n - 1) as f64;
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let y = [-1.0 + i as f64 * step, -1.0 + j as f64 * step];
                let r2 = y[0] * y[0] + y[1] * y[1];
                if r2 < 1.0 {
                    offsets.push(y);
                    weights.push((-1.0 / (1.0 - r2)).exp());
                }
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self { offsets, weights }
    }

    /// Sum of the quadrature weights (one up to round-off).
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Weight attached to the stencil offset `y`, zero off the grid.
    pub fn weight_at(&self, y: [f64; 2]) -> f64 {
        self.offsets
            .iter()
            .zip(&self.weights)
            .find(|(o, _)| (o[0] - y[0]).abs() < 1e-12 && (o[1] - y[1]).abs() < 1e-12)
            .map_or(0.0, |(_, w)| *w)
    }

    /// `S_t f(x) = Σ_k w_k f(x − t y_k)` for an `m`-component `f`.
    pub fn smooth_at(&self, x: [f64; 2], t: f64, m: usize, f: impl Fn([f64; 2], &mut [f64]), out: &mut [f64]) {
        out[..m].iter_mut().for_each(|v| *v = 0.0);
        let mut buf = vec![0.0; m];
        for (y, w) in self.offsets.iter().zip(&self.weights) {
            f([x[0] - t * y[0], x[1] - t * y[1]], &mut buf);
            for a in 0..m {
                out[a] += w * buf[a];
            }
        }
    }

    /// Smooths a closure over `domain`, extending it by its nearest value
    /// outside.
    pub fn smooth<F>(&self, domain: BoxDomain, t: f64, m: usize, f: F) -> impl Fn([f64; 2], &mut [f64]) + '_
    where
        F: Fn([f64; 2], &mut [f64]) + 'static,
    {
        move |x, out| self.smooth_at(x, t, m, |p, o| f(domain.clamp(p), o), out)
    }

    /// Nodal values of `S_t u` on the mesh of `u`.
    pub fn smooth_field(&self, u: &FieldFunction, t: f64) -> FieldFunction {
        let mesh = u.mesh().clone();
        let m = u.m();
        let domain = mesh.domain();
        let mut values = vec![0.0; mesh.vertex_count() * m];
        values.par_chunks_mut(m).enumerate().for_each(|(v, out)| {
            self.smooth_at(
                mesh.vertices[v],
                t,
                m,
                |p, o| {
                    let val = u.eval(domain.clamp(p)).expect("clamped point lies in the mesh");
                    o.copy_from_slice(&val);
                },
                out,
            );
        });
        FieldFunction::new(mesh, m, values).expect("sizes agree")
    }
}

/// Gradient of `u` on the phase-`phase` side at `x`. Points on the wrong
/// side of the interface are reflected across it, and points outside the
/// box use the nearest boundary value.
pub fn phase_gradient(u: &FieldFunction, phase: Phase, x: [f64; 2], out: &mut [f64]) {
    let mesh = u.mesh();
    let domain = mesh.domain();
    let m = u.m();
    let mut p = domain.clamp(x);
    let mut t = mesh.locate(p).expect("clamped point lies in the mesh").0;
    if mesh.phases[t] != phase {
        let psi = mesh.geometry().psi(p[0]);
        p = domain.clamp([p[0], 2.0 * psi - p[1]]);
        t = mesh.locate(p).expect("clamped point lies in the mesh").0;
    }
    let g = u.gradient(t);
    for j in 0..DIM {
        for b in 0..m {
            out[corrector_index(m, j, b)] = g[b][j];
        }
    }
}

/// Nodal cutoffs `η_±`: zero within `2t_±` of `∂Ω_±` (the interface
/// included), one beyond `4t_±`, linear in the distance between.
#[derive(Debug, Clone)]
pub struct CutoffPair {
    pub t_plus: f64,
    pub t_minus: f64,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    mesh: Arc<Mesh>,
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let s = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((p[0] - a[0] - s * d[0]).powi(2) + (p[1] - a[1] - s * d[1]).powi(2)).sqrt()
}

/// Distance from `p` to the interface polyline, whose edges are sorted by
/// abscissa.
fn interface_distance(segments: &[([f64; 2], [f64; 2])], p: [f64; 2]) -> f64 {
    if segments.is_empty() {
        return f64::INFINITY;
    }
    let start = segments.partition_point(|s| s.1[0] < p[0]).min(segments.len() - 1);
    let mut best = segment_distance(p, segments[start].0, segments[start].1);
    for k in (start + 1)..segments.len() {
        if segments[k].0[0] - p[0] > best {
            break;
        }
        best = best.min(segment_distance(p, segments[k].0, segments[k].1));
    }
    for k in (0..start).rev() {
        if p[0] - segments[k].1[0] > best {
            break;
        }
        best = best.min(segment_distance(p, segments[k].0, segments[k].1));
    }
    best
}

fn ramp(d: f64, t: f64) -> f64 {
    ((d - 2.0 * t) / (2.0 * t)).clamp(0.0, 1.0)
}

/// Side of the interface a vertex lies on, `None` on the interface itself.
pub fn vertex_phase(mesh: &Mesh, v: usize) -> Option<Phase> {
    let row = v / (mesh.grid.nx + 1);
    match row.cmp(&mesh.grid.interface_row) {
        std::cmp::Ordering::Greater => Some(Phase::Plus),
        std::cmp::Ordering::Less => Some(Phase::Minus),
        std::cmp::Ordering::Equal => None,
    }
}

/// Builds `η_±` on the vertices of `mesh`.
pub fn build_cutoffs(mesh: &Arc<Mesh>, t_plus: f64, t_minus: f64) -> Result<CutoffPair> {
    if !(t_plus > 0.0 && t_minus > 0.0) {
        return Err(Error::Config(format!("layer widths must be positive, got t_plus = {t_plus}, t_minus = {t_minus}")));
    }
    let mut segments: Vec<([f64; 2], [f64; 2])> = mesh
        .interface_edges
        .iter()
        .map(|e| {
            let a = mesh.vertices[e.vertices[0]];
            let b = mesh.vertices[e.vertices[1]];
            if a[0] <= b[0] {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect();
    segments.sort_by(|x, y| x.0[0].total_cmp(&y.0[0]));
    let domain = mesh.domain();
    let distances: Vec<(Option<Phase>, f64)> = (0..mesh.vertex_count())
        .into_par_iter()
        .map(|v| {
            let p = mesh.vertices[v];
            let phase = vertex_phase(mesh, v);
            let d = domain.distance_to_boundary(p).min(interface_distance(&segments, p));
            (phase, if phase.is_some() { d } else { 0.0 })
        })
        .collect();
    for (phase, t) in [(Phase::Plus, t_plus), (Phase::Minus, t_minus)] {
        let inradius = distances
            .iter()
            .filter(|(p, _)| *p == Some(phase))
            .map(|(_, d)| *d)
            .fold(0.0, f64::max);
        if 2.0 * t >= inradius {
            return Err(Error::Config(format!(
                "layer width t = {t} too large for the {phase:?} phase (inradius {inradius})"
            )));
        }
    }
    let eta = |phase: Phase, t: f64| -> Vec<f64> {
        distances
            .iter()
            .map(|(p, d)| if *p == Some(phase) { ramp(*d, t) } else { 0.0 })
            .collect()
    };
    Ok(CutoffPair {
        t_plus,
        t_minus,
        plus: eta(Phase::Plus, t_plus),
        minus: eta(Phase::Minus, t_minus),
        mesh: mesh.clone(),
    })
}

impl CutoffPair {
    pub fn eta(&self, phase: Phase) -> &[f64] {
        match phase {
            Phase::Plus => &self.plus,
            Phase::Minus => &self.minus,
        }
    }

    pub fn width(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Plus => self.t_plus,
            Phase::Minus => self.t_minus,
        }
    }

    /// Largest element gradient of `η_phase`.
    pub fn max_gradient(&self, phase: Phase) -> f64 {
        let eta = self.eta(phase);
        (0..self.mesh.triangle_count())
            .map(|t| {
                let (g, _) = p1_gradients(self.mesh.triangle_points(t));
                let tri = self.mesh.triangles[t];
                let mut d = [0.0; 2];
                for k in 0..3 {
                    d[0] += eta[tri[k]] * g[k][0];
                    d[1] += eta[tri[k]] * g[k][1];
                }
                (d[0] * d[0] + d[1] * d[1]).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `|∇η_±| ≤ 2/t_±` on every element.
    pub fn gradient_bound_holds(&self) -> bool {
        [Phase::Plus, Phase::Minus]
            .iter()
            .all(|&p| self.max_gradient(p) <= 2.0 / self.width(p))
    }

    /// Element lies where `η_+ = 1` or `η_- = 1` at all three vertices.
    pub fn is_bulk(&self, t: usize) -> bool {
        let tri = self.mesh.triangles[t];
        tri.iter().all(|&v| self.plus[v] == 1.0) || tri.iter().all(|&v| self.minus[v] == 1.0)
    }
}

/// Cell data of one phase used by the approximant.
#[derive(Debug, Clone, Copy)]
pub struct PhaseCorrector<'a> {
    pub cell: &'a CellSolution,
    pub eps: f64,
}

/// Nodal `w^ε`; `u^ε` and `u^0` must share a mesh.
pub fn first_order_approximant(
    ue: &FieldFunction,
    u0: &FieldFunction,
    plus: PhaseCorrector<'_>,
    minus: PhaseCorrector<'_>,
    cutoffs: &CutoffPair,
    mollifier: &Mollifier,
) -> Result<FieldFunction> {
    let m = ue.m();
    if plus.cell.m != m || minus.cell.m != m {
        return Err(Error::Config(format!(
            "correctors have m = {} / {} but the solution has m = {m}",
            plus.cell.m, minus.cell.m
        )));
    }
    if plus.cell.correctors.len() != DIM * m || minus.cell.correctors.len() != DIM * m {
        return Err(Error::Config("missing correctors".into()));
    }
    let diff = ue.sub(u0)?;
    let mesh = diff.mesh().clone();
    let mut values = diff.into_values();
    let nc = DIM * m;
    values.par_chunks_mut(m).enumerate().for_each(|(v, w)| {
        let x = mesh.vertices[v];
        let mut sg = vec![0.0; nc];
        let mut chi = vec![0.0; nc * m];
        for (phase, pc) in [(Phase::Plus, plus), (Phase::Minus, minus)] {
            let eta = cutoffs.eta(phase)[v];
            if eta == 0.0 {
                continue;
            }
            mollifier.smooth_at(x, pc.eps, nc, |p, o| phase_gradient(u0, phase, p, o), &mut sg);
            pc.cell.correctors_at([x[0] / pc.eps, x[1] / pc.eps], &mut chi);
            for g in 0..m {
                let s: f64 = (0..nc).map(|c| chi[c * m + g] * sg[c]).sum();
                w[g] -= pc.eps * eta * s;
            }
        }
    });
    FieldFunction::new(mesh, m, values)
}

/// Bulk and layer norms of `w^ε` next to those of `u^ε − u^0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub bulk_l2_w: f64,
    pub bulk_grad_w: f64,
    pub bulk_h1_w: f64,
    pub bulk_grad_diff: f64,
    pub layer_grad_w: f64,
    pub layer_grad_diff: f64,
    pub total_h1_w: f64,
    /// `bulk_h1_w / bulk_grad_diff`
    pub ratio: f64,
    pub bulk_area: f64,
}

impl ExpansionReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("quantity,value\n");
        for (k, v) in [
            ("bulk_l2_w", self.bulk_l2_w),
            ("bulk_grad_w", self.bulk_grad_w),
            ("bulk_h1_w", self.bulk_h1_w),
            ("bulk_grad_diff", self.bulk_grad_diff),
            ("layer_grad_w", self.layer_grad_w),
            ("layer_grad_diff", self.layer_grad_diff),
            ("total_h1_w", self.total_h1_w),
            ("ratio", self.ratio),
            ("bulk_area", self.bulk_area),
        ] {
            s.push_str(&format!("{k},{v:.12e}\n"));
        }
        s
    }
}

pub fn expansion_error_report(w: &FieldFunction, diff: &FieldFunction, cutoffs: &CutoffPair) -> ExpansionReport {
    let mesh = w.mesh();
    let (bulk, layer): (Vec<usize>, Vec<usize>) = (0..mesh.triangle_count()).partition(|&t| cutoffs.is_bulk(t));
    let (bl2, bgr) = w.squares_over(bulk.iter().copied());
    let (_, dgr) = diff.squares_over(bulk.iter().copied());
    let (_, lgr) = w.squares_over(layer.iter().copied());
    let (_, ldgr) = diff.squares_over(layer.iter().copied());
    let bulk_area = bulk.iter().map(|&t| mesh.area(t)).sum();
    let bulk_h1_w = (bl2 + bgr).sqrt();
    let bulk_grad_diff = dgr.sqrt();
    ExpansionReport {
        bulk_l2_w: bl2.sqrt(),
        bulk_grad_w: bgr.sqrt(),
        bulk_h1_w,
        bulk_grad_diff,
        layer_grad_w: lgr.sqrt(),
        layer_grad_diff: ldgr.sqrt(),
        total_h1_w: w.h1_norm(),
        ratio: if bulk_grad_diff > 0.0 { bulk_h1_w / bulk_grad_diff } else { 0.0 },
        bulk_area,
    }
}

/// Everything produced by [`run_expansion`].
#[derive(Debug, Clone)]
pub struct ExpansionOutcome {
    pub ue: FieldFunction,
    pub u0: FieldFunction,
    pub w: FieldFunction,
    pub cutoffs: CutoffPair,
    pub report: ExpansionReport,
}

/// Default layer widths `t_± = √ε_±`.
pub fn default_layer_widths(cfg: &ExperimentConfig) -> (f64, f64) {
    (cfg.eps_plus.sqrt(), cfg.eps_minus.sqrt())
}

/// Solves `u^ε` and `u^0` on one mesh and builds `w^ε` with layer widths
/// `t_±`.
pub fn run_expansion(cfg: &ExperimentConfig, t_plus: f64, t_minus: f64) -> Result<ExpansionOutcome> {
    cfg.validate_resolution()?;
    let mesh = cfg.mesh()?;
    let cutoffs = build_cutoffs(&mesh, t_plus, t_minus)?;
    let cp = cell_solution(&cfg.plus, cfg.h_cell, &cfg.solver)?;
    let cm = cell_solution(&cfg.minus, cfg.h_cell, &cfg.solver)?;
    let ue = solve_oscillating_on(cfg, &mesh)?.solve.field;
    let u0 = solve_homogenized_on(cfg, &mesh, &cp.homogenized, &cm.homogenized)?.solve.field;
    let w = first_order_approximant(
        &ue,
        &u0,
        PhaseCorrector {
            cell: &cp,
            eps: cfg.eps_plus,
        },
        PhaseCorrector {
            cell: &cm,
            eps: cfg.eps_minus,
        },
        &cutoffs,
        &Mollifier::default(),
    )?;
    let report = expansion_error_report(&w, &ue.sub(&u0)?, &cutoffs);
    Ok(ExpansionOutcome {
        ue,
        u0,
        w,
        cutoffs,
        report,
    })
}
