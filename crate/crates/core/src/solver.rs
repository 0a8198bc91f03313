//! Orchestrated solves of the oscillating problem `u^ε`, the two-sided
//! homogenized problem `u^0` and the one-sided problem `ū`, plus the
//! convergence-rate sweeps built on them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cell::{CellSolution, DEFAULT_H_CELL};
use crate::error::{Error, Result};
use crate::fem::{energy_report, solve_problem, DirichletSolve, EnergyReport, FieldFunction, ProblemData};
use crate::mesh::{build_interface_fitted_mesh, BoxDomain, InterfaceGeometry, Mesh};
use crate::sparse::CgOptions;
use crate::tensor::{CoefficientTensor, PiecewiseTensor, Tensor4};

/// Everything needed to pose one transmission problem.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub domain: BoxDomain,
    pub geometry: InterfaceGeometry,
    pub plus: CoefficientTensor,
    pub minus: CoefficientTensor,
    pub eps_plus: f64,
    pub eps_minus: f64,
    pub data: ProblemData,
    pub h: f64,
    pub h_cell: f64,
    pub solver: CgOptions,
}

impl ExperimentConfig {
    /// Unit box `[-1/2, 1/2]^2`, flat interface, default cell and solver
    /// settings.
    pub fn new(
        plus: CoefficientTensor,
        minus: CoefficientTensor,
        eps_plus: f64,
        eps_minus: f64,
        data: ProblemData,
        h: f64,
    ) -> Self {
        Self {
            domain: BoxDomain {
                min: [-0.5, -0.5],
                max: [0.5, 0.5],
            },
            geometry: InterfaceGeometry::flat(),
            plus,
            minus,
            eps_plus,
            eps_minus,
            data,
            h,
            h_cell: DEFAULT_H_CELL,
            solver: CgOptions::default(),
        }
    }

    /// Scale and system-size guards shared by all solves.
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_plus > 0.0 && self.eps_plus.is_finite()) {
            return Err(Error::Config(format!("scales.eps_plus = {} must be positive", self.eps_plus)));
        }
        if !(self.eps_minus >= self.eps_plus && self.eps_minus.is_finite()) {
            return Err(Error::Config(format!(
                "scales.eps_minus = {} must satisfy eps_plus <= eps_minus (eps_plus = {})",
                self.eps_minus, self.eps_plus
            )));
        }
        if !(self.h > 0.0) {
            return Err(Error::Config(format!("mesh.h = {} must be positive", self.h)));
        }
        if self.plus.m() != self.minus.m() || self.plus.m() != self.data.m() {
            return Err(Error::Config(format!(
                "system sizes disagree: plus m = {}, minus m = {}, data m = {}",
                self.plus.m(),
                self.minus.m(),
                self.data.m()
            )));
        }
        Ok(())
    }

    /// The resolution guard `h ≤ ε/8` for every phase whose tensor varies.
    pub fn validate_resolution(&self) -> Result<()> {
        self.validate()?;
        let mut finest = f64::INFINITY;
        if !self.plus.is_constant() {
            finest = finest.min(self.eps_plus);
        }
        if !self.minus.is_constant() {
            finest = finest.min(self.eps_minus);
        }
        if self.h > finest / 8.0 * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "mesh.h = {} does not resolve the microstructure; use h <= {}",
                self.h,
                finest / 8.0
            )));
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<Arc<Mesh>> {
        Ok(Arc::new(build_interface_fitted_mesh(self.domain, &self.geometry, self.h)?))
    }

    pub fn oscillating_tensor(&self) -> Result<PiecewiseTensor> {
        PiecewiseTensor::new(self.plus.clone(), self.minus.clone(), self.eps_plus, self.eps_minus)
    }

    pub fn with_scales(&self, eps_plus: f64, eps_minus: f64, h: f64) -> Self {
        Self {
            eps_plus,
            eps_minus,
            h,
            ..self.clone()
        }
    }
}

/// A solve together with its energy monitor.
#[derive(Debug, Clone)]
pub struct Solved {
    pub solve: DirichletSolve,
    pub energy: EnergyReport,
}

impl Solved {
    pub fn field(&self) -> &FieldFunction {
        &self.solve.field
    }
}

fn run(mesh: &Arc<Mesh>, tensor: &PiecewiseTensor, cfg: &ExperimentConfig) -> Result<Solved> {
    let solve = solve_problem(mesh, tensor, &cfg.data, &cfg.solver)?;
    let energy = energy_report(&solve.field, &cfg.data)?;
    Ok(Solved { solve, energy })
}

/// `u^ε` on the configured mesh.
pub fn solve_oscillating(cfg: &ExperimentConfig) -> Result<Solved> {
    cfg.validate_resolution()?;
    let mesh = cfg.mesh()?;
    solve_oscillating_on(cfg, &mesh)
}

pub fn solve_oscillating_on(cfg: &ExperimentConfig, mesh: &Arc<Mesh>) -> Result<Solved> {
    run(mesh, &cfg.oscillating_tensor()?, cfg)
}

fn constant_pair(plus: &Tensor4, minus: &Tensor4, lambda: f64) -> Result<PiecewiseTensor> {
    PiecewiseTensor::unscaled(
        CoefficientTensor::constant(plus.clone(), lambda),
        CoefficientTensor::constant(minus.clone(), lambda),
    )
}

/// Cell solution of one phase tensor; constant tensors use a tiny grid since
/// their correctors vanish.
pub fn cell_solution(a: &CoefficientTensor, h_cell: f64, opts: &CgOptions) -> Result<CellSolution> {
    let h = if a.is_constant() { 0.25 } else { h_cell };
    CellSolution::compute(a, h, opts)
}

/// `u^0` with constant tensors `Â_±` on the configured mesh.
pub fn solve_homogenized_two_sided(cfg: &ExperimentConfig, hat_plus: &Tensor4, hat_minus: &Tensor4) -> Result<Solved> {
    cfg.validate()?;
    let mesh = cfg.mesh()?;
    solve_homogenized_on(cfg, &mesh, hat_plus, hat_minus)
}

pub fn solve_homogenized_on(
    cfg: &ExperimentConfig,
    mesh: &Arc<Mesh>,
    hat_plus: &Tensor4,
    hat_minus: &Tensor4,
) -> Result<Solved> {
    let lambda = cfg.plus.lambda().max(cfg.minus.lambda());
    run(mesh, &constant_pair(hat_plus, hat_minus, lambda)?, cfg)
}

/// The frozen minus-side tensor `A_-(0)`.
pub fn frozen_minus(cfg: &ExperimentConfig) -> Tensor4 {
    cfg.minus.eval([0.0, 0.0])
}

/// `ū` with `Â_+` above the interface and `A_-(0)` below.
pub fn solve_one_sided(cfg: &ExperimentConfig, hat_plus: &Tensor4) -> Result<Solved> {
    cfg.validate()?;
    let mesh = cfg.mesh()?;
    solve_homogenized_on(cfg, &mesh, hat_plus, &frozen_minus(cfg))
}

/// Richardson-extrapolated nodal values `(4 u_{h/2} − u_h) / 3` on the
/// vertices of the `h` mesh.
pub fn richardson_reference(
    cfg: &ExperimentConfig,
    solve: impl Fn(&ExperimentConfig, &Arc<Mesh>) -> Result<Solved>,
) -> Result<FieldFunction> {
    let coarse_mesh = cfg.mesh()?;
    let coarse = solve(cfg, &coarse_mesh)?.solve.field;
    let fine_cfg = ExperimentConfig {
        h: cfg.h / 2.0,
        ..cfg.clone()
    };
    let fine_mesh = fine_cfg.mesh()?;
    let fine = solve(&fine_cfg, &fine_mesh)?.solve.field;
    let m = coarse.m();
    let mut values = coarse.values().to_vec();
    for (v, p) in coarse_mesh.vertices.iter().enumerate() {
        let f = fine
            .eval(*p)
            .ok_or_else(|| Error::Mesh("coarse vertex outside the refined mesh".into()))?;
        for a in 0..m {
            values[v * m + a] = (4.0 * f[a] - values[v * m + a]) / 3.0;
        }
    }
    FieldFunction::new(coarse_mesh, m, values)
}

/// Least-squares slope of `log y` against `log x`, ignoring non-positive
/// entries.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// One row of a rate sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub eps_plus: f64,
    pub eps_minus: f64,
    pub h: f64,
    pub l2_error: f64,
    /// Fitted slope over the rows so far (in the swept scale).
    pub slope_so_far: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub slope: Option<f64>,
    pub strictly_decreasing: bool,
}

impl RateReport {
    fn from_rows(mut rows: Vec<RateRow>, scale: impl Fn(&RateRow) -> f64) -> Self {
        for k in 0..rows.len() {
            let xs: Vec<f64> = rows[..=k].iter().map(&scale).collect();
            let ys: Vec<f64> = rows[..=k].iter().map(|r| r.l2_error).collect();
            rows[k].slope_so_far = loglog_slope(&xs, &ys);
        }
        let slope = rows.last().and_then(|r| r.slope_so_far);
        let strictly_decreasing = rows.windows(2).all(|w| w[1].l2_error < w[0].l2_error);
        Self {
            rows,
            slope,
            strictly_decreasing,
        }
    }

    /// Report of a sweep over `ε_-`.
    pub fn two_sided(rows: Vec<RateRow>) -> Self {
        Self::from_rows(rows, |r| r.eps_minus)
    }

    /// Report of a sweep over `ε_+`.
    pub fn one_sided(rows: Vec<RateRow>) -> Self {
        Self::from_rows(rows, |r| r.eps_plus)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps_plus,eps_minus,h,L2_error,slope_so_far\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{}\n",
                r.eps_plus,
                r.eps_minus,
                r.h,
                r.l2_error,
                r.slope_so_far.map_or(String::new(), |v| format!("{v:.6}"))
            ));
        }
        s
    }
}

/// Options of a rate sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    /// `ε_+ = ratio · ε_-`
    pub ratio: f64,
    /// `h = ε_+ / resolution`
    pub resolution: f64,
    pub richardson: bool,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            ratio: 0.5,
            resolution: 8.0,
            richardson: true,
        }
    }
}

/// Homogenized tensors of both phases of `cfg`.
pub fn cell_pair(cfg: &ExperimentConfig) -> Result<(CellSolution, CellSolution)> {
    Ok((
        cell_solution(&cfg.plus, cfg.h_cell, &cfg.solver)?,
        cell_solution(&cfg.minus, cfg.h_cell, &cfg.solver)?,
    ))
}

/// One level of the two-sided sweep at `ε_- = eps_minus`.
pub fn two_sided_level(
    cfg: &ExperimentConfig,
    cells: &(CellSolution, CellSolution),
    eps_minus: f64,
    opts: &RateOptions,
) -> Result<RateRow> {
    let (cp, cm) = cells;
    let ep = opts.ratio * eps_minus;
    let level = cfg.with_scales(ep, eps_minus, ep / opts.resolution);
    level.validate_resolution()?;
    let (ue, u0) = if opts.richardson {
        (
            richardson_reference(&level, solve_oscillating_on)?,
            richardson_reference(&level, |c, m| solve_homogenized_on(c, m, &cp.homogenized, &cm.homogenized))?,
        )
    } else {
        let mesh = level.mesh()?;
        (
            solve_oscillating_on(&level, &mesh)?.solve.field,
            solve_homogenized_on(&level, &mesh, &cp.homogenized, &cm.homogenized)?.solve.field,
        )
    };
    Ok(RateRow {
        eps_plus: ep,
        eps_minus,
        h: level.h,
        l2_error: ue.sub(&u0)?.l2_norm(),
        slope_so_far: None,
    })
}

/// `‖u^ε − u^0‖_{L²(Ω)}` over a list of `ε_-` values.
pub fn two_sided_rate(cfg: &ExperimentConfig, eps_minus: &[f64], opts: &RateOptions) -> Result<RateReport> {
    let cells = cell_pair(cfg)?;
    let rows = eps_minus
        .iter()
        .map(|&em| two_sided_level(cfg, &cells, em, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(RateReport::two_sided(rows))
}

/// One level of the one-sided sweep at `ε_+ = eps_plus`.
pub fn one_sided_level(cfg: &ExperimentConfig, hat_plus: &Tensor4, eps_plus: f64, resolution: f64) -> Result<RateRow> {
    let level = cfg.with_scales(eps_plus, cfg.eps_minus, (eps_plus / resolution).min(cfg.h));
    level.validate_resolution()?;
    let mesh = level.mesh()?;
    let ue = solve_oscillating_on(&level, &mesh)?.solve.field;
    let ub = solve_homogenized_on(&level, &mesh, hat_plus, &frozen_minus(cfg))?.solve.field;
    Ok(RateRow {
        eps_plus,
        eps_minus: cfg.eps_minus,
        h: level.h,
        l2_error: ue.sub(&ub)?.l2_norm(),
        slope_so_far: None,
    })
}

/// `‖u^ε − ū‖_{L²(Ω)}` over a list of `ε_+` values at the configured `ε_-`.
pub fn one_sided_rate(cfg: &ExperimentConfig, eps_plus: &[f64], resolution: f64) -> Result<RateReport> {
    let cp = cell_solution(&cfg.plus, cfg.h_cell, &cfg.solver)?;
    let rows = eps_plus
        .iter()
        .map(|&ep| one_sided_level(cfg, &cp.homogenized, ep, resolution))
        .collect::<Result<Vec<_>>>()?;
    Ok(RateReport::one_sided(rows))
}

/// Largest nodal difference between solving with `whole` and summing the
/// solves of `parts` (the data must add up to `whole`).
pub fn superposition_defect(cfg: &ExperimentConfig, parts: &[ProblemData], whole: &ProblemData) -> Result<f64> {
    let mesh = cfg.mesh()?;
    let tensor = cfg.oscillating_tensor()?;
    let direct = solve_problem(&mesh, &tensor, whole, &cfg.solver)?.field;
    let mut sum = FieldFunction::zeros(mesh.clone(), whole.m());
    for p in parts {
        let u = solve_problem(&mesh, &tensor, p, &cfg.solver)?.field;
        sum = sum.axpy(1.0, &u)?;
    }
    let scale = direct.values().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    Ok(sum
        .values()
        .iter()
        .zip(direct.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_stiffness, scalar_fn};
    use crate::tensor::Phase;

    fn data_g(g: f64) -> ProblemData {
        ProblemData::new(1)
            .with_interface(scalar_fn(move |_| g))
            .with_boundary(scalar_fn(|x| 0.2 * x[0] + 0.1 * x[1]))
    }

    #[test]
    fn guards_reject_bad_scales_and_resolution() {
        let lam = CoefficientTensor::laminate(0, 0.5, 1.0, 4.0, 4.0);
        let id = CoefficientTensor::isotropic(1, 1.0, 1.0);
        let cfg = ExperimentConfig::new(lam.clone(), id.clone(), 0.1, 0.05, data_g(1.0), 0.01);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = ExperimentConfig::new(lam, id, 1.0 / 16.0, 1.0 / 16.0, data_g(1.0), 1.0 / 64.0);
        match cfg.validate_resolution() {
            Err(Error::Config(msg)) => assert!(msg.contains("0.0078125"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_tensors_make_all_three_problems_agree() {
        let p = CoefficientTensor::isotropic(1, 3.0, 3.0);
        let m = CoefficientTensor::isotropic(1, 1.0, 3.0);
        let cfg = ExperimentConfig::new(p.clone(), m.clone(), 1.0, 1.0, data_g(2.0), 1.0 / 32.0);
        let ue = solve_oscillating(&cfg).unwrap();
        let cp = cell_solution(&p, cfg.h_cell, &cfg.solver).unwrap();
        let cm = cell_solution(&m, cfg.h_cell, &cfg.solver).unwrap();
        let u0 = solve_homogenized_two_sided(&cfg, &cp.homogenized, &cm.homogenized).unwrap();
        let ub = solve_one_sided(&cfg, &cp.homogenized).unwrap();
        let d0 = ue.field().sub(u0.field()).unwrap().l2_norm();
        let d1 = u0.field().sub(ub.field()).unwrap().l2_norm();
        assert!(d0 < 1e-12 && d1 < 1e-12);
        assert!(ue.energy.constant.is_finite());
    }

    #[test]
    fn matched_phases_reduce_to_the_interface_free_problem() {
        let a = CoefficientTensor::checkerboard(1.0, 4.0, 4.0);
        let flux = std::sync::Arc::new(|x: [f64; 2], o: &mut [f64]| {
            o[0] = (3.0 * x[1]).sin();
            o[1] = x[0] * x[0];
        });
        let data = ProblemData::new(1)
            .with_flux(Phase::Plus, flux.clone())
            .with_flux(Phase::Minus, flux)
            .with_boundary(scalar_fn(|x| x[0]));
        let cfg = ExperimentConfig::new(a.clone(), a, 1.0 / 8.0, 1.0 / 8.0, data.clone(), 1.0 / 64.0);
        let ue = solve_oscillating(&cfg).unwrap();
        // interface-free assembly: the interface data term vanishes because the
        // traces of h agree, so only the volume terms remain
        let mesh = cfg.mesh().unwrap();
        let tensor = cfg.oscillating_tensor().unwrap();
        let k = assemble_stiffness(&mesh, &tensor).unwrap();
        let mut load = vec![0.0; mesh.vertex_count()];
        for t in 0..mesh.triangle_count() {
            let (g, area) = crate::mesh::p1_gradients(mesh.triangle_points(t));
            let c = mesh.centroid(t);
            let h = [(3.0 * c[1]).sin(), c[0] * c[0]];
            for (kk, &v) in mesh.triangles[t].iter().enumerate() {
                load[v] += area * (h[0] * g[kk][0] + h[1] * g[kk][1]);
            }
        }
        let fb = data.boundary_nodal(&mesh).unwrap();
        let direct = crate::fem::solve_dirichlet(&mesh, &k, &load, &fb, &cfg.solver).unwrap();
        let diff = direct
            .field
            .values()
            .iter()
            .zip(ue.field().values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff}");
    }

    #[test]
    fn interface_residual_reproduces_the_data() {
        let cfg = ExperimentConfig::new(
            CoefficientTensor::laminate(0, 0.5, 1.0, 4.0, 4.0),
            CoefficientTensor::isotropic(1, 1.0, 4.0),
            1.0 / 4.0,
            1.0 / 4.0,
            ProblemData::new(1).with_interface(scalar_fn(|_| 1.0)),
            1.0 / 32.0,
        );
        let ue = solve_oscillating(&cfg).unwrap();
        let mesh = ue.field().mesh().clone();
        let k = assemble_stiffness(&mesh, &cfg.oscillating_tensor().unwrap()).unwrap();
        let r = k.mul_vec(ue.field().values());
        for e in &mesh.interface_edges {
            for &v in &e.vertices {
                if !mesh.is_boundary(v) {
                    // ∫ g φ_v = h for unit g on a uniform grid
                    assert!((r[v] + mesh.h).abs() < 1e-8 * mesh.h.max(1.0), "{}", r[v]);
                }
            }
        }
    }

    #[test]
    fn homogenized_solve_recovers_the_lift() {
        use crate::piecewise_linear::lift_from_g0;
        let lam = CoefficientTensor::laminate(1, 0.5, 1.0, 4.0, 4.0);
        let cp = cell_solution(&lam, 1.0 / 32.0, &CgOptions::default()).unwrap();
        let hat = cp.homogenized.clone();
        let ell = lift_from_g0(&nalgebra::DVector::from_element(1, 2.0), &hat).unwrap();
        let e2 = ell.clone();
        let data = ProblemData::new(1)
            .with_interface(scalar_fn(|_| 2.0))
            .with_boundary(scalar_fn(move |x| e2.eval(x)[0]));
        let cfg = ExperimentConfig::new(lam, CoefficientTensor::isotropic(1, 1.0, 4.0), 0.1, 0.1, data, 1.0 / 32.0);
        let u0 = solve_homogenized_two_sided(&cfg, &hat, &Tensor4::isotropic(1, 1.0)).unwrap();
        for (v, p) in u0.field().mesh().vertices.iter().enumerate() {
            assert!((u0.field().values()[v] - ell.eval(*p)[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn homogenized_refinement_is_second_order() {
        let p = CoefficientTensor::isotropic(1, 3.0, 3.0);
        let m = CoefficientTensor::isotropic(1, 1.0, 3.0);
        let data = ProblemData::new(1)
            .with_interface(scalar_fn(|x| 1.0 + (3.0 * x[0]).sin()))
            .with_boundary(scalar_fn(|x| (x[0] * 2.0).cos() * x[1]));
        let base = ExperimentConfig::new(p, m, 1.0, 1.0, data, 1.0 / 16.0);
        let hat_p = Tensor4::isotropic(1, 3.0);
        let hat_m = Tensor4::isotropic(1, 1.0);
        let diffs: Vec<f64> = [1.0 / 16.0, 1.0 / 32.0]
            .iter()
            .map(|&h| {
                let c = ExperimentConfig { h, ..base.clone() };
                let coarse = solve_homogenized_two_sided(&c, &hat_p, &hat_m).unwrap();
                let fine = solve_homogenized_two_sided(&ExperimentConfig { h: h / 2.0, ..c.clone() }, &hat_p, &hat_m).unwrap();
                let mesh = coarse.field().mesh().clone();
                let f = FieldFunction::interpolate(mesh, 1, |x, o| o[0] = fine.field().eval(x).unwrap()[0]);
                coarse.field().sub(&f).unwrap().l2_norm()
            })
            .collect();
        let order = (diffs[0] / diffs[1]).log2();
        assert!(order > 1.7, "{diffs:?}");
    }

    #[test]
    fn one_sided_freezes_the_minus_tensor() {
        let minus = CoefficientTensor::periodic_scalar([1.0, 1.0], 3.0, |y| 2.0 + (2.0 * std::f64::consts::PI * y[0]).sin());
        let cfg = ExperimentConfig::new(CoefficientTensor::isotropic(1, 1.0, 3.0), minus, 0.1, 4.0, data_g(1.0), 0.05);
        assert_eq!(frozen_minus(&cfg).as_slice(), Tensor4::isotropic(1, 2.0).as_slice());
    }

    #[test]
    fn constant_rate_sweep_is_identically_zero() {
        let cfg = ExperimentConfig::new(
            CoefficientTensor::isotropic(1, 3.0, 3.0),
            CoefficientTensor::isotropic(1, 1.0, 3.0),
            1.0,
            1.0,
            data_g(1.0),
            0.1,
        );
        let rep = two_sided_rate(
            &cfg,
            &[0.5, 0.25],
            &RateOptions {
                resolution: 2.0,
                ..RateOptions::default()
            },
        )
        .unwrap();
        assert!(rep.rows.iter().all(|r| r.l2_error == 0.0));
    }

    #[test]
    fn superposition_holds() {
        let cfg = ExperimentConfig::new(
            CoefficientTensor::checkerboard(1.0, 4.0, 4.0),
            CoefficientTensor::isotropic(1, 2.0, 4.0),
            1.0 / 4.0,
            1.0 / 4.0,
            ProblemData::new(1),
            1.0 / 32.0,
        );
        let h1 = std::sync::Arc::new(|x: [f64; 2], o: &mut [f64]| {
            o[0] = x[0].abs().sqrt();
            o[1] = 0.0;
        });
        let h2 = std::sync::Arc::new(|x: [f64; 2], o: &mut [f64]| {
            o[0] = 0.0;
            o[1] = (5.0 * x[0]).cos();
        });
        let whole = std::sync::Arc::new(|x: [f64; 2], o: &mut [f64]| {
            o[0] = x[0].abs().sqrt();
            o[1] = (5.0 * x[0]).cos();
        });
        let a = ProblemData::new(1).with_flux(Phase::Plus, h1).with_interface(scalar_fn(|_| 1.0));
        let b = ProblemData::new(1).with_flux(Phase::Plus, h2).with_boundary(scalar_fn(|x| x[1]));
        let w = ProblemData::new(1)
            .with_flux(Phase::Plus, whole)
            .with_interface(scalar_fn(|_| 1.0))
            .with_boundary(scalar_fn(|x| x[1]));
        assert!(superposition_defect(&cfg, &[a, b], &w).unwrap() < 1e-8);
    }

    #[test]
    fn slope_fit() {
        let xs = [1.0, 0.5, 0.25];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.7)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 0.7).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_none());
    }
}
