//! Excess functionals `H`, `Φ` and `h`, decay sweeps over shrinking
//! cylinders, the hypothesis audit of the excess iteration, averaged-gradient
//! profiles and the curved-versus-flat interface comparison.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{FieldFunction, ProblemData, VectorFn};
use crate::mesh::{build_interface_fitted_mesh, select_region, BoxDomain, InterfaceGeometry, Mesh, Region, RegionKind, RegionSelector};
use crate::piecewise_linear::{best_fit_excess, constant_fit, lift_from_g0, BestFit, PiecewiseLinearSolution};
use crate::solver::loglog_slope;
use crate::sparse::CgOptions;
use crate::tensor::{holder_seminorm, CoefficientTensor, Phase, PiecewiseTensor, Tensor4};

/// `Φ(u; t)` on `region`; `g` holds `m` samples per interface edge of the mesh.
pub fn excess_phi(u: &FieldFunction, region: &Region, g: &[f64]) -> Result<f64> {
    Ok(constant_fit(u, region, g)?.value)
}

/// `H(u; t)` on `region` with the constant reference tensors `A_±`.
pub fn excess_h(u: &FieldFunction, region: &Region, g: &[f64], a_plus: &Tensor4, a_minus: &Tensor4) -> Result<BestFit> {
    best_fit_excess(u, region, g, a_plus, a_minus)
}

/// `h(t) = (⨍_{Q_t} |∇ℓ_t|²)^{1/2}` for a minimiser `ℓ_t`.
pub fn h_of_t(ell: &PiecewiseLinearSolution, region: &Region) -> f64 {
    let area = region.area();
    if area <= 0.0 {
        return 0.0;
    }
    let sq = |p: Phase| ell.slope(p).iter().map(|v| v * v).sum::<f64>();
    ((region.area_plus * sq(Phase::Plus) + region.area_minus * sq(Phase::Minus)) / area).sqrt()
}

/// Parameters of [`decay_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayOptions {
    pub theta: f64,
    pub r0: f64,
    /// Number of radii `r_0, θ r_0, …`.
    pub levels: usize,
    pub kind: RegionKind,
    /// Radii within a factor 2 of this scale are left out of the fit.
    pub eps_minus: Option<f64>,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self {
            theta: 0.25,
            r0: 0.4,
            levels: 4,
            kind: RegionKind::Cylinder,
            eps_minus: None,
        }
    }
}

/// Excess values at one radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessRow {
    pub r: f64,
    #[serde(rename = "H")]
    pub h_excess: f64,
    #[serde(rename = "Phi")]
    pub phi: f64,
    pub h: f64,
    /// `H(r) / H(previous radius)`
    pub ratio: Option<f64>,
    /// `[M_-, q_d, q_0]` of the minimiser, relative to the centre.
    pub params: Vec<f64>,
    pub degenerate: bool,
    pub in_fit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessReport {
    pub center: [f64; 2],
    pub theta: f64,
    pub rows: Vec<ExcessRow>,
    /// Values at `r/√2` and `r/2` for every main radius `r`, used by the
    /// doubling checks of the audit.
    pub intermediate: Vec<Vec<ExcessRow>>,
    /// Least-squares exponent of `H` against `r` over the fitted rows.
    pub slope: Option<f64>,
    /// Geometric mean of `H(θr)/H(r)`.
    pub contraction: Option<f64>,
    /// The radius floor `8h` stopped the sweep early.
    pub truncated: bool,
    /// A ratio above 0.9 was seen below `ε_-`.
    pub plateau: bool,
}

impl ExcessReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("center_x,center_y,r,H,Phi,h,ratio\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}\n",
                self.center[0],
                self.center[1],
                r.r,
                r.h_excess,
                r.phi,
                r.h,
                r.ratio.map_or(String::new(), |v| format!("{v:.12e}"))
            ));
        }
        s
    }
}

fn selector(kind: RegionKind, center: [f64; 2], r: f64) -> RegionSelector {
    RegionSelector { kind, center, t: r }
}

fn excess_row(
    u: &FieldFunction,
    g: &[f64],
    a_plus: &Tensor4,
    a_minus: &Tensor4,
    sel: RegionSelector,
) -> Result<ExcessRow> {
    let region = select_region(u.mesh(), sel);
    let fit = excess_h(u, &region, g, a_plus, a_minus)?;
    let phi = excess_phi(u, &region, g)?;
    Ok(ExcessRow {
        r: sel.t,
        h_excess: fit.value,
        phi,
        h: h_of_t(&fit.ell, &region),
        ratio: None,
        params: fit.ell.params(),
        degenerate: fit.degenerate,
        in_fit: false,
    })
}

/// Evaluates `H`, `Φ` and `h` at `r_k = θ^k r_0` around `center`.
pub fn decay_sweep(
    u: &FieldFunction,
    g: &[f64],
    a_plus: &Tensor4,
    a_minus: &Tensor4,
    center: [f64; 2],
    opts: &DecayOptions,
) -> Result<ExcessReport> {
    if !(opts.theta > 0.0 && opts.theta <= 0.5) {
        return Err(Error::Config(format!("excess.theta = {} must lie in (0, 1/2]", opts.theta)));
    }
    if !(opts.r0 > 0.0) || opts.levels == 0 {
        return Err(Error::Config("excess.r0 must be positive and excess.levels at least 1".into()));
    }
    let h = u.mesh().h;
    let floor = 8.0 * h * (1.0 - 1e-9);
    let mut rows = Vec::new();
    let mut intermediate = Vec::new();
    let mut truncated = false;
    for k in 0..opts.levels {
        let r = opts.r0 * opts.theta.powi(k as i32);
        if r < floor {
            truncated = true;
            break;
        }
        let mut row = excess_row(u, g, a_plus, a_minus, selector(opts.kind, center, r))?;
        row.in_fit = r > 4.0 * h && opts.eps_minus.is_none_or(|e| r < e / 2.0 || r > 2.0 * e);
        if let Some(prev) = rows.last() {
            let prev: &ExcessRow = prev;
            row.ratio = Some(ratio(row.h_excess, prev.h_excess));
        }
        let mids = [r / std::f64::consts::SQRT_2, r / 2.0]
            .into_iter()
            .filter(|&s| s >= floor)
            .map(|s| excess_row(u, g, a_plus, a_minus, selector(opts.kind, center, s)))
            .collect::<Result<Vec<_>>>()?;
        intermediate.push(mids);
        rows.push(row);
    }
    let fitted: Vec<&ExcessRow> = rows.iter().filter(|r| r.in_fit).collect();
    let slope = loglog_slope(
        &fitted.iter().map(|r| r.r).collect::<Vec<_>>(),
        &fitted.iter().map(|r| r.h_excess).collect::<Vec<_>>(),
    );
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).filter(|v| v.is_finite() && *v > 0.0).collect();
    let contraction = (!ratios.is_empty()).then(|| (ratios.iter().map(|v| v.ln()).sum::<f64>() / ratios.len() as f64).exp());
    let plateau = opts
        .eps_minus
        .is_some_and(|e| rows.iter().any(|r| r.r < e && r.ratio.is_some_and(|q| q > 0.9)));
    Ok(ExcessReport {
        center,
        theta: opts.theta,
        rows,
        intermediate,
        slope,
        contraction,
        truncated,
        plateau,
    })
}

/// `num / den` with `0/0 = 0` and `x/0 = ∞`.
fn ratio(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        0.0
    } else if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// The five inequalities relating `H`, `Φ` and `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuditCheck {
    /// `Φ(r) ≤ H(r) + C h(r)`
    PhiByHAndH,
    /// `h(r) ≤ C (H(r) + Φ(r))`
    HBySum,
    /// `sup_{r≤t≤2r} H(t) ≤ C H(2r)`
    HDoubling,
    /// `sup_{r≤t≤2r} Φ(t) ≤ C Φ(2r)`
    PhiDoubling,
    /// `sup_{r≤s,t≤2r} |h(s) − h(t)| ≤ C H(2r)`
    HOscillation,
}

impl AuditCheck {
    pub const ALL: [AuditCheck; 5] = [
        AuditCheck::PhiByHAndH,
        AuditCheck::HBySum,
        AuditCheck::HDoubling,
        AuditCheck::PhiDoubling,
        AuditCheck::HOscillation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AuditCheck::PhiByHAndH => "Phi<=H+Ch",
            AuditCheck::HBySum => "h<=C(H+Phi)",
            AuditCheck::HDoubling => "supH<=CH(2r)",
            AuditCheck::PhiDoubling => "supPhi<=CPhi(2r)",
            AuditCheck::HOscillation => "osc_h<=CH(2r)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    /// The radius playing the role of `2r` (or `r` for the first two checks).
    pub r: f64,
    pub check: AuditCheck,
    /// Smallest constant making the inequality hold.
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditTable {
    pub rows: Vec<AuditRow>,
}

impl AuditTable {
    pub fn max_constant(&self, check: AuditCheck) -> f64 {
        self.rows.iter().filter(|r| r.check == check).map(|r| r.constant).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,check,constant\n");
        for r in &self.rows {
            s.push_str(&format!("{:.12e},{},{:.12e}\n", r.r, r.check.name(), r.constant));
        }
        s
    }
}

/// Smallest constants for each inequality at each radius of `report`.
pub fn iteration_hypothesis_audit(report: &ExcessReport) -> AuditTable {
    let mut rows = Vec::new();
    for (row, mids) in report.rows.iter().zip(&report.intermediate) {
        let push = |rows: &mut Vec<AuditRow>, check, constant| rows.push(AuditRow { r: row.r, check, constant });
        push(&mut rows, AuditCheck::PhiByHAndH, ratio((row.phi - row.h_excess).max(0.0), row.h));
        push(&mut rows, AuditCheck::HBySum, ratio(row.h, row.h_excess + row.phi));
        let window: Vec<&ExcessRow> = std::iter::once(row).chain(mids.iter()).collect();
        let h_sup = window.iter().map(|r| r.h_excess).fold(0.0, f64::max);
        let phi_sup = window.iter().map(|r| r.phi).fold(0.0, f64::max);
        let hs: Vec<f64> = window.iter().map(|r| r.h).collect();
        let osc = hs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - hs.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        push(&mut rows, AuditCheck::HDoubling, ratio(h_sup, row.h_excess));
        push(&mut rows, AuditCheck::PhiDoubling, ratio(phi_sup, row.phi));
        push(&mut rows, AuditCheck::HOscillation, ratio(osc, row.h_excess));
    }
    AuditTable { rows }
}

/// One radius of a gradient profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzRow {
    pub center: [f64; 2],
    pub r: f64,
    /// `(⨍_{B_r} |∇u|²)^{1/2}`
    pub average_gradient: f64,
    /// `average_gradient` over the data bracket of the centre.
    pub ratio: f64,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzProfile {
    pub rows: Vec<LipschitzRow>,
    /// Largest per-centre `max/min` of the averaged gradient.
    pub variation: f64,
}

impl LipschitzProfile {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("center_x,center_y,r,avg_grad,ratio,skipped\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}\n",
                r.center[0], r.center[1], r.r, r.average_gradient, r.ratio, r.skipped
            ));
        }
        s
    }

    /// `max/min` of the averaged gradient for the rows of one centre.
    pub fn variation_at(&self, center: [f64; 2]) -> f64 {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.center == center && !r.skipped)
            .map(|r| r.average_gradient)
            .collect();
        let max = vals.iter().cloned().fold(0.0, f64::max);
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if vals.is_empty() {
            1.0
        } else {
            ratio(max, min)
        }
    }
}

/// Averaged gradients over balls `B_r(c)` for each centre and radius.
///
/// Radii at or below `floor` or below four mesh widths are kept as skipped
/// rows. The bracket normalising each centre is the averaged gradient on
/// the largest ball plus `sup |g|` and the `C^α` seminorm of `g` on the
/// interface inside that ball.
pub fn lipschitz_profile(
    u: &FieldFunction,
    g: &[f64],
    alpha: f64,
    centers: &[[f64; 2]],
    radii: &[f64],
    floor: f64,
) -> Result<LipschitzProfile> {
    let mesh = u.mesh();
    let m = u.m();
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    let mut rows = Vec::new();
    for &c in centers {
        let big = select_region(mesh, RegionSelector::ball(c, r_max));
        if big.is_empty() {
            return Err(Error::Domain(format!("no elements within {r_max} of ({}, {})", c[0], c[1])));
        }
        let (_, gr) = u.squares_over(big.elements());
        let mut bracket = (gr / big.area()).sqrt();
        if !big.interface_edges.is_empty() && !g.is_empty() {
            let pts: Vec<[f64; 2]> = big.interface_edges.iter().map(|&e| mesh.interface_edges[e].midpoint).collect();
            let vals: Vec<f64> = big
                .interface_edges
                .iter()
                .flat_map(|&e| g[e * m..(e + 1) * m].iter().copied())
                .collect();
            bracket += vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if pts.len() >= 2 && alpha > 0.0 && alpha < 1.0 {
                bracket += holder_seminorm(&pts, &vals, alpha)?;
            }
        }
        for &r in radii {
            let skipped = r <= floor || r < 4.0 * mesh.h;
            let average_gradient = if skipped {
                0.0
            } else {
                let reg = select_region(mesh, RegionSelector::ball(c, r));
                let (_, gr) = u.squares_over(reg.elements());
                (gr / reg.area()).sqrt()
            };
            rows.push(LipschitzRow {
                center: c,
                r,
                average_gradient,
                ratio: ratio(average_gradient, bracket),
                skipped,
            });
        }
    }
    let mut profile = LipschitzProfile { rows, variation: 1.0 };
    profile.variation = centers.iter().map(|&c| profile.variation_at(c)).fold(1.0, f64::max);
    Ok(profile)
}

/// Geometric radii `r_max · q^k` strictly above `floor`.
pub fn geometric_radii(r_max: f64, q: f64, floor: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = r_max;
    while r > floor && out.len() < 64 {
        out.push(r);
        r *= q;
    }
    out
}

/// Setup of the curved-versus-flat interface comparison.
#[derive(Clone)]
pub struct StabilitySetup {
    pub a_plus: Tensor4,
    pub a_minus: Tensor4,
    /// Interface data `g`; the flat surrogate uses `g(0)`.
    pub g: VectorFn,
    pub alpha: f64,
    /// Amplitude `a = amplitude_factor · t^{1+α}` of `ψ = a sin(2π x_1)`.
    pub amplitude_factor: f64,
    pub frequency: f64,
    /// Cells across `Q_t`.
    pub cells: usize,
    pub solver: CgOptions,
}

impl std::fmt::Debug for StabilitySetup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StabilitySetup")
            .field("alpha", &self.alpha)
            .field("amplitude_factor", &self.amplitude_factor)
            .field("cells", &self.cells)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub t: f64,
    pub amplitude: f64,
    /// `(1/t)(⨍_{Q_t} |u^0 − v_t|²)^{1/2}`
    pub normalized_difference: f64,
    /// `t^α [g]_{C^α} + t^{α/2} |g(0)|`
    pub bound: f64,
}

/// Solves the curved problem `u^0` and the flat surrogate `v_t` on
/// `Q_t = (−t, t)²` with the same boundary values (the piecewise linear
/// lift of `g(0)`) and compares them.
pub fn interface_stability_experiment(setup: &StabilitySetup, t: f64) -> Result<StabilityRow> {
    let m = setup.a_plus.m();
    if setup.cells < 4 || !setup.cells.is_multiple_of(2) {
        return Err(Error::Config(format!("stability.cells = {} must be even and at least 4", setup.cells)));
    }
    let amplitude = setup.amplitude_factor * t.powf(1.0 + setup.alpha);
    let mut g0 = vec![0.0; m];
    (setup.g)([0.0, 0.0], &mut g0);
    let ell = lift_from_g0(&DVector::from_vec(g0.clone()), &setup.a_plus)?;
    let boundary: VectorFn = Arc::new(move |x, out: &mut [f64]| out.copy_from_slice(ell.eval(x).as_slice()));
    let domain = BoxDomain::centered([0.0, 0.0], t);
    let h = 2.0 * t / setup.cells as f64;
    let tensor = PiecewiseTensor::unscaled(
        CoefficientTensor::constant(setup.a_plus.clone(), setup.a_plus.rayleigh_bounds().1.max(1.0)),
        CoefficientTensor::constant(setup.a_minus.clone(), setup.a_minus.rayleigh_bounds().1.max(1.0)),
    )?;
    let lam = tensor.lambda();
    let tensor = PiecewiseTensor::unscaled(
        CoefficientTensor::constant(setup.a_plus.clone(), lam),
        CoefficientTensor::constant(setup.a_minus.clone(), lam),
    )?;
    let freq = setup.frequency;
    let geom = if amplitude == 0.0 {
        InterfaceGeometry::flat()
    } else {
        InterfaceGeometry::from_fn(
            move |x| amplitude * (2.0 * std::f64::consts::PI * freq * x).sin(),
            1.0,
            amplitude * (2.0 * std::f64::consts::PI * freq).powi(2),
        )
    };
    let curved_mesh: Arc<Mesh> = Arc::new(build_interface_fitted_mesh(domain, &geom, h)?);
    let flat_mesh: Arc<Mesh> = Arc::new(build_interface_fitted_mesh(domain, &InterfaceGeometry::flat(), h)?);
    let curved_data = ProblemData::new(m).with_interface(setup.g.clone()).with_boundary(boundary.clone());
    let flat_data = ProblemData::new(m)
        .with_interface(crate::fem::constant_fn(g0.clone()))
        .with_boundary(boundary);
    let u0 = crate::fem::solve_problem(&curved_mesh, &tensor, &curved_data, &setup.solver)?.field;
    let vt = crate::fem::solve_problem(&flat_mesh, &tensor, &flat_data, &setup.solver)?.field;
    let vt_on_curved = FieldFunction::interpolate(curved_mesh.clone(), m, |x, out| {
        out.copy_from_slice(&vt.eval(x).expect("same box"));
    });
    let diff = u0.sub(&vt_on_curved)?;
    let normalized_difference = (diff.l2_norm().powi(2) / domain.area()).sqrt() / t;
    let samples: Vec<[f64; 2]> = (0..=32).map(|k| [-t + 2.0 * t * k as f64 / 32.0, 0.0]).collect();
    let mut vals = vec![0.0; samples.len() * m];
    for (k, p) in samples.iter().enumerate() {
        (setup.g)(*p, &mut vals[k * m..(k + 1) * m]);
    }
    let alpha = setup.alpha.clamp(1e-6, 1.0 - 1e-6);
    let seminorm = holder_seminorm(&samples, &vals, alpha)?;
    let g0n = g0.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(StabilityRow {
        t,
        amplitude,
        normalized_difference,
        bound: t.powf(setup.alpha) * seminorm + t.powf(setup.alpha / 2.0) * g0n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::scalar_fn;
    use crate::mesh::build_interface_fitted_mesh;
    use crate::piecewise_linear::transmission_data;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mesh(r: f64, h: f64) -> Arc<Mesh> {
        Arc::new(build_interface_fitted_mesh(BoxDomain::centered([0.0, 0.0], r), &InterfaceGeometry::flat(), h).unwrap())
    }

    fn samples(mesh: &Mesh, m: usize, g: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        mesh.interface_edges
            .iter()
            .flat_map(|e| std::iter::repeat_n(g(e.midpoint), m))
            .collect()
    }

    #[test]
    fn phi_closed_forms() {
        let ms = mesh(0.5, 1.0 / 64.0);
        let region = select_region(&ms, RegionSelector::cylinder([0.0, 0.0], 0.25));
        let five = FieldFunction::interpolate(ms.clone(), 1, |_, o| o[0] = 5.0);
        let zero_g = samples(&ms, 1, |_| 0.0);
        let v = excess_phi(&five, &region, &zero_g).unwrap();
        assert!(v < 1e-10, "{v}");
        let x1 = FieldFunction::interpolate(ms.clone(), 1, |x, o| o[0] = x[0]);
        let phi = excess_phi(&x1, &region, &zero_g).unwrap();
        assert!((phi - 1.0 / 3f64.sqrt()).abs() < 1e-10, "{phi}");
        let zero = FieldFunction::zeros(ms.clone(), 1);
        let two = samples(&ms, 1, |_| 2.0);
        assert!((excess_phi(&zero, &region, &two).unwrap() - 2.0).abs() < 1e-14);
        let empty = select_region(&ms, RegionSelector::cylinder([3.0, 3.0], 0.1));
        assert!(matches!(excess_phi(&zero, &empty, &two), Err(Error::Domain(_))));
    }

    #[test]
    fn h_of_t_values() {
        let ms = mesh(0.5, 1.0 / 32.0);
        let region = select_region(&ms, RegionSelector::cylinder([0.0, 0.0], 0.25));
        assert_eq!(h_of_t(&PiecewiseLinearSolution::zero(1), &region), 0.0);
        // M_+ = (0, 2), M_- = 0
        let ell = PiecewiseLinearSolution::new(
            nalgebra::DMatrix::zeros(1, 2),
            DVector::from_element(1, 2.0),
            DVector::zeros(1),
        )
        .unwrap();
        assert!((h_of_t(&ell, &region) - 2f64.sqrt()).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let p: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ell = PiecewiseLinearSolution::from_params(1, &p).unwrap();
            let norm = |ph| ell.slope(ph).iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
            let s = norm(Phase::Plus) + norm(Phase::Minus);
            let r = h_of_t(&ell, &region) / s;
            assert!((0.5..=1.0).contains(&r), "{r}");
        }
    }

    fn flat_solution(h: f64) -> (FieldFunction, Vec<f64>, Tensor4, Tensor4) {
        let ms = mesh(0.4, h);
        let a_plus = Tensor4::isotropic(1, 3.0);
        let a_minus = Tensor4::isotropic(1, 1.0);
        let data = ProblemData::new(1)
            .with_interface(scalar_fn(|x| 2.0 + x[0] + 0.5 * (3.0 * x[0]).sin()))
            .with_boundary(scalar_fn(|x| 0.5 * x[0] + x[1] + 0.3 * x[0] * x[0]));
        let tensor = PiecewiseTensor::unscaled(
            CoefficientTensor::constant(a_plus.clone(), 3.0),
            CoefficientTensor::constant(a_minus.clone(), 3.0),
        )
        .unwrap();
        let u = crate::fem::solve_problem(&ms, &tensor, &data, &CgOptions::default()).unwrap().field;
        let g = data.interface_samples(&ms).unwrap();
        (u, g, a_plus, a_minus)
    }

    #[test]
    fn decay_of_a_smooth_transmission_solution() {
        let (u, g, ap, am) = flat_solution(0.8 / 256.0);
        let rep = decay_sweep(
            &u,
            &g,
            &ap,
            &am,
            [0.0, 0.0],
            &DecayOptions {
                levels: 3,
                ..DecayOptions::default()
            },
        )
        .unwrap();
        assert!(!rep.truncated);
        assert!(rep.slope.unwrap() >= 0.9, "{rep:?}");
        for r in &rep.rows {
            assert!(r.h_excess <= r.phi + 1e-14);
        }
        let audit = iteration_hypothesis_audit(&rep);
        assert_eq!(audit.rows.len(), 15);
        assert!(audit.max_constant(AuditCheck::HOscillation) <= 10.0, "{audit:?}");
        assert!(audit.rows.iter().all(|r| r.constant.is_finite()));
    }

    #[test]
    fn floor_truncates_sweep() {
        let (u, g, ap, am) = flat_solution(0.8 / 64.0);
        let rep = decay_sweep(&u, &g, &ap, &am, [0.0, 0.0], &DecayOptions::default()).unwrap();
        assert!(rep.truncated);
        assert_eq!(rep.rows.len(), 2);
        assert!(matches!(
            decay_sweep(&u, &g, &ap, &am, [0.0, 0.0], &DecayOptions { theta: 0.7, ..DecayOptions::default() }),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn member_of_the_class_has_zero_excess_at_all_radii() {
        let ms = mesh(0.4, 0.8 / 128.0);
        let ap = Tensor4::isotropic(1, 3.0);
        let am = Tensor4::isotropic(1, 1.0);
        let ell = PiecewiseLinearSolution::from_params(1, &[0.3, -0.2, 0.5, 0.1]).unwrap();
        let u = FieldFunction::interpolate(ms.clone(), 1, |x, o| o[0] = ell.eval(x)[0]);
        let tau = transmission_data(&ell, &ap, &am)[0];
        let g = samples(&ms, 1, |_| tau);
        let rep = decay_sweep(&u, &g, &ap, &am, [0.0, 0.0], &DecayOptions { levels: 3, ..DecayOptions::default() }).unwrap();
        assert!(rep.rows.iter().all(|r| r.h_excess < 1e-8), "{rep:?}");
    }

    #[test]
    fn invariances() {
        let (u, g, ap, am) = flat_solution(0.8 / 128.0);
        let region = select_region(u.mesh(), RegionSelector::cylinder([0.0, 0.0], 0.2));
        let h0 = excess_h(&u, &region, &g, &ap, &am).unwrap().value;
        let p0 = excess_phi(&u, &region, &g).unwrap();
        let shifted = FieldFunction::interpolate(u.mesh().clone(), 1, |x, o| o[0] = u.eval(x).unwrap()[0] + 7.5);
        assert!((excess_h(&shifted, &region, &g, &ap, &am).unwrap().value - h0).abs() < 1e-9);
        assert!((excess_phi(&shifted, &region, &g).unwrap() - p0).abs() < 1e-9);
        let ell = PiecewiseLinearSolution::from_params(1, &[0.4, 0.2, -0.6, 0.3]).unwrap();
        let tau = transmission_data(&ell, &ap, &am)[0];
        let moved = FieldFunction::interpolate(u.mesh().clone(), 1, |x, o| o[0] = u.eval(x).unwrap()[0] + ell.eval(x)[0]);
        let g2: Vec<f64> = g.iter().map(|v| v + tau).collect();
        let h2 = excess_h(&moved, &region, &g2, &ap, &am).unwrap().value;
        assert!((h2 - h0).abs() < 1e-6 * h0.max(1.0), "{h0} {h2}");
    }

    #[test]
    fn audit_handles_degenerate_fields() {
        let ms = mesh(0.4, 0.8 / 256.0);
        let ap = Tensor4::isotropic(1, 2.0);
        let am = Tensor4::isotropic(1, 1.0);
        let zero_g = samples(&ms, 1, |_| 0.0);
        let c = FieldFunction::interpolate(ms.clone(), 1, |_, o| o[0] = 1.0);
        let rep = decay_sweep(&c, &zero_g, &ap, &am, [0.0, 0.0], &DecayOptions { levels: 3, ..DecayOptions::default() }).unwrap();
        let audit = iteration_hypothesis_audit(&rep);
        assert!(audit.rows.iter().all(|r| r.constant == 0.0));
        let adv = FieldFunction::interpolate(ms.clone(), 1, |x, o| o[0] = x[1].signum() * (x[0] * x[0] + x[1] * x[1]).sqrt());
        let rep = decay_sweep(&adv, &zero_g, &ap, &am, [0.0, 0.0], &DecayOptions { levels: 3, ..DecayOptions::default() }).unwrap();
        let audit = iteration_hypothesis_audit(&rep);
        assert_eq!(audit.rows.len(), 15);
    }

    #[test]
    fn linear_field_has_flat_gradient_profile() {
        let ms = mesh(1.0, 1.0 / 64.0);
        let u = FieldFunction::interpolate(ms.clone(), 1, |x, o| o[0] = 2.0 * x[0] - x[1]);
        let radii = geometric_radii(0.5, 0.5, 0.05);
        let prof = lipschitz_profile(&u, &[], 0.5, &[[0.0, 0.0], [0.25, 0.0]], &radii, 0.05).unwrap();
        assert!((prof.variation - 1.0).abs() < 1e-10);
        assert!(prof.rows.iter().all(|r| (r.average_gradient - 5f64.sqrt()).abs() < 1e-10));
    }

    fn stability_setup(factor: f64) -> StabilitySetup {
        StabilitySetup {
            a_plus: Tensor4::isotropic(1, 3.0),
            a_minus: Tensor4::isotropic(1, 1.0),
            g: scalar_fn(|x| 2.0 + x[0].abs().sqrt()),
            alpha: 0.5,
            amplitude_factor: factor,
            frequency: 1.0,
            cells: 64,
            solver: CgOptions::default(),
        }
    }

    #[test]
    fn stability_flat_and_constant_is_exact() {
        let mut s = stability_setup(0.0);
        s.g = scalar_fn(|_| 2.0);
        let row = interface_stability_experiment(&s, 0.25).unwrap();
        assert!(row.normalized_difference < 1e-10, "{row:?}");
    }

    #[test]
    fn stability_difference_grows_with_amplitude() {
        let a = interface_stability_experiment(&stability_setup(0.05), 0.25).unwrap();
        let b = interface_stability_experiment(&stability_setup(0.1), 0.25).unwrap();
        assert!(b.normalized_difference > a.normalized_difference);
    }
}
