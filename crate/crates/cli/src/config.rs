//! TOML experiment configuration.
//!
//! Every section is optional and falls back to its default. Unknown keys are
//! rejected so that typos surface as configuration errors.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use twophase::fem::{ProblemData, VectorFn};
use twophase::mesh::{BoxDomain, InterfaceGeometry, RegionKind};
use twophase::piecewise_linear::lift_from_g0;
use twophase::solver::ExperimentConfig;
use twophase::sparse::{CgOptions, PreconditionerKind};
use twophase::tensor::{CoefficientTensor, GridTensor, Phase, Tensor4};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Seed for every randomised audit.
    pub seed: u64,
    pub domain: DomainSpec,
    pub interface: InterfaceSpec,
    pub plus: TensorSpec,
    pub minus: TensorSpec,
    pub scales: Scales,
    pub mesh: MeshSpec,
    pub data: DataSpec,
    pub solver: SolverSpec,
    pub rate: RateSpec,
    pub expansion: ExpansionSpec,
    pub excess: ExcessSpec,
    pub lipschitz: LipschitzSpec,
    pub stability: StabilitySpec,
    pub oracle: OracleSpec,
    pub check: CheckSpec,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 42,
            domain: DomainSpec::default(),
            interface: InterfaceSpec::default(),
            plus: TensorSpec::default(),
            minus: TensorSpec::default(),
            scales: Scales::default(),
            mesh: MeshSpec::default(),
            data: DataSpec::default(),
            solver: SolverSpec::default(),
            rate: RateSpec::default(),
            expansion: ExpansionSpec::default(),
            excess: ExcessSpec::default(),
            lipschitz: LipschitzSpec::default(),
            stability: StabilitySpec::default(),
            oracle: OracleSpec::default(),
            check: CheckSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSpec {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self {
            min: [-0.5, -0.5],
            max: [0.5, 0.5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceKind {
    Flat,
    Sine,
}

/// `x_2 = amplitude · sin(2π frequency x_1)`, or the line `x_2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterfaceSpec {
    pub kind: InterfaceKind,
    pub amplitude: f64,
    pub frequency: f64,
    pub alpha: f64,
}

impl Default for InterfaceSpec {
    fn default() -> Self {
        Self {
            kind: InterfaceKind::Flat,
            amplitude: 0.0,
            frequency: 1.0,
            alpha: 1.0,
        }
    }
}

/// Coefficient tensor of one phase, on the unit cell where periodic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TensorSpec {
    Isotropic {
        value: f64,
        lambda: f64,
        #[serde(default = "one")]
        m: usize,
    },
    /// Full constant block, `(2m)^2` entries in `(i, α), (j, β)` order.
    Matrix { m: usize, block: Vec<f64>, lambda: f64 },
    /// `low` where `y_axis < fraction`, `high` elsewhere.
    Laminate {
        axis: usize,
        fraction: f64,
        low: f64,
        high: f64,
        lambda: f64,
    },
    Checkerboard { a: f64, b: f64, lambda: f64 },
    /// `mean + amplitude · sin(2π y_1) cos(2π y_2)`.
    Trigonometric { mean: f64, amplitude: f64, lambda: f64 },
    /// Piecewise-constant grid read from a text file.
    Grid { path: String, lambda: f64 },
}

fn one() -> usize {
    1
}

impl Default for TensorSpec {
    fn default() -> Self {
        TensorSpec::Isotropic {
            value: 1.0,
            lambda: 1.0,
            m: 1,
        }
    }
}

impl TensorSpec {
    pub fn build(&self, section: &str, base: &Path) -> Result<CoefficientTensor, CliError> {
        let bad = |msg: String| CliError::Config(format!("{section}: {msg}"));
        Ok(match self {
            TensorSpec::Isotropic { value, lambda, m } => CoefficientTensor::isotropic(*m, *value, *lambda),
            TensorSpec::Matrix { m, block, lambda } => {
                let t = Tensor4::from_block(*m, block.clone()).map_err(|e| bad(e.to_string()))?;
                CoefficientTensor::constant(t, *lambda)
            }
            TensorSpec::Laminate {
                axis,
                fraction,
                low,
                high,
                lambda,
            } => {
                if *axis > 1 {
                    return Err(bad(format!("axis = {axis} must be 0 or 1")));
                }
                CoefficientTensor::laminate(*axis, *fraction, *low, *high, *lambda)
            }
            TensorSpec::Checkerboard { a, b, lambda } => CoefficientTensor::checkerboard(*a, *b, *lambda),
            TensorSpec::Trigonometric { mean, amplitude, lambda } => {
                let (mean, amplitude) = (*mean, *amplitude);
                CoefficientTensor::periodic_scalar([1.0, 1.0], *lambda, move |y| {
                    mean + amplitude * (2.0 * PI * y[0]).sin() * (2.0 * PI * y[1]).cos()
                })
            }
            TensorSpec::Grid { path, lambda } => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full).map_err(|e| bad(format!("cannot read {}: {e}", full.display())))?;
                let grid = GridTensor::parse(&text).map_err(|e| bad(e.to_string()))?;
                CoefficientTensor::grid(grid, [1.0, 1.0], *lambda)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scales {
    pub eps_plus: f64,
    pub eps_minus: f64,
}

impl Default for Scales {
    fn default() -> Self {
        Self {
            eps_plus: 1.0,
            eps_minus: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSpec {
    pub h: f64,
    pub h_cell: f64,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            h: 1.0 / 32.0,
            h_cell: twophase::cell::DEFAULT_H_CELL,
        }
    }
}

/// Scalar function of position, applied to one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant { value: f64 },
    /// `offset + gradient · x`
    Affine { offset: f64, gradient: [f64; 2] },
    /// `offset + coefficient · |x_1 − x0|^alpha`
    Holder {
        offset: f64,
        coefficient: f64,
        alpha: f64,
        #[serde(default)]
        x0: f64,
    },
    /// `offset + amplitude · sin(2π frequency x_1)`
    Sine { offset: f64, amplitude: f64, frequency: f64 },
    /// Boundary only: the piecewise linear solution carrying the interface
    /// data at the origin.
    Lift,
}

impl FunctionSpec {
    fn eval(&self, x: [f64; 2]) -> f64 {
        match *self {
            FunctionSpec::Constant { value } => value,
            FunctionSpec::Affine { offset, gradient } => offset + gradient[0] * x[0] + gradient[1] * x[1],
            FunctionSpec::Holder {
                offset,
                coefficient,
                alpha,
                x0,
            } => offset + coefficient * (x[0] - x0).abs().powf(alpha),
            FunctionSpec::Sine {
                offset,
                amplitude,
                frequency,
            } => offset + amplitude * (2.0 * PI * frequency * x[0]).sin(),
            FunctionSpec::Lift => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSpec {
    pub m: usize,
    /// One entry for all components, or one per component.
    pub g: Vec<FunctionSpec>,
    pub boundary: Vec<FunctionSpec>,
    pub source_plus: Vec<FunctionSpec>,
    pub source_minus: Vec<FunctionSpec>,
    pub alpha: Option<f64>,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self {
            m: 1,
            g: Vec::new(),
            boundary: Vec::new(),
            source_plus: Vec::new(),
            source_minus: Vec::new(),
            alpha: None,
        }
    }
}

fn vector_fn(name: &str, specs: &[FunctionSpec], m: usize) -> Result<Option<VectorFn>, CliError> {
    if specs.is_empty() {
        return Ok(None);
    }
    if specs.len() != 1 && specs.len() != m {
        return Err(CliError::Config(format!(
            "data.{name} has {} entries, expected 1 or m = {m}",
            specs.len()
        )));
    }
    if specs.contains(&FunctionSpec::Lift) {
        return Err(CliError::Config(format!("data.{name}: kind = \"lift\" is only valid for data.boundary")));
    }
    let specs = specs.to_vec();
    Ok(Some(Arc::new(move |x, out: &mut [f64]| {
        for (a, o) in out.iter_mut().enumerate() {
            *o = specs[if specs.len() == 1 { 0 } else { a }].eval(x);
        }
    })))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub tolerance: f64,
    pub max_iterations: Option<usize>,
    pub preconditioner: PreconditionerKind,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = CgOptions::default();
        Self {
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
            preconditioner: d.preconditioner,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    TwoSided,
    OneSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSpec {
    pub regime: Regime,
    /// Swept `ε_-` values (two-sided regime).
    pub eps_minus: Vec<f64>,
    /// Swept `ε_+` values (one-sided regime).
    pub eps_plus: Vec<f64>,
    pub ratio: f64,
    pub resolution: f64,
    pub richardson: bool,
}

impl Default for RateSpec {
    fn default() -> Self {
        Self {
            regime: Regime::TwoSided,
            eps_minus: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0],
            eps_plus: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0],
            ratio: 0.5,
            resolution: 8.0,
            richardson: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionSpec {
    /// Layer widths; `√ε_±` when absent.
    pub t_plus: Option<f64>,
    pub t_minus: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Homogenized,
    Oscillating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcessSpec {
    pub field: FieldKind,
    pub centers: Vec<[f64; 2]>,
    pub theta: f64,
    pub r0: f64,
    pub levels: usize,
    pub region: RegionKind,
}

impl Default for ExcessSpec {
    fn default() -> Self {
        Self {
            field: FieldKind::Homogenized,
            centers: vec![[0.0, 0.0]],
            theta: 0.25,
            r0: 0.4,
            levels: 4,
            region: RegionKind::Cylinder,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LipschitzSpec {
    pub centers: Vec<[f64; 2]>,
    pub r_max: f64,
    /// Ratio between consecutive radii.
    pub factor: f64,
    /// Smallest radius; `ε_-` when absent.
    pub floor: Option<f64>,
}

impl Default for LipschitzSpec {
    fn default() -> Self {
        Self {
            centers: vec![[-0.25, 0.0], [0.0, 0.0], [0.25, 0.0]],
            r_max: 0.45,
            factor: std::f64::consts::FRAC_1_SQRT_2,
            floor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySpec {
    pub t: Vec<f64>,
    pub amplitude_factor: f64,
    pub frequency: f64,
    pub cells: usize,
    pub alpha: f64,
}

impl Default for StabilitySpec {
    fn default() -> Self {
        Self {
            t: vec![0.25, 0.125],
            amplitude_factor: 0.05,
            frequency: 1.0,
            cells: 128,
            alpha: 0.5,
        }
    }
}

/// Two-phase laminate and flat-interface reference values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSpec {
    pub low: f64,
    pub high: f64,
    pub fraction: f64,
    pub g0: f64,
    pub a_plus: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            low: 1.0,
            high: 4.0,
            fraction: 0.5,
            g0: 2.0,
            a_plus: 3.0,
        }
    }
}

/// Thresholds applied with `--check`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSpec {
    pub min_rate_slope: f64,
    pub max_expansion_ratio: f64,
    pub min_excess_slope: f64,
    pub max_lipschitz_variation: f64,
    pub min_stability_reduction: f64,
}

impl Default for CheckSpec {
    fn default() -> Self {
        Self {
            min_rate_slope: 0.4,
            max_expansion_ratio: 2.0 / 3.0,
            min_excess_slope: 0.9,
            max_lipschitz_variation: 3.0,
            min_stability_reduction: 2f64.powf(0.25) * 0.8,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn solver_options(&self) -> CgOptions {
        CgOptions {
            tolerance: self.solver.tolerance,
            max_iterations: self.solver.max_iterations,
            preconditioner: self.solver.preconditioner,
        }
    }

    pub fn geometry(&self) -> InterfaceGeometry {
        match self.interface.kind {
            InterfaceKind::Flat => InterfaceGeometry::flat(),
            InterfaceKind::Sine => InterfaceGeometry::sine(self.interface.amplitude, self.interface.frequency, self.interface.alpha),
        }
    }

    /// Interface data `g` alone, if configured.
    pub fn interface_fn(&self) -> Result<Option<VectorFn>, CliError> {
        vector_fn("g", &self.data.g, self.data.m)
    }

    pub fn problem_data(&self, plus: &CoefficientTensor) -> Result<ProblemData, CliError> {
        let m = self.data.m;
        if m == 0 {
            return Err(CliError::Config("data.m must be at least 1".into()));
        }
        let mut data = ProblemData::new(m);
        let g = vector_fn("g", &self.data.g, m)?;
        if let Some(g) = &g {
            data = data.with_interface(g.clone());
        }
        if self.data.boundary.contains(&FunctionSpec::Lift) {
            if self.data.boundary.len() != 1 {
                return Err(CliError::Config("data.boundary: \"lift\" must be the only entry".into()));
            }
            let mut g0 = vec![0.0; m];
            if let Some(g) = &g {
                g(self_origin(), &mut g0);
            }
            let ell = lift_from_g0(&nalgebra_vector(&g0), &plus.eval([0.0, 0.0])).map_err(|e| CliError::Config(format!("data.boundary: {e}")))?;
            data = data.with_boundary(Arc::new(move |x, out: &mut [f64]| out.copy_from_slice(ell.eval(x).as_slice())));
        } else if let Some(f) = vector_fn("boundary", &self.data.boundary, m)? {
            data = data.with_boundary(f);
        }
        if let Some(f) = vector_fn("source_plus", &self.data.source_plus, m)? {
            data = data.with_source(Phase::Plus, f);
        }
        if let Some(f) = vector_fn("source_minus", &self.data.source_minus, m)? {
            data = data.with_source(Phase::Minus, f);
        }
        if let Some(a) = self.data.alpha {
            data = data.with_alpha(a);
        }
        Ok(data)
    }

    /// The library configuration, with `base` resolving relative paths.
    pub fn experiment(&self, base: &Path) -> Result<ExperimentConfig, CliError> {
        let domain = BoxDomain::new(self.domain.min, self.domain.max).map_err(|e| CliError::Config(format!("domain: {e}")))?;
        let plus = self.plus.build("plus", base)?;
        let minus = self.minus.build("minus", base)?;
        if plus.m() != self.data.m || minus.m() != self.data.m {
            return Err(CliError::Config(format!(
                "data.m = {} but plus has m = {} and minus has m = {}",
                self.data.m,
                plus.m(),
                minus.m()
            )));
        }
        let data = self.problem_data(&plus)?;
        let cfg = ExperimentConfig {
            domain,
            geometry: self.geometry(),
            plus,
            minus,
            eps_plus: self.scales.eps_plus,
            eps_minus: self.scales.eps_minus,
            data,
            h: self.mesh.h,
            h_cell: self.mesh.h_cell,
            solver: self.solver_options(),
        };
        cfg.validate()?;
        if !(self.mesh.h_cell > 0.0 && self.mesh.h_cell <= 0.5) {
            return Err(CliError::Config(format!("mesh.h_cell = {} must lie in (0, 1/2]", self.mesh.h_cell)));
        }
        Ok(cfg)
    }
}

fn self_origin() -> [f64; 2] {
    [0.0, 0.0]
}

fn nalgebra_vector(v: &[f64]) -> twophase::nalgebra::DVector<f64> {
    twophase::nalgebra::DVector::from_column_slice(v)
}
