//! Subcommand drivers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;
use twophase::cell::{laminate_means, CellSolution};
use twophase::excess::{
    decay_sweep, geometric_radii, iteration_hypothesis_audit, interface_stability_experiment, lipschitz_profile, DecayOptions, ExcessReport,
    LipschitzProfile, StabilityRow, StabilitySetup,
};
use twophase::fem::{constant_fn, solve_problem, FieldFunction, ProblemData};
use twophase::mesh::build_interface_fitted_mesh;
use twophase::nalgebra::DVector;
use twophase::piecewise_linear::lift_from_g0;
use twophase::solver::{
    cell_pair, cell_solution, one_sided_level, solve_homogenized_two_sided, solve_oscillating, two_sided_level,
    ExperimentConfig, RateOptions, RateReport, RateRow, Solved,
};
use twophase::tensor::{CoefficientTensor, PiecewiseTensor, Tensor4};
use twophase::twoscale::{default_layer_widths, run_expansion, ExpansionReport};

use crate::config::{Config, FieldKind, Regime};
use crate::manifest::Recorder;
use crate::{CliError, Command, SolveTarget};

/// Loads the config named on the command line, or the defaults.
pub fn load_config(path: Option<&Path>) -> Result<(Config, PathBuf), CliError> {
    match path {
        None => Ok((Config::default(), PathBuf::from("."))),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            Ok((Config::parse(&text)?, base))
        }
    }
}

/// Runs one subcommand and returns the text printed on success.
pub fn execute(cmd: &Command) -> Result<String, CliError> {
    let common = cmd.common();
    let (cfg, base) = load_config(common.config.as_deref())?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out").join(cmd.name()));
    let ctx = Context {
        cfg,
        base,
        out,
        resume: common.resume,
        check: common.check,
    };
    match cmd {
        Command::Cell(_) => ctx.cell(),
        Command::Solve { target, .. } => ctx.solve(*target),
        Command::Rate(_) => ctx.rate(),
        Command::Expansion(_) => ctx.expansion(),
        Command::Excess(_) => ctx.excess(),
        Command::Lipschitz(_) => ctx.lipschitz(),
        Command::Stability(_) => ctx.stability(),
        Command::Oracle(_) => ctx.oracle(),
    }
}

struct Context {
    cfg: Config,
    base: PathBuf,
    out: PathBuf,
    resume: bool,
    check: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct SolveSummary {
    target: String,
    vertices: usize,
    iterations: usize,
    relative_residual: f64,
    l2_norm: f64,
    gradient_norm: f64,
    h1_norm: f64,
    energy_constant: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct OracleResult {
    a11: f64,
    a22: f64,
    harmonic_mean: f64,
    arithmetic_mean: f64,
    relative_error_11: f64,
    relative_error_22: f64,
    flat_interface_max_error: f64,
}

fn finish(summary: String, failures: Vec<String>) -> Result<String, CliError> {
    if failures.is_empty() {
        Ok(summary)
    } else {
        print!("{summary}");
        Err(CliError::Check(failures))
    }
}

/// Appends `body` to `csv`, dropping its header unless `csv` is empty.
fn append_csv(csv: &mut String, body: &str) {
    if csv.is_empty() {
        csv.push_str(body);
    } else {
        csv.push_str(body.split_once('\n').map_or("", |(_, rest)| rest));
    }
}

fn homogenized_pair(exp: &ExperimentConfig) -> Result<(Tensor4, Tensor4), CliError> {
    let (cp, cm) = cell_pair(exp)?;
    Ok((cp.homogenized, cm.homogenized))
}

impl Context {
    fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        self.cfg.experiment(&self.base)
    }

    fn recorder(&self, name: &str, grid: serde_json::Value) -> Result<Recorder, CliError> {
        Recorder::new(&self.out, &self.cfg, name, grid, self.resume)
    }

    fn cell(&self) -> Result<String, CliError> {
        let exp = self.experiment()?;
        let mut rec = self.recorder("cell", json!({"plus": self.cfg.plus, "minus": self.cfg.minus, "h_cell": exp.h_cell}))?;
        let mut summary = String::new();
        for (label, tensor) in [("plus", &exp.plus), ("minus", &exp.minus)] {
            let dir = self.out.join(label);
            let block: Vec<f64> = rec.task(label, || {
                let cell = cell_solution(tensor, exp.h_cell, &exp.solver)?;
                cell.write_dir(&dir)?;
                Ok(cell.homogenized.as_slice().to_vec())
            })?;
            let n = (block.len() as f64).sqrt() as usize;
            let _ = writeln!(summary, "homogenized tensor ({label} phase):");
            for row in block.chunks(n) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:>16.10}")).collect();
                let _ = writeln!(summary, "{}", cells.join(" "));
            }
        }
        rec.write("homogenized.txt", &summary)?;
        Ok(summary)
    }

    fn solve(&self, target: SolveTarget) -> Result<String, CliError> {
        let exp = self.experiment()?;
        let name = match target {
            SolveTarget::Oscillating => "oscillating",
            SolveTarget::Homogenized => "homogenized",
        };
        let mut rec = self.recorder(
            "solve",
            json!({"target": name, "h": exp.h, "eps_plus": exp.eps_plus, "eps_minus": exp.eps_minus}),
        )?;
        let dir = self.out.clone();
        let s: SolveSummary = rec.task(name, || {
            let solved: Solved = match target {
                SolveTarget::Oscillating => {
                    exp.validate_resolution()?;
                    solve_oscillating(&exp)?
                }
                SolveTarget::Homogenized => {
                    let (hp, hm) = homogenized_pair(&exp)?;
                    solve_homogenized_two_sided(&exp, &hp, &hm)?
                }
            };
            let u = solved.field();
            std::fs::write(dir.join("field.txt"), u.to_text())?;
            Ok(SolveSummary {
                target: name.to_string(),
                vertices: u.mesh().vertex_count(),
                iterations: solved.solve.stats.iterations,
                relative_residual: solved.solve.stats.relative_residual,
                l2_norm: u.l2_norm(),
                gradient_norm: u.gradient_norm(),
                h1_norm: u.h1_norm(),
                energy_constant: solved.energy.constant,
            })
        })?;
        rec.write_json("solve.json", &s)?;
        rec.write(
            "norms.csv",
            &format!(
                "quantity,value\nL2,{:.12e}\ngrad_L2,{:.12e}\nH1,{:.12e}\nenergy_constant,{:.12e}\n",
                s.l2_norm, s.gradient_norm, s.h1_norm, s.energy_constant
            ),
        )?;
        Ok(format!(
            "{} solve: {} vertices, {} CG iterations, L2 norm {:.6e}, H1 norm {:.6e}\n",
            s.target, s.vertices, s.iterations, s.l2_norm, s.h1_norm
        ))
    }

    fn rate(&self) -> Result<String, CliError> {
        let exp = self.experiment()?;
        let spec = &self.cfg.rate;
        let mut rec = self.recorder("rate", serde_json::to_value(spec)?)?;
        let opts = RateOptions {
            ratio: spec.ratio,
            resolution: spec.resolution,
            richardson: spec.richardson,
        };
        let report = match spec.regime {
            Regime::TwoSided => {
                let mut cells = None;
                let mut rows = Vec::new();
                for &em in &spec.eps_minus {
                    let row: RateRow = rec.task(&format!("eps_minus={em}"), || {
                        if cells.is_none() {
                            cells = Some(cell_pair(&exp)?);
                        }
                        Ok(two_sided_level(&exp, cells.as_ref().unwrap(), em, &opts)?)
                    })?;
                    rows.push(row);
                }
                RateReport::two_sided(rows)
            }
            Regime::OneSided => {
                let mut hat = None;
                let mut rows = Vec::new();
                for &ep in &spec.eps_plus {
                    let row: RateRow = rec.task(&format!("eps_plus={ep}"), || {
                        if hat.is_none() {
                            hat = Some(cell_solution(&exp.plus, exp.h_cell, &exp.solver)?.homogenized);
                        }
                        Ok(one_sided_level(&exp, hat.as_ref().unwrap(), ep, spec.resolution)?)
                    })?;
                    rows.push(row);
                }
                RateReport::one_sided(rows)
            }
        };
        rec.write("rate.csv", &report.to_csv())?;
        rec.write_json("rate.json", &report)?;
        let mut summary = report.to_csv();
        let _ = writeln!(
            summary,
            "slope {}, strictly decreasing {}",
            report.slope.map_or("n/a".into(), |s| format!("{s:.3}")),
            report.strictly_decreasing
        );
        let mut failures = Vec::new();
        if self.check {
            let min = self.cfg.check.min_rate_slope;
            let all_zero = report.rows.iter().all(|r| r.l2_error == 0.0);
            if !all_zero {
                match report.slope {
                    Some(s) if s >= min && report.strictly_decreasing => {}
                    _ => failures.push(format!("rate slope below {min} or errors not strictly decreasing")),
                }
            }
        }
        finish(summary, failures)
    }

    fn expansion(&self) -> Result<String, CliError> {
        let exp = self.experiment()?;
        let (dp, dm) = default_layer_widths(&exp);
        let tp = self.cfg.expansion.t_plus.unwrap_or(dp);
        let tm = self.cfg.expansion.t_minus.unwrap_or(dm);
        let mut rec = self.recorder("expansion", json!({"t_plus": tp, "t_minus": tm, "h": exp.h}))?;
        let report: ExpansionReport = rec.task("expansion", || Ok(run_expansion(&exp, tp, tm)?.report))?;
        rec.write("expansion.csv", &report.to_csv())?;
        let summary = report.to_csv();
        let mut failures = Vec::new();
        if self.check && !(report.ratio <= self.cfg.check.max_expansion_ratio) {
            failures.push(format!(
                "expansion ratio {:.3} above {}",
                report.ratio, self.cfg.check.max_expansion_ratio
            ));
        }
        finish(summary, failures)
    }

    fn excess(&self) -> Result<String, CliError> {
        let exp = self.experiment()?;
        let spec = &self.cfg.excess;
        let mut rec = self.recorder("excess", serde_json::to_value(spec)?)?;
        let opts = DecayOptions {
            theta: spec.theta,
            r0: spec.r0,
            levels: spec.levels,
            kind: spec.region,
            eps_minus: match spec.field {
                FieldKind::Homogenized => None,
                FieldKind::Oscillating => Some(exp.eps_minus),
            },
        };
        let mut state: Option<(FieldFunction, Vec<f64>, Tensor4, Tensor4)> = None;
        let mut csv = String::new();
        let mut audit = String::new();
        let mut failures = Vec::new();
        let mut summary = String::new();
        for &c in &spec.centers {
            let report: ExcessReport = rec.task(&format!("center=({},{})", c[0], c[1]), || {
                if state.is_none() {
                    let (hp, hm) = homogenized_pair(&exp)?;
                    let solved = match spec.field {
                        FieldKind::Homogenized => solve_homogenized_two_sided(&exp, &hp, &hm)?,
                        FieldKind::Oscillating => {
                            exp.validate_resolution()?;
                            solve_oscillating(&exp)?
                        }
                    };
                    let u = solved.solve.field;
                    let g = exp.data.interface_samples(u.mesh())?;
                    state = Some((u, g, hp, hm));
                }
                let (u, g, hp, hm) = state.as_ref().unwrap();
                Ok(decay_sweep(u, g, hp, hm, c, &opts)?)
            })?;
            append_csv(&mut csv, &report.to_csv());
            if audit.is_empty() {
                audit.push_str("center_x,center_y,r,check,constant\n");
            }
            for row in iteration_hypothesis_audit(&report).rows {
                let _ = writeln!(audit, "{:.12e},{:.12e},{:.12e},{},{:.12e}", c[0], c[1], row.r, row.check.name(), row.constant);
            }
            let _ = writeln!(
                summary,
                "center ({}, {}): {} radii, exponent {}",
                c[0],
                c[1],
                report.rows.len(),
                report.slope.map_or("n/a".into(), |s| format!("{s:.3}"))
            );
            if self.check {
                if let Some(s) = report.slope {
                    if s < self.cfg.check.min_excess_slope {
                        failures.push(format!("excess exponent {s:.3} at ({}, {})", c[0], c[1]));
                    }
                }
            }
        }
        rec.write("excess.csv", &csv)?;
        rec.write("audit.csv", &audit)?;
        finish(summary, failures)
    }

    fn lipschitz(&self) -> Result<String, CliError> {
        let exp = self.experiment()?;
        let spec = &self.cfg.lipschitz;
        let floor = spec.floor.unwrap_or(exp.eps_minus);
        if !(spec.factor > 0.0 && spec.factor < 1.0) {
            return Err(CliError::Config(format!("lipschitz.factor = {} must lie in (0, 1)", spec.factor)));
        }
        let radii = geometric_radii(spec.r_max, spec.factor, floor);
        let mut rec = self.recorder("lipschitz", json!({"centers": spec.centers, "radii": radii, "floor": floor}))?;
        let alpha = self.cfg.data.alpha.unwrap_or(1.0);
        let profile: LipschitzProfile = rec.task("profile", || {
            exp.validate_resolution()?;
            let u = solve_oscillating(&exp)?.solve.field;
            let g = exp.data.interface_samples(u.mesh())?;
            Ok(lipschitz_profile(&u, &g, alpha, &spec.centers, &radii, floor)?)
        })?;
        rec.write("lipschitz.csv", &profile.to_csv())?;
        let summary = format!("{} radii, worst max/min {:.3}\n", radii.len(), profile.variation);
        let mut failures = Vec::new();
        if self.check && profile.variation > self.cfg.check.max_lipschitz_variation {
            failures.push(format!("gradient variation {:.3}", profile.variation));
        }
        finish(summary, failures)
    }

    fn stability(&self) -> Result<String, CliError> {
        let exp = self.experiment()?;
        let spec = &self.cfg.stability;
        let mut rec = self.recorder("stability", serde_json::to_value(spec)?)?;
        let mut setup: Option<StabilitySetup> = None;
        let mut rows = Vec::new();
        for &t in &spec.t {
            let row: StabilityRow = rec.task(&format!("t={t}"), || {
                if setup.is_none() {
                    let (hp, hm) = homogenized_pair(&exp)?;
                    let m = exp.data.m();
                    let g = self.cfg.interface_fn()?.unwrap_or_else(|| constant_fn(vec![0.0; m]));
                    setup = Some(StabilitySetup {
                        a_plus: hp,
                        a_minus: hm,
                        g,
                        alpha: spec.alpha,
                        amplitude_factor: spec.amplitude_factor,
                        frequency: spec.frequency,
                        cells: spec.cells,
                        solver: exp.solver,
                    });
                }
                Ok(interface_stability_experiment(setup.as_ref().unwrap(), t)?)
            })?;
            rows.push(row);
        }
        let mut csv = String::from("t,amplitude,normalized_difference,bound\n");
        for r in &rows {
            let _ = writeln!(csv, "{:.12e},{:.12e},{:.12e},{:.12e}", r.t, r.amplitude, r.normalized_difference, r.bound);
        }
        rec.write("stability.csv", &csv)?;
        let mut failures = Vec::new();
        if self.check {
            for w in rows.windows(2) {
                let red = w[0].normalized_difference / w[1].normalized_difference;
                if !(red >= self.cfg.check.min_stability_reduction) {
                    failures.push(format!("difference reduction {red:.3} from t = {} to {}", w[0].t, w[1].t));
                }
            }
        }
        finish(csv, failures)
    }

    fn oracle(&self) -> Result<String, CliError> {
        let o = self.cfg.oracle;
        let mut rec = self.recorder("oracle", serde_json::to_value(o)?)?;
        let h_cell = self.cfg.mesh.h_cell;
        let opts = self.cfg.solver_options();
        let domain = self.cfg.experiment(&self.base)?.domain;
        let h = self.cfg.mesh.h;
        let res: OracleResult = rec.task("oracle", || {
            let lam = CoefficientTensor::laminate(0, o.fraction, o.low, o.high, o.high.max(1.0 / o.low));
            let cell = CellSolution::compute(&lam, h_cell, &opts)?;
            let (harm, arith) = laminate_means(|y| if y < o.fraction { o.low } else { o.high }, 1 << 16);
            let a11 = cell.homogenized.get(0, 0, 0, 0);
            let a22 = cell.homogenized.get(1, 1, 0, 0);

            let a_plus = Tensor4::isotropic(1, o.a_plus);
            let ell = lift_from_g0(&DVector::from_element(1, o.g0), &a_plus)?;
            let e = ell.clone();
            let data = ProblemData::new(1)
                .with_interface(constant_fn(vec![o.g0]))
                .with_boundary(Arc::new(move |x, out: &mut [f64]| out[0] = e.eval(x)[0]));
            let mesh = Arc::new(build_interface_fitted_mesh(domain, &twophase::mesh::InterfaceGeometry::flat(), h)?);
            let lambda = o.a_plus.max(1.0 / o.a_plus).max(1.0);
            let tensor = PiecewiseTensor::unscaled(
                CoefficientTensor::constant(a_plus, lambda),
                CoefficientTensor::isotropic(1, 1.0, lambda),
            )?;
            let u = solve_problem(&mesh, &tensor, &data, &opts)?.field;
            let err = mesh
                .vertices
                .iter()
                .enumerate()
                .map(|(v, &p)| (u.values()[v] - ell.eval(p)[0]).abs())
                .fold(0.0, f64::max);
            Ok(OracleResult {
                a11,
                a22,
                harmonic_mean: harm,
                arithmetic_mean: arith,
                relative_error_11: (a11 - harm).abs() / harm,
                relative_error_22: (a22 - arith).abs() / arith,
                flat_interface_max_error: err,
            })
        })?;
        rec.write_json("oracle.json", &res)?;
        let summary = format!(
            "a11 = {:.10} (harmonic mean {})\na22 = {:.10} (arithmetic mean {})\nflat interface max nodal error {:.3e}\n",
            res.a11, res.harmonic_mean, res.a22, res.arithmetic_mean, res.flat_interface_max_error
        );
        let mut failures = Vec::new();
        if self.check {
            if res.relative_error_11 > 1e-6 || res.relative_error_22 > 1e-6 {
                failures.push("homogenized laminate entries off by more than 1e-6".into());
            }
            if res.flat_interface_max_error > 1e-8 {
                failures.push(format!("flat interface error {:.3e}", res.flat_interface_max_error));
            }
        }
        finish(summary, failures)
    }
}
