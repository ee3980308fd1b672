//! Scenario runners. Each writes its CSV tables into an output directory and
//! returns a short list of summary metrics, also written as `summary.csv`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use ctp_core::action::HarmonicHamiltonian;
use ctp_core::green::{harmonic_ctp_matrix, project_pair, CtpGreenFunction, HarmonicBlocks, Leg};
use ctp_core::noether::{balance_report, DampedLagrangian};
use ctp_core::open::{
    bath_memory_kernel, effective_equation_solve, full_bipartite_solve, write_comparison_csv, BathMode, BathSpec,
    TimeArrow,
};
use ctp_core::report::{fmt_f64, write_columns};
use ctp_core::solver::{
    ancilla_stationary, causality_probe, integrate_open_doublet, rk4_solve, tree_graph_solve, Assembly, InitialData,
};
use ctp_core::{
    hamiltonian_action, shoot_hamiltonian, AncillaModel, DampedResidual, Hamiltonian, OpenQuadraticModel,
    QuarticModel, TimeGrid, Trajectory,
};
use num_complex::Complex64;

use crate::config::{AssemblyKind, ScenarioConfig};
use crate::error::RunError;

/// Available scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    Green,
    Damped,
    Bath,
    Perturb,
    Noether,
    Causality,
    Ancilla,
    Hamiltonian,
}

/// Named scalar results of one run.
pub type Summary = Vec<(&'static str, f64)>;

/// Largest number of interior nodes written per axis by the green scenario.
const GREEN_CSV_NODES: usize = 256;

pub fn run(scenario: Scenario, cfg: &ScenarioConfig, out: &Path) -> Result<Summary, RunError> {
    fs::create_dir_all(out)?;
    let summary = match scenario {
        Scenario::Green => green(cfg, out)?,
        Scenario::Damped => damped(cfg, out)?,
        Scenario::Bath => bath(cfg, out)?,
        Scenario::Perturb => perturb(cfg, out)?,
        Scenario::Noether => noether(cfg, out)?,
        Scenario::Causality => causality(cfg, out)?,
        Scenario::Ancilla => ancilla(cfg, out)?,
        Scenario::Hamiltonian => hamiltonian(cfg, out)?,
    };
    let mut w = create(out, "summary.csv")?;
    writeln!(w, "quantity,value")?;
    for (name, value) in &summary {
        writeln!(w, "{name},{}", fmt_f64(*value))?;
    }
    w.flush()?;
    Ok(summary)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, RunError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn grid(cfg: &ScenarioConfig) -> Result<TimeGrid, RunError> {
    if cfg.n < 2 {
        return Err(RunError::Input(format!("`n` must be at least 2, got {}", cfg.n)));
    }
    Ok(TimeGrid::new(cfg.t_i, cfg.t_f, cfg.n - 1)?)
}

fn init(cfg: &ScenarioConfig) -> Result<InitialData, RunError> {
    Ok(InitialData::new(cfg.x0, cfg.v0)?)
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Green function on `[-T, 0]`, `T = t_f - t_i`, with `n` steps. Only the
/// written nodes are evaluated, two banded columns each.
fn green(cfg: &ScenarioConfig, out: &Path) -> Result<Summary, RunError> {
    let horizon = cfg.t_f - cfg.t_i;
    let g = CtpGreenFunction::harmonic(cfg.m, cfg.omega0, horizon, cfg.n, cfg.eps)?;
    let grid = *g.grid();
    let n_int = grid.interior();
    let stride = n_int.div_ceil(GREEN_CSV_NODES).max(1);
    let nodes: Vec<usize> = (1..=n_int).step_by(stride).collect();
    let table = g.block_table(&nodes)?;

    let scale = 2.0 * cfg.m * cfg.omega0;
    let (mut worst, mut pattern) = (0.0f64, 0.0f64);
    let mut blocks = create(out, "green_blocks.csv")?;
    let mut analytic = create(out, "green_analytic.csv")?;
    writeln!(blocks, "t,tprime,Dn,Df,Di")?;
    writeln!(analytic, "t,tprime,sigma,sigmaprime,re,im,re_exact,im_exact")?;
    for (i, &n) in nodes.iter().enumerate() {
        for (j, &np) in nodes.iter().enumerate() {
            let (t, tp) = (grid.node(n), grid.node(np));
            let z = &table[i][j];
            let ([dn, df, di], residual) = project_pair(z);
            pattern = pattern.max(residual);
            writeln!(blocks, "{},{},{},{},{}", fmt_f64(t), fmt_f64(tp), fmt_f64(dn), fmt_f64(df), fmt_f64(di))?;
            let exact = harmonic_ctp_matrix(cfg.m, cfg.omega0, t - tp);
            for (a, leg) in Leg::BOTH.into_iter().enumerate() {
                for (c, legp) in Leg::BOTH.into_iter().enumerate() {
                    let (v, e) = (z[a][c], exact[a][c]);
                    worst = worst.max((v - e).norm() * scale);
                    writeln!(
                        analytic,
                        "{},{},{},{},{},{},{},{}",
                        fmt_f64(t),
                        fmt_f64(tp),
                        leg.sign() as i32,
                        legp.sign() as i32,
                        fmt_f64(v.re),
                        fmt_f64(v.im),
                        fmt_f64(e.re),
                        fmt_f64(e.im)
                    )?;
                }
            }
        }
    }
    blocks.flush()?;
    analytic.flush()?;
    Ok(vec![
        ("max_relative_error", worst),
        ("block_pattern_residual", pattern),
        ("endpoint_scalar_im", g.endpoint_scalar().im),
    ])
}

/// Underdamped, critical or overdamped closed form of `ẍ + νẋ + ω²x = 0`.
fn damped_exact(omega: f64, nu: f64, x0: f64, v0: f64, t: f64) -> f64 {
    let disc = Complex64::new(nu * nu - 4.0 * omega * omega, 0.0).sqrt();
    if disc.norm() <= 1e-12 * (nu.abs() + omega.abs()) {
        return (x0 + (v0 + 0.5 * nu * x0) * t) * (-0.5 * nu * t).exp();
    }
    let rp = 0.5 * (-nu + disc);
    let rm = 0.5 * (-nu - disc);
    let a = (v0 - rm * x0) / (rp - rm);
    let b = Complex64::new(x0, 0.0) - a;
    (a * (rp * t).exp() + b * (rm * t).exp()).re
}

fn damped(cfg: &ScenarioConfig, out: &Path) -> Result<Summary, RunError> {
    let grid = grid(cfg)?;
    let model = OpenQuadraticModel::new(cfg.m, cfg.omega0, cfg.nu, cfg.d0, cfg.d2)?;
    let start = init(cfg)?;
    let pair = integrate_open_doublet(&model, start, start, &grid)?;
    let t = grid.nodes();
    let exact: Vec<f64> = t.iter().map(|t| damped_exact(cfg.omega0, cfg.nu, cfg.x0, cfg.v0, *t)).collect();
    write_columns(
        create(out, "damped.csv")?,
        &["t", "x_plus", "x_minus", "x_exact"],
        &[&t, pair.plus().values(), pair.minus().values(), &exact],
    )?;
    let report = balance_report(&DampedLagrangian::new(cfg.m, cfg.omega0, cfg.nu)?, pair.plus())?;
    report.write_csv(create(out, "balance.csv")?)?;
    let err = max_abs(pair.plus().values().iter().zip(&exact).map(|(a, b)| a - b));
    Ok(vec![
        ("max_abs_error", err),
        ("energy_residual_norm", report.energy.norm),
        ("initial_energy", report.energy.values[0]),
    ])
}

fn bath_spec(cfg: &ScenarioConfig) -> Result<BathSpec, RunError> {
    let modes = cfg
        .bath
        .iter()
        .map(|[m, w, g]| BathMode::new(*m, *w, *g))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BathSpec::new(modes, TimeArrow::from_sign(cfg.tau_e)?))
}

fn bath(cfg: &ScenarioConfig, out: &Path) -> Result<Summary, RunError> {
    let grid = grid(cfg)?;
    let spec = bath_spec(cfg)?;
    let system = QuarticModel::new(cfg.m, cfg.omega0, cfg.g)?;
    bath_memory_kernel(&spec, &grid).write_csv(create(out, "kernel.csv")?)?;
    let start = init(cfg)?;
    let eff = effective_equation_solve(&system, &spec, start, &grid)?;
    let full = full_bipartite_solve(&system, &spec, start, &grid)?;
    write_comparison_csv(create(out, "comparison.csv")?, &full.system, &eff)?;
    write_columns(create(out, "energy.csv")?, &["t", "E"], &[&grid.nodes(), &full.energy])?;
    let e0 = full.energy[0];
    let drift = max_abs(full.energy.iter().map(|e| e - e0)) / e0.abs().max(f64::MIN_POSITIVE);
    Ok(vec![
        ("max_abs_difference", full.system.max_abs_diff(&eff)?),
        ("relative_energy_drift", drift),
    ])
}

fn perturb(cfg: &ScenarioConfig, out: &Path) -> Result<Summary, RunError> {
    let grid = grid(cfg)?;
    let (centre, j0) = (cfg.centre(), cfg.j0);
    let source = move |t: f64| j0 * (-(t - centre).powi(2) / (2.0 * 0.25)).exp();
    let j: Vec<f64> = grid.nodes().iter().map(|t| source(*t)).collect();
    let model = QuarticModel::new(cfg.m, cfg.omega0, cfg.g)?.with_source(j);
    let report = tree_graph_solve(&model, cfg.order, &grid)?;
    let (m, w2, g) = (cfg.m, cfg.omega0 * cfg.omega0, cfg.g);
    let reference = rk4_solve(
        |t, x, _v| -w2 * x + (-g * x.powi(3) + source(t)) / m,
        InitialData::new(0.0, 0.0)?,
        &grid,
    )?
    .trajectory;
    let t = grid.nodes();
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((0..report.iterates.len()).map(|k| format!("x_{k}")));
    header.push("x_rk4".into());
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut columns: Vec<&[f64]> = vec![&t];
    columns.extend(report.iterates.iter().map(Trajectory::values));
    columns.push(reference.values());
    write_columns(create(out, "perturb.csv")?, &header_ref, &columns)?;
    let mut w = create(out, "residuals.csv")?;
    writeln!(w, "iterate,residual")?;
    for (k, r) in report.residuals.iter().enumerate() {
        writeln!(w, "{k},{}", fmt_f64(*r))?;
    }
    w.flush()?;
    Ok(vec![
        ("max_abs_error", report.solution().max_abs_diff(&reference)?),
        ("last_residual", *report.residuals.last().unwrap_or(&0.0)),
    ])
}

fn noether(cfg: &ScenarioConfig, out: &Path) -> Result<Summary, RunError> {
    let grid = grid(cfg)?;
    let dl = DampedLagrangian::new(cfg.m, cfg.omega0, cfg.nu)?;
    let (w2, nu) = (cfg.omega0 * cfg.omega0, cfg.nu);
    let sol = rk4_solve(|_t, x, v| -w2 * x - nu * v, init(cfg)?, &grid)?;
    let report = balance_report(&dl, &sol.trajectory)?;
    report.write_csv(create(out, "balance.csv")?)?;
    Ok(vec![
        ("momentum_residual_norm", report.momentum.norm),
        ("energy_residual_norm", report.energy.norm),
        ("initial_energy", report.energy.values[0]),
    ])
}

fn causality(cfg: &ScenarioConfig, out: &Path) -> Result<Summary, RunError> {
    let grid = grid(cfg)?;
    let blocks = HarmonicBlocks::new(cfg.m, cfg.omega0)?;
    let assembly = match cfg.assembly {
        AssemblyKind::Retarded => Assembly::Retarded,
        AssemblyKind::Advanced => Assembly::Advanced,
    };
    let report = causality_probe(assembly, &blocks, &grid, cfg.centre(), cfg.j0)?;
    write_columns(create(out, "response.csv")?, &["t", "x"], &[&grid.nodes(), report.response.values()])?;
    Ok(vec![
        ("pre_impulse_max", report.pre_max),
        ("post_impulse_max", report.post_max),
        ("arrow", assembly.arrow() as f64),
    ])
}

fn ancilla(cfg: &ScenarioConfig, out: &Path) -> Result<Summary, RunError> {
    let grid = grid(cfg)?;
    let model = AncillaModel::new(DampedResidual {
        mass: cfg.m,
        omega: cfg.omega0,
        nu: cfg.nu,
    });
    let start = init(cfg)?;
    let pair = ancilla_stationary(&model, start, &grid)?;
    let (w2, nu) = (cfg.omega0 * cfg.omega0, cfg.nu);
    let reference = rk4_solve(|_t, x, v| -w2 * x - nu * v, start, &grid)?.trajectory;
    write_columns(
        create(out, "ancilla.csv")?,
        &["t", "x_plus", "x_minus", "x_rk4"],
        &[&grid.nodes(), pair.plus().values(), pair.minus().values(), reference.values()],
    )?;
    let avg = pair.average();
    Ok(vec![
        ("max_abs_error", max_abs(avg.iter().zip(reference.values()).map(|(a, b)| a - b))),
        ("max_abs_difference_leg", max_abs(pair.difference())),
    ])
}

fn hamiltonian(cfg: &ScenarioConfig, out: &Path) -> Result<Summary, RunError> {
    let grid = grid(cfg)?;
    let h = HarmonicHamiltonian {
        mass: cfg.m,
        omega: cfg.omega0,
    };
    let init = init(cfg)?;
    let phase = shoot_hamiltonian(&h, init.x0, cfg.m * init.v0, &grid)?;
    write_columns(create(out, "positions.csv")?, &["t", "x"], &[&grid.nodes(), phase.x()])?;
    let mid: Vec<f64> = (1..grid.len()).map(|n| grid.node(n) - 0.5 * grid.dt()).collect();
    write_columns(create(out, "momenta.csv")?, &["t_mid", "p"], &[&mid, phase.p()])?;
    let energy: Vec<f64> = (1..grid.len()).map(|n| h.energy(phase.p_at(n), phase.x()[n])).collect();
    let e0 = energy[0];
    Ok(vec![
        ("action", hamiltonian_action(&h, &phase)),
        ("relative_energy_spread", max_abs(energy.iter().map(|e| e - e0)) / e0.abs().max(f64::MIN_POSITIVE)),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn damped_closed_form_regimes() {
        for (w, nu) in [(1.0, 0.3), (1.0, 2.0), (1.0, 3.0)] {
            let (x0, v0) = (0.7, -0.4);
            assert!((damped_exact(w, nu, x0, v0, 0.0) - x0).abs() < 1e-14);
            let h = 1e-5;
            let d = |t: f64| (damped_exact(w, nu, x0, v0, t + h) - damped_exact(w, nu, x0, v0, t - h)) / (2.0 * h);
            assert!((d(0.0) - v0).abs() < 1e-8, "{w} {nu}");
            for t in [0.5, 1.3, 4.0] {
                let x = damped_exact(w, nu, x0, v0, t);
                let acc = (damped_exact(w, nu, x0, v0, t + h) - 2.0 * x + damped_exact(w, nu, x0, v0, t - h)) / (h * h);
                assert!((acc + nu * d(t) + w * w * x).abs() < 1e-4, "{w} {nu} {t}");
            }
        }
    }
}
