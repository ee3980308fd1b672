//! Equation-of-motion solvers.
//!
//! * Variational shooting of the interior discrete equations
//!   `x_{n+1} = 2x_n - x_{n-1} - (Δt²/m) U'(x_n)`.
//! * RK4 integration of the open doublet `ẍ± = -ω₀²x± - νẋ∓`, whose mean
//!   mode is damped and whose difference mode grows as `e^{+νt/2}`.
//! * Tree-graph iteration `x⁽ⁱ⁺¹⁾ = D^r ∗ (g (x⁽ⁱ⁾)³ - j)` with the harmonic
//!   retarded kernel `D^r(τ) = -sin(ω₀τ)Θ(τ)/(mω₀)` and trapezoid quadrature.
//! * A stand-alone RK4 oracle for `ẍ = a(t, x, ẋ)`.

use nalgebra::DMatrix;

use crate::action::{AncillaModel, OpenQuadraticModel, QuarticModel};
use crate::error::{invalid, require_finite, CtpError, Result};
use crate::green::TimeDomainBlocks;
use crate::grid::{CtpTrajectory, TimeGrid, Trajectory};
use crate::linalg::numeric_rank;

/// Position and velocity at `t_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialData {
    pub x0: f64,
    pub v0: f64,
}

impl InitialData {
    pub fn new(x0: f64, v0: f64) -> Result<Self> {
        require_finite("x0", x0)?;
        require_finite("v0", v0)?;
        Ok(Self { x0, v0 })
    }
}

const BLOWUP: f64 = 1e150;

/// Shoot the discrete variational equations with the potential at `x_n`.
///
/// The start `x_1 = x_0 + v_0 Δt - (Δt²/2m) U'(x_0)` is second-order accurate.
pub fn shoot_variational(model: &QuarticModel, init: InitialData, grid: &TimeGrid) -> Result<Trajectory> {
    shoot_variational_placed(model, init, grid, 0.0)
}

/// Shooting for the action with the potential at `x_n^η = (1-η)x_n + ηx_{n-1}`.
///
/// For `η > 0` each step is implicit in `x_{n+1}` and solved by Newton.
pub fn shoot_variational_placed(
    model: &QuarticModel,
    init: InitialData,
    grid: &TimeGrid,
    eta: f64,
) -> Result<Trajectory> {
    if !(0.0..=1.0).contains(&eta) {
        return invalid(format!("potential placement must lie in [0, 1], got {eta}"));
    }
    model.check_grid(grid)?;
    let dt = grid.dt();
    let m = model.mass;
    let len = grid.len();
    let mut x = vec![0.0; len];
    x[0] = init.x0;
    x[1] = init.x0 + init.v0 * dt - 0.5 * dt * dt / m * model.force_gradient(init.x0, 0);
    let k = m / dt;
    for n in 1..len - 1 {
        // ∂S/∂x_n = k(2x_n - x_{n+1} - x_{n-1}) - Δt[(1-η)U'(x_n^η) + ηU'(x_{n+1}^η)] = 0
        let (xm, xc) = (x[n - 1], x[n]);
        let back = model.force_gradient((1.0 - eta) * xc + eta * xm, n);
        let explicit = 2.0 * xc - xm - dt / k * (1.0 - eta) * back;
        let next = if eta == 0.0 {
            explicit
        } else {
            let mut y = explicit;
            for _ in 0..60 {
                let arg = (1.0 - eta) * y + eta * xc;
                let f = y - explicit + dt / k * eta * model.force_gradient(arg, n + 1);
                let df = 1.0 + dt / k * eta * (1.0 - eta) * model.curvature(arg);
                let step = f / df;
                y -= step;
                if step.abs() <= 1e-15 * (1.0 + y.abs()) {
                    break;
                }
            }
            y
        };
        if !next.is_finite() || next.abs() > BLOWUP {
            return Err(CtpError::Divergence { index: n + 1 });
        }
        x[n + 1] = next;
    }
    Trajectory::new(*grid, x)
}

/// Classical RK4 for a first-order system `ẏ = f(t, y)`, returning the state
/// at every node.
pub fn rk4_system(
    rhs: impl Fn(f64, &[f64], &mut [f64]),
    y0: &[f64],
    grid: &TimeGrid,
) -> Result<Vec<Vec<f64>>> {
    let d = y0.len();
    let h = grid.dt();
    let mut states = Vec::with_capacity(grid.len());
    states.push(y0.to_vec());
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    for n in 0..grid.last() {
        let t = grid.node(n);
        let y = &states[n];
        rhs(t, y, &mut k1);
        for i in 0..d {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..d {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..d {
            tmp[i] = y[i] + h * k3[i];
        }
        rhs(t + h, &tmp, &mut k4);
        let next: Vec<f64> = (0..d)
            .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(CtpError::NonFinite { step: n + 1 });
        }
        states.push(next);
    }
    Ok(states)
}

/// Positions and velocities from [`rk4_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct Rk4Solution {
    pub trajectory: Trajectory,
    pub velocity: Vec<f64>,
}

/// RK4 for `ẍ = a(t, x, ẋ)`.
pub fn rk4_solve(
    accel: impl Fn(f64, f64, f64) -> f64,
    init: InitialData,
    grid: &TimeGrid,
) -> Result<Rk4Solution> {
    let states = rk4_system(
        |t, y, dy| {
            dy[0] = y[1];
            dy[1] = accel(t, y[0], y[1]);
        },
        &[init.x0, init.v0],
        grid,
    )?;
    let x = states.iter().map(|s| s[0]).collect();
    let velocity = states.iter().map(|s| s[1]).collect();
    Ok(Rk4Solution {
        trajectory: Trajectory::new(*grid, x)?,
        velocity,
    })
}

/// RK4 oracle returning positions only.
pub fn rk4_oracle(
    accel: impl Fn(f64, f64, f64) -> f64,
    init: InitialData,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    Ok(rk4_solve(accel, init, grid)?.trajectory)
}

/// RK4 integration of `ẍ± = -ω²x± - νẋ∓`. Returns an open pair.
pub fn integrate_open_doublet(
    model: &OpenQuadraticModel,
    init_plus: InitialData,
    init_minus: InitialData,
    grid: &TimeGrid,
) -> Result<CtpTrajectory> {
    let w2 = model.omega * model.omega;
    let nu = model.nu;
    let states = rk4_system(
        |_, y, dy| {
            dy[0] = y[1];
            dy[1] = -w2 * y[0] - nu * y[3];
            dy[2] = y[3];
            dy[3] = -w2 * y[2] - nu * y[1];
        },
        &[init_plus.x0, init_plus.v0, init_minus.x0, init_minus.v0],
        grid,
    )?;
    let plus = states.iter().map(|s| s[0]).collect();
    let minus = states.iter().map(|s| s[2]).collect();
    CtpTrajectory::open(Trajectory::new(*grid, plus)?, Trajectory::new(*grid, minus)?)
}

/// Convolution with the harmonic retarded kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicRetarded {
    pub mass: f64,
    pub omega0: f64,
}

impl HarmonicRetarded {
    /// `D^r(τ)`, with `-τΘ(τ)/m` at `ω₀ = 0`.
    pub fn kernel(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            0.0
        } else if self.omega0 == 0.0 {
            -tau / self.mass
        } else {
            -(self.omega0 * tau).sin() / (self.mass * self.omega0)
        }
    }

    /// `(D^r ∗ f)(t_n) = ∫_{t_i}^{t_n} D^r(t_n - s) f(s) ds` by the trapezoid
    /// rule, evaluated in `O(N)` through the separable form of the kernel.
    pub fn convolve(&self, grid: &TimeGrid, f: &[f64]) -> Vec<f64> {
        let len = f.len();
        let dt = grid.dt();
        let mut out = vec![0.0; len];
        let (mut a, mut b) = (0.0, 0.0);
        let (mut pa, mut pb) = (0.0, 0.0);
        for n in 0..len {
            let s = grid.node(n) - grid.t_i();
            // Kernel basis: D^r(t - s) = -[u(t)v(s) - w(t)z(s)] / norm.
            let (u, v, w, z) = if self.omega0 == 0.0 {
                (s, 1.0, 1.0, s)
            } else {
                let (sn, cs) = (self.omega0 * s).sin_cos();
                (sn, cs, cs, sn)
            };
            let (ca, cb) = (v * f[n], z * f[n]);
            if n > 0 {
                a += 0.5 * dt * (pa + ca);
                b += 0.5 * dt * (pb + cb);
            }
            pa = ca;
            pb = cb;
            let norm = if self.omega0 == 0.0 {
                self.mass
            } else {
                self.mass * self.omega0
            };
            out[n] = -(u * a - w * b) / norm;
        }
        out
    }

    /// Direct `O(N²)` trapezoid sum, used to cross-check [`Self::convolve`].
    pub fn convolve_direct(&self, grid: &TimeGrid, f: &[f64]) -> Vec<f64> {
        let dt = grid.dt();
        (0..f.len())
            .map(|n| {
                let t = grid.node(n);
                (0..=n)
                    .map(|k| {
                        let w = if k == 0 || k == n { 0.5 * dt } else { dt };
                        w * self.kernel(t - grid.node(k)) * f[k]
                    })
                    .sum()
            })
            .collect()
    }
}

/// Iterates of the tree-graph expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    pub order: usize,
    /// `x⁽⁰⁾, …, x⁽ᵏ⁾`; `x⁽ⁱ⁾` contains all trees with at most `i` vertices.
    pub iterates: Vec<Trajectory>,
    /// `max_n |x⁽ⁱ⁾ - D^r ∗ (g(x⁽ⁱ⁾)³ - j)|` for every iterate.
    pub residuals: Vec<f64>,
    /// Index of the first node where the source is nonzero.
    pub source_onset: Option<usize>,
}

impl PerturbationReport {
    pub fn solution(&self) -> &Trajectory {
        self.iterates.last().expect("at least one iterate")
    }

    /// True when every iterate vanishes identically before the source onset.
    pub fn is_causal(&self) -> bool {
        let onset = self.source_onset.unwrap_or(usize::MAX);
        self.iterates
            .iter()
            .all(|x| x.values().iter().take(onset).all(|v| *v == 0.0))
    }
}

/// Tree-graph solution through order `k` for a particle at rest before the
/// source acts. The source is taken from `model`.
pub fn tree_graph_solve(model: &QuarticModel, order: usize, grid: &TimeGrid) -> Result<PerturbationReport> {
    if order < 1 {
        return invalid("tree-graph order must be at least 1");
    }
    model.check_grid(grid)?;
    let kernel = HarmonicRetarded {
        mass: model.mass,
        omega0: model.omega0,
    };
    let j: Vec<f64> = (0..grid.len()).map(|n| model.source_at(n)).collect();
    let source_onset = j.iter().position(|v| *v != 0.0);
    let step = |x: &[f64]| -> Vec<f64> {
        let f: Vec<f64> = x
            .iter()
            .zip(&j)
            .map(|(xv, jv)| model.coupling * xv.powi(3) - jv)
            .collect();
        kernel.convolve(grid, &f)
    };

    let mut current = step(&vec![0.0; grid.len()]);
    let mut iterates = Vec::with_capacity(order + 1);
    let mut residuals = Vec::with_capacity(order + 1);
    for i in 0..=order {
        let next = step(&current);
        let r = current
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if !r.is_finite() {
            return Err(CtpError::NonContraction {
                iterate: i,
                residual: r,
            });
        }
        residuals.push(r);
        let k = residuals.len();
        if k >= 3 && residuals[k - 1] > residuals[k - 2] && residuals[k - 2] > residuals[k - 3] {
            return Err(CtpError::NonContraction {
                iterate: i,
                residual: r,
            });
        }
        iterates.push(Trajectory::new(*grid, current)?);
        current = next;
    }
    let report = PerturbationReport {
        order,
        iterates,
        residuals,
        source_onset,
    };
    debug_assert!(report.is_causal());
    Ok(report)
}

/// Which Green function assembles the response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assembly {
    Retarded,
    Advanced,
}

impl Assembly {
    /// Environment time arrow `τ_e`.
    pub fn arrow(self) -> i32 {
        match self {
            Assembly::Retarded => 1,
            Assembly::Advanced => -1,
        }
    }
}

/// Impulse response split at the impulse time.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalityReport {
    pub response: Trajectory,
    pub pre_max: f64,
    pub post_max: f64,
}

/// Response `x(t) = -j₀ D(t - t₀)` to the impulse `j(t) = j₀ δ(t - t₀)`.
pub fn causality_probe(
    assembly: Assembly,
    blocks: &dyn TimeDomainBlocks,
    grid: &TimeGrid,
    t0: f64,
    amplitude: f64,
) -> Result<CausalityReport> {
    if !(t0 > grid.t_i() && t0 < grid.t_f()) {
        return invalid(format!(
            "impulse time {t0} must lie strictly inside [{}, {}]",
            grid.t_i(),
            grid.t_f()
        ));
    }
    let response = Trajectory::from_fn(*grid, |t| {
        let tau = t - t0;
        -amplitude
            * match assembly {
                Assembly::Retarded => blocks.retarded(tau),
                Assembly::Advanced => blocks.advanced(tau),
            }
    });
    let (mut pre_max, mut post_max) = (0.0f64, 0.0f64);
    for (t, x) in grid.nodes().iter().zip(response.values()) {
        if *t < t0 {
            pre_max = pre_max.max(x.abs());
        } else if *t > t0 {
            post_max = post_max.max(x.abs());
        }
    }
    Ok(CausalityReport {
        response,
        pre_max,
        post_max,
    })
}

/// Counting of the closed-time-path variational equations.
#[derive(Debug, Clone, PartialEq)]
pub struct EquationCountReport {
    /// Interior equations on both legs, `2N`.
    pub equations: usize,
    /// Free coordinates `x±,2..N` and the common end point, `2N - 1`.
    pub unknowns: usize,
    /// Rank of the linearized system.
    pub rank: usize,
    /// Rank with the residual vector appended.
    pub augmented_rank: usize,
    /// Largest equation residual at the solution.
    pub max_residual: f64,
}

/// Linearize the doubled variational equations about the shooting solution.
pub fn equation_count_audit(model: &QuarticModel, init: InitialData, grid: &TimeGrid) -> Result<EquationCountReport> {
    let n = grid.interior();
    if n < 2 {
        return invalid("equation count needs at least two interior nodes");
    }
    let x = shoot_variational(model, init, grid)?;
    let xv = x.values();
    let dt = grid.dt();
    let c = dt * dt / model.mass;
    let rows = 2 * n;
    let cols = 2 * n - 1;
    // Column of node k on a leg: x±,2..N occupy (k-2) + leg offset; x_{N+1} is shared.
    let col = |leg: usize, k: usize| -> Option<usize> {
        if k == n + 1 {
            Some(cols - 1)
        } else if k >= 2 {
            Some(leg * (n - 1) + k - 2)
        } else {
            None
        }
    };
    let mut jac = DMatrix::<f64>::zeros(rows, cols);
    let mut resid = nalgebra::DVector::<f64>::zeros(rows);
    for leg in 0..2 {
        let sign = if leg == 0 { 1.0 } else { -1.0 };
        for k in 1..=n {
            let r = leg * n + k - 1;
            for (node, coef) in [
                (k - 1, -1.0),
                (k, 2.0 - c * model.curvature(xv[k])),
                (k + 1, -1.0),
            ] {
                if let Some(j) = col(leg, node) {
                    jac[(r, j)] += sign * coef;
                }
            }
            resid[r] = sign
                * (2.0 * xv[k] - xv[k + 1] - xv[k - 1] - c * model.force_gradient(xv[k], k));
        }
    }
    let rank = numeric_rank(&jac, 1e-10);
    let mut aug = jac.clone().insert_column(cols, 0.0);
    aug.set_column(cols, &resid);
    let augmented_rank = numeric_rank(&aug, 1e-10);
    let max_residual = resid.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(EquationCountReport {
        equations: rows,
        unknowns: cols,
        rank,
        augmented_rank,
        max_residual,
    })
}

/// Stationary doubled trajectory of the ancilla action for given initial data.
///
/// Variation in `x` gives a homogeneous backward recursion for `x_d` closed by
/// `x_d(t_f) = 0`; variation in `x_d` gives `F_n[x] = -(1/Δt) ∂S'/∂x_d,n`,
/// solved forward for `x_{n+1}`.
pub fn ancilla_stationary(model: &AncillaModel, init: InitialData, grid: &TimeGrid) -> Result<CtpTrajectory> {
    let len = grid.len();
    let n_int = grid.interior();
    let dt = grid.dt();
    let residual = model.residual();

    let drive: Vec<f64> = if model.has_odd_part() {
        let zero = vec![0.0; len];
        let h = 1e-6;
        (0..len)
            .map(|n| {
                let mut p = zero.clone();
                let mut m = zero.clone();
                p[n] = h;
                m[n] = -h;
                Ok((model.odd_part(&p)? - model.odd_part(&m)?) / (2.0 * h))
            })
            .collect::<Result<_>>()?
    } else {
        vec![0.0; len]
    };

    let mut x = vec![0.0; len];
    x[0] = init.x0;
    let a0 = residual.start_acceleration(init.x0, init.v0);
    x[1] = init.x0 + init.v0 * dt + 0.5 * a0 * dt * dt;
    for n in 1..=n_int {
        let target = -drive[n] / dt;
        let mut y = 2.0 * x[n] - x[n - 1];
        for iter in 0..60 {
            let h = 1e-6 * (1.0 + y.abs());
            x[n + 1] = y;
            let f = residual.residual(grid, &x, n) - target;
            x[n + 1] = y + h;
            let fp = residual.residual(grid, &x, n);
            x[n + 1] = y - h;
            let fm = residual.residual(grid, &x, n);
            let d = (fp - fm) / (2.0 * h);
            if d == 0.0 || !d.is_finite() {
                return Err(CtpError::SingularMatrix(format!(
                    "residual at node {n} does not depend on the next node"
                )));
            }
            let step = f / d;
            y -= step;
            if step.abs() <= 1e-14 * (1.0 + y.abs()) || iter == 59 {
                break;
            }
        }
        if !y.is_finite() || y.abs() > BLOWUP {
            return Err(CtpError::Divergence { index: n + 1 });
        }
        x[n + 1] = y;
    }

    // Σ_n x_d,n ∂F_n/∂x_k = 0 for k = N+1 down to 2, with x_d,N+1 = 0.
    let mut xd = vec![0.0; len];
    let partial = |n: usize, k: usize, x: &mut Vec<f64>| -> f64 {
        let h = 1e-6 * (1.0 + x[k].abs());
        let keep = x[k];
        x[k] = keep + h;
        let fp = residual.residual(grid, x, n);
        x[k] = keep - h;
        let fm = residual.residual(grid, x, n);
        x[k] = keep;
        (fp - fm) / (2.0 * h)
    };
    let mut work = x.clone();
    for k in (2..=n_int + 1).rev() {
        let mut acc = 0.0;
        for (n, &d) in xd.iter().enumerate().take((k + 1).min(n_int) + 1).skip(k) {
            acc += d * partial(n, k, &mut work);
        }
        let lead = partial(k - 1, k, &mut work);
        if lead == 0.0 {
            return Err(CtpError::SingularMatrix(format!(
                "residual at node {} does not reach node {k}",
                k - 1
            )));
        }
        xd[k - 1] = -acc / lead;
    }

    let plus: Vec<f64> = x.iter().zip(&xd).map(|(a, d)| a + 0.5 * d).collect();
    let minus: Vec<f64> = x.iter().zip(&xd).map(|(a, d)| a - 0.5 * d).collect();
    CtpTrajectory::closed(Trajectory::new(*grid, plus)?, Trajectory::new(*grid, minus)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{stp_gradient, DampedResidual};
    use crate::green::HarmonicBlocks;

    #[test]
    fn free_particle_is_exactly_linear() {
        let g = TimeGrid::new(0.0, 1.0, 99).unwrap();
        let model = QuarticModel::new(1.0, 0.0, 0.0).unwrap();
        let x = shoot_variational(&model, InitialData::new(0.0, 1.0).unwrap(), &g).unwrap();
        for (n, v) in x.values().iter().enumerate() {
            assert!((v - n as f64 * g.dt()).abs() < 1e-13);
        }
    }

    #[test]
    fn shooting_zeroes_interior_gradient() {
        let g = TimeGrid::new(0.0, 3.0, 299).unwrap();
        let model = QuarticModel::new(1.3, 1.1, 0.7).unwrap();
        let x = shoot_variational(&model, InitialData::new(0.4, -0.2).unwrap(), &g).unwrap();
        let grad = stp_gradient(&model, &x).unwrap();
        let scale = model.mass / g.dt();
        for v in &grad[1..grad.len() - 1] {
            assert!(v.abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn harmonic_shooting_converges_at_second_order() {
        let model = QuarticModel::harmonic(1.0, 1.0).unwrap();
        let t_f = 20.0 * std::f64::consts::PI;
        let errs: Vec<f64> = [4000usize, 8000]
            .iter()
            .map(|&steps| {
                let g = TimeGrid::new(0.0, t_f, steps - 1).unwrap();
                let x = shoot_variational(&model, InitialData::new(1.0, 0.5).unwrap(), &g).unwrap();
                let exact = Trajectory::from_fn(g, |t| t.cos() + 0.5 * t.sin());
                x.max_abs_diff(&exact).unwrap()
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }

    #[test]
    fn placement_changes_solution_at_second_order_only() {
        let model = QuarticModel::new(1.0, 1.0, 0.5).unwrap();
        let init = InitialData::new(0.8, 0.0).unwrap();
        let gaps: Vec<f64> = [1000usize, 2000]
            .iter()
            .map(|&steps| {
                let g = TimeGrid::new(0.0, 10.0, steps - 1).unwrap();
                let a = shoot_variational_placed(&model, init, &g, 0.0).unwrap();
                let b = shoot_variational_placed(&model, init, &g, 0.5).unwrap();
                a.max_abs_diff(&b).unwrap()
            })
            .collect();
        let order = (gaps[0] / gaps[1]).log2();
        assert!((order - 2.0).abs() < 0.2, "order {order}");
    }

    #[test]
    fn unstable_potential_diverges() {
        let model = QuarticModel::new(1.0, 0.0, -5.0).unwrap();
        let g = TimeGrid::new(0.0, 50.0, 4999).unwrap();
        let r = shoot_variational(&model, InitialData::new(2.0, 1.0).unwrap(), &g);
        assert!(matches!(r, Err(CtpError::Divergence { .. })));
    }

    #[test]
    fn rk4_free_particle_is_exact() {
        let g = TimeGrid::new(0.0, 2.0, 199).unwrap();
        let x = rk4_oracle(|_, _, _| 0.0, InitialData::new(1.0, -3.0).unwrap(), &g).unwrap();
        for (t, v) in g.nodes().iter().zip(x.values()) {
            assert!((v - (1.0 - 3.0 * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn rk4_reports_non_finite_step() {
        let g = TimeGrid::new(0.0, 1.0, 9).unwrap();
        let r = rk4_oracle(|t, _, _| if t > 0.45 { f64::NAN } else { 0.0 }, InitialData::new(0.0, 0.0).unwrap(), &g);
        assert!(matches!(r, Err(CtpError::NonFinite { step: 5 })));
    }

    #[test]
    fn rk4_fourth_order_self_convergence() {
        let init = InitialData::new(1.0, 0.0).unwrap();
        let run = |steps: usize| {
            let g = TimeGrid::new(0.0, 10.0, steps - 1).unwrap();
            rk4_oracle(|_, x, v| -x - 0.1 * v - 0.3 * x.powi(3), init, &g)
                .unwrap()
                .values()
                .last()
                .copied()
                .unwrap()
        };
        let (a, b, c) = (run(200), run(400), run(800));
        let ratio = (a - b) / (b - c);
        assert!((ratio - 16.0).abs() < 3.2, "ratio {ratio}");
    }

    #[test]
    fn rk4_harmonic_energy_drift() {
        let g = TimeGrid::new(0.0, 20.0 * std::f64::consts::PI, 62831).unwrap();
        let sol = rk4_solve(|_, x, _| -x, InitialData::new(1.0, 0.0).unwrap(), &g).unwrap();
        let e: Vec<f64> = sol
            .trajectory
            .values()
            .iter()
            .zip(&sol.velocity)
            .map(|(x, v)| 0.5 * (x * x + v * v))
            .collect();
        let drift = e.iter().map(|v| (v - e[0]).abs()).fold(0.0, f64::max) / e[0];
        assert!(drift < 1e-8, "drift {drift}");
    }

    #[test]
    fn doublet_without_friction_decouples() {
        let g = TimeGrid::new(0.0, 10.0, 9999).unwrap();
        let model = OpenQuadraticModel::damped(1.0, 1.3, 0.0).unwrap();
        let pair = integrate_open_doublet(
            &model,
            InitialData::new(1.0, 0.0).unwrap(),
            InitialData::new(0.0, 2.0).unwrap(),
            &g,
        )
        .unwrap();
        let w = 1.3;
        for (n, t) in g.nodes().iter().enumerate() {
            assert!((pair.plus().at(n) - (w * t).cos()).abs() < 1e-10);
            assert!((pair.minus().at(n) - 2.0 / w * (w * t).sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn doublet_modes_damp_and_grow() {
        let g = TimeGrid::new(0.0, 40.0, 39999).unwrap();
        let (w, nu) = (1.0, 0.2);
        let model = OpenQuadraticModel::damped(1.0, w, nu).unwrap();
        let pair = integrate_open_doublet(
            &model,
            InitialData::new(1.0, 0.0).unwrap(),
            InitialData::new(-1.0, 0.0).unwrap(),
            &g,
        )
        .unwrap();
        // Mean starts at rest; difference mode u = x_d solves ü = -ω²u + νu̇.
        let wd = (w * w - nu * nu / 4.0).sqrt();
        for (n, t) in g.nodes().iter().enumerate().step_by(997) {
            let xd = pair.plus().at(n) - pair.minus().at(n);
            let exact = 2.0 * (0.5 * nu * t).exp() * ((wd * t).cos() - 0.5 * nu / wd * (wd * t).sin());
            assert!((xd - exact).abs() < 1e-8 * exact.abs().max(1.0));
            assert!((pair.plus().at(n) + pair.minus().at(n)).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_convolution_matches_direct_sum() {
        let g = TimeGrid::new(-1.0, 4.0, 300).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|t| (2.0 * t).sin() * (-t * t).exp()).collect();
        for omega0 in [0.0, 1.7] {
            let k = HarmonicRetarded { mass: 1.3, omega0 };
            let a = k.convolve(&g, &f);
            let b = k.convolve_direct(&g, &f);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_tree_graph_is_one_convolution() {
        let g = TimeGrid::new(0.0, 10.0, 9999).unwrap();
        let j: Vec<f64> = g.nodes().iter().map(|t| (-(t - 3.0).powi(2)).exp()).collect();
        let model = QuarticModel::harmonic(1.0, 1.0).unwrap().with_source(j.clone());
        let rep = tree_graph_solve(&model, 2, &g).unwrap();
        assert!(rep.residuals.iter().all(|r| *r < 1e-14));
        let k = HarmonicRetarded { mass: 1.0, omega0: 1.0 };
        let neg: Vec<f64> = j.iter().map(|v| -v).collect();
        assert_eq!(rep.iterates[0].values(), k.convolve(&g, &neg).as_slice());
        // Matches the driven oscillator started at rest.
        let rk = rk4_oracle(
            |t, x, _| -x + (-(t - 3.0f64).powi(2)).exp(),
            InitialData::new(0.0, 0.0).unwrap(),
            &g,
        )
        .unwrap();
        assert!(rep.solution().max_abs_diff(&rk).unwrap() < 1e-6);
    }

    #[test]
    fn impulse_response_is_causal() {
        let g = TimeGrid::new(0.0, 10.0, 999).unwrap();
        let mut j = vec![0.0; g.len()];
        j[400] = 1.0 / g.dt();
        let model = QuarticModel::new(1.0, 1.0, 0.1).unwrap().with_source(j);
        let rep = tree_graph_solve(&model, 3, &g).unwrap();
        assert_eq!(rep.source_onset, Some(400));
        assert!(rep.is_causal());
        assert!(rep.solution().values()[401..].iter().any(|v| v.abs() > 0.1));
    }

    #[test]
    fn strong_coupling_stops_contracting() {
        let g = TimeGrid::new(0.0, 20.0, 1999).unwrap();
        let j: Vec<f64> = g.nodes().iter().map(|t| 5.0 * (-(t - 2.0f64).powi(2)).exp()).collect();
        let model = QuarticModel::new(1.0, 1.0, 10.0).unwrap().with_source(j);
        assert!(matches!(
            tree_graph_solve(&model, 12, &g),
            Err(CtpError::NonContraction { .. })
        ));
    }

    #[test]
    fn probe_retarded_and_advanced_mirror() {
        let g = TimeGrid::new(-5.0, 5.0, 999).unwrap();
        let h = HarmonicBlocks::new(1.0, 1.0).unwrap();
        let r = causality_probe(Assembly::Retarded, &h, &g, 0.0, 1.0).unwrap();
        let a = causality_probe(Assembly::Advanced, &h, &g, 0.0, 1.0).unwrap();
        assert_eq!(r.pre_max, 0.0);
        assert_eq!(a.post_max, 0.0);
        let (rv, av) = (r.response.values(), a.response.values());
        for n in 0..g.len() {
            assert!((rv[n] - av[g.len() - 1 - n]).abs() < 1e-12);
        }
        assert!(causality_probe(Assembly::Retarded, &h, &g, 5.0, 1.0).is_err());
    }

    #[test]
    fn equation_count_is_two_n_minus_one() {
        let model = QuarticModel::new(1.0, 1.0, 0.3).unwrap();
        for n in 2..=8 {
            let g = TimeGrid::new(0.0, 1.0, n).unwrap();
            let rep = equation_count_audit(&model, InitialData::new(0.5, 0.2).unwrap(), &g).unwrap();
            assert_eq!(rep.equations, 2 * n);
            assert_eq!(rep.unknowns, 2 * n - 1);
            assert_eq!(rep.rank, 2 * n - 1);
            assert_eq!(rep.augmented_rank, 2 * n - 1);
            assert!(rep.max_residual < 1e-14);
        }
    }

    #[test]
    fn ancilla_stationary_solves_residual() {
        let g = TimeGrid::new(0.0, 5.0, 499).unwrap();
        let res = DampedResidual { mass: 1.0, omega: 1.0, nu: 0.1 };
        let model = AncillaModel::new(res);
        let pair = ancilla_stationary(&model, InitialData::new(1.0, 0.0).unwrap(), &g).unwrap();
        assert!(pair.difference().iter().all(|v| *v == 0.0));
        let x = pair.average();
        for n in 1..=g.interior() {
            assert!(res.residual_check(&g, &x, n) < 1e-9);
        }
    }

    impl DampedResidual {
        fn residual_check(&self, g: &TimeGrid, x: &[f64], n: usize) -> f64 {
            use crate::action::ResidualFunctional;
            self.residual(g, x, n).abs()
        }
    }

    #[test]
    fn ancilla_odd_part_acts_as_source() {
        // S' = c Σ x_d,n Δt shifts the residual to F_n = -c.
        let g = TimeGrid::new(0.0, 2.0, 199).unwrap();
        let dt = g.dt();
        let c = 0.3;
        let model = AncillaModel::new(DampedResidual { mass: 1.0, omega: 1.0, nu: 0.0 })
            .with_odd_part(move |xd| c * dt * xd.iter().sum::<f64>());
        let pair = ancilla_stationary(&model, InitialData::new(0.0, 0.0).unwrap(), &g).unwrap();
        let x = pair.average();
        use crate::action::ResidualFunctional;
        let r = DampedResidual { mass: 1.0, omega: 1.0, nu: 0.0 };
        for n in 1..=g.interior() {
            assert!((r.residual(&g, &x, n) + c).abs() < 1e-7);
        }
    }
}
