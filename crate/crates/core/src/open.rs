//! Elimination of a harmonic environment.
//!
//! A system coordinate `x` couples bilinearly to bath modes `y_a`,
//! `L_i = Σ_a g_a x y_a`. Solving the bath equations with factorized initial
//! data gives the effective equation
//!
//! ```text
//! m ẍ = -U'(x) + Σ_a g_a y_a^h(t) + ∫ κ(t - t') x(t') dt',
//! κ(τ) = Σ_a g_a² sin(ω_a τ) Θ(τ) / (m_a ω_a) = -Σ_a g_a² D^r_a(τ),
//! ```
//!
//! for a forward environment arrow. A backward arrow mirrors the support,
//! `κ(τ) → κ(-τ)`, and cannot be integrated forward in time.
//!
//! The influence action of the eliminated bath is
//!
//! ```text
//! S_infl = S₁[x₊] - S₁[x₋] + S₂[x₊, x₋],
//! S₁[x]  = -½ Σ_a g_a² ∫∫ x Dⁿ_a x + Σ_a g_a ∫ x y_a^h,
//! S₂     = -τ_e Σ_a g_a² ∫∫ x₊(t) D^f_a(t - t') x₋(t'),
//! ```
//!
//! with `Dⁿ_a(τ) = -sin(ω_a|τ|)/(2m_aω_a)` and `D^f_a(τ) = -sin(ω_aτ)/(2m_aω_a)`.
//! Integrals use trapezoid weights on the grid.

use std::io::Write;

use num_complex::Complex64;

use crate::action::QuarticModel;
use crate::error::{invalid, require_finite, require_positive, CtpError, Result};
use crate::grid::{CtpTrajectory, TimeGrid, Trajectory};
use crate::report::fmt_f64;
use crate::solver::{rk4_system, InitialData};

/// Environment time arrow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeArrow {
    Forward,
    Backward,
}

impl TimeArrow {
    pub fn sign(self) -> f64 {
        match self {
            TimeArrow::Forward => 1.0,
            TimeArrow::Backward => -1.0,
        }
    }

    pub fn from_sign(tau_e: i32) -> Result<Self> {
        match tau_e {
            1 => Ok(TimeArrow::Forward),
            -1 => Ok(TimeArrow::Backward),
            other => invalid(format!("environment arrow must be +1 or -1, got {other}")),
        }
    }
}

/// One harmonic bath mode with its auxiliary data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathMode {
    pub mass: f64,
    pub omega: f64,
    pub coupling: f64,
    pub y0: f64,
    pub v0: f64,
}

impl BathMode {
    /// Mode at rest.
    pub fn new(mass: f64, omega: f64, coupling: f64) -> Result<Self> {
        Self::with_data(mass, omega, coupling, 0.0, 0.0)
    }

    pub fn with_data(mass: f64, omega: f64, coupling: f64, y0: f64, v0: f64) -> Result<Self> {
        require_positive("bath mass", mass)?;
        require_positive("bath frequency", omega)?;
        require_finite("bath coupling", coupling)?;
        require_finite("bath y0", y0)?;
        require_finite("bath v0", v0)?;
        Ok(Self {
            mass,
            omega,
            coupling,
            y0,
            v0,
        })
    }

    /// `g² sin(ωτ)/(mω)` for `τ ≥ 0`.
    fn kappa(&self, tau: f64) -> f64 {
        self.coupling * self.coupling * (self.omega * tau).sin() / (self.mass * self.omega)
    }

    /// Free motion from data at the auxiliary time `t_a`.
    fn homogeneous(&self, t: f64, t_a: f64) -> f64 {
        let s = t - t_a;
        self.y0 * (self.omega * s).cos() + self.v0 / self.omega * (self.omega * s).sin()
    }
}

/// Bath modes with an environment arrow.
#[derive(Debug, Clone, PartialEq)]
pub struct BathSpec {
    pub modes: Vec<BathMode>,
    pub arrow: TimeArrow,
}

impl BathSpec {
    pub fn new(modes: Vec<BathMode>, arrow: TimeArrow) -> Self {
        Self { modes, arrow }
    }

    /// Auxiliary time carrying the bath data: `t_i` forward, `t_f` backward.
    fn data_time(&self, grid: &TimeGrid) -> f64 {
        match self.arrow {
            TimeArrow::Forward => grid.t_i(),
            TimeArrow::Backward => grid.t_f(),
        }
    }

    /// `Σ_a g_a y_a^h(t)`.
    pub fn drive(&self, grid: &TimeGrid, t: f64) -> f64 {
        let ta = self.data_time(grid);
        self.modes
            .iter()
            .map(|m| m.coupling * m.homogeneous(t, ta))
            .sum()
    }

    /// `Σ_a g_a² / (m_a ω_a²)`, the static frequency renormalization.
    pub fn static_shift(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| m.coupling * m.coupling / (m.mass * m.omega * m.omega))
            .sum()
    }
}

/// Memory kernel sampled at lags `kΔt`, `k = 0..=N+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryKernel {
    grid: TimeGrid,
    arrow: TimeArrow,
    lags: Vec<f64>,
}

/// Analytic memory kernel of a harmonic bath.
pub fn bath_memory_kernel(bath: &BathSpec, grid: &TimeGrid) -> MemoryKernel {
    let lags = (0..grid.len())
        .map(|k| {
            let tau = k as f64 * grid.dt();
            bath.modes.iter().map(|m| m.kappa(tau)).sum()
        })
        .collect();
    MemoryKernel {
        grid: *grid,
        arrow: bath.arrow,
        lags,
    }
}

impl MemoryKernel {
    pub fn arrow(&self) -> TimeArrow {
        self.arrow
    }

    /// `κ(t_n, t_n')`; exactly zero outside the support of the arrow.
    pub fn value(&self, n: usize, np: usize) -> f64 {
        match self.arrow {
            TimeArrow::Forward if n >= np => self.lags[n - np],
            TimeArrow::Backward if n <= np => self.lags[np - n],
            _ => 0.0,
        }
    }

    /// `∫_{t_i}^{t_f} κ(t_n, t') x(t') dt'` by the trapezoid rule.
    pub fn force(&self, x: &[f64], n: usize) -> f64 {
        let w = self.grid.trapezoid_weights();
        let range: Box<dyn Iterator<Item = usize>> = match self.arrow {
            TimeArrow::Forward => Box::new(0..=n),
            TimeArrow::Backward => Box::new(n..x.len()),
        };
        range.map(|k| w[k] * self.value(n, k) * x[k]).sum()
    }

    /// Dump as CSV `tau,kappa` over lags `-T..=T`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "tau,kappa")?;
        let last = self.grid.last();
        for k in (1..=last).rev() {
            writeln!(
                out,
                "{},{}",
                fmt_f64(-(k as f64) * self.grid.dt()),
                fmt_f64(self.value(0, k))
            )?;
        }
        for k in 0..=last {
            writeln!(
                out,
                "{},{}",
                fmt_f64(k as f64 * self.grid.dt()),
                fmt_f64(self.value(k, 0))
            )?;
        }
        Ok(())
    }
}

fn check_system(system: &QuarticModel) -> Result<()> {
    if system.coupling != 0.0 {
        return invalid("bath elimination requires a harmonic system (g = 0)");
    }
    Ok(())
}

/// Step the effective equation forward with velocity Verlet and a trapezoid
/// memory history. `κ(0) = 0`, so the history at `t_n` involves only earlier
/// nodes and each step stays explicit.
pub fn effective_equation_solve(
    system: &QuarticModel,
    bath: &BathSpec,
    init: InitialData,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    check_system(system)?;
    system.check_grid(grid)?;
    if bath.arrow == TimeArrow::Backward {
        return Err(CtpError::AcausalMemory);
    }
    let kernel = bath_memory_kernel(bath, grid);
    let dt = grid.dt();
    let m = system.mass;
    let len = grid.len();
    let mut x = vec![0.0; len];
    x[0] = init.x0;
    let accel = |x: &[f64], n: usize| -> f64 {
        (-system.force_gradient(x[n], n) + bath.drive(grid, grid.node(n)) + kernel.force(x, n)) / m
    };
    let mut v = init.v0;
    let mut a = accel(&x, 0);
    for n in 0..len - 1 {
        x[n + 1] = x[n] + v * dt + 0.5 * a * dt * dt;
        let a_next = accel(&x, n + 1);
        v += 0.5 * (a + a_next) * dt;
        a = a_next;
        if !x[n + 1].is_finite() {
            return Err(CtpError::NonFinite { step: n + 1 });
        }
    }
    Trajectory::new(*grid, x)
}

/// Closed bipartite solution.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteSolution {
    pub system: Trajectory,
    pub bath: Vec<Trajectory>,
    /// Total energy of system, bath and interaction at every node.
    pub energy: Vec<f64>,
}

/// RK4 on the `(1 + M)`-oscillator system with bath data at `t_i`.
pub fn full_bipartite_solve(
    system: &QuarticModel,
    bath: &BathSpec,
    init: InitialData,
    grid: &TimeGrid,
) -> Result<BipartiteSolution> {
    check_system(system)?;
    system.check_grid(grid)?;
    if bath.arrow == TimeArrow::Backward {
        return invalid("the bipartite reference dynamics needs bath data at t_i");
    }
    let k_sys = system.mass * system.omega0 * system.omega0;
    if bath.static_shift() >= k_sys && !bath.modes.is_empty() {
        return invalid(format!(
            "coupled potential is unbounded: Σ g²/(m_a ω_a²) = {} ≥ m ω₀² = {k_sys}",
            bath.static_shift()
        ));
    }
    let modes = &bath.modes;
    let dim = 2 * (1 + modes.len());
    let mut y0 = vec![0.0; dim];
    y0[0] = init.x0;
    y0[1] = init.v0;
    for (a, mode) in modes.iter().enumerate() {
        y0[2 + 2 * a] = mode.y0;
        y0[3 + 2 * a] = mode.v0;
    }
    let dt = grid.dt();
    let t_i = grid.t_i();
    let source = |t: f64| -> f64 {
        // Linear interpolation of the node-sampled source.
        match system.source() {
            None => 0.0,
            Some(j) => {
                let s = ((t - t_i) / dt).clamp(0.0, (j.len() - 1) as f64);
                let k = (s.floor() as usize).min(j.len() - 2);
                let f = s - k as f64;
                j[k] * (1.0 - f) + j[k + 1] * f
            }
        }
    };
    let states = rk4_system(
        |t, y, dy| {
            let x = y[0];
            let mut fx = -k_sys * x + source(t);
            for (a, mode) in modes.iter().enumerate() {
                let ya = y[2 + 2 * a];
                fx += mode.coupling * ya;
                dy[2 + 2 * a] = y[3 + 2 * a];
                dy[3 + 2 * a] = (-mode.mass * mode.omega * mode.omega * ya + mode.coupling * x) / mode.mass;
            }
            dy[0] = y[1];
            dy[1] = fx / system.mass;
        },
        &y0,
        grid,
    )?;
    let energy = states
        .iter()
        .map(|s| {
            let mut e = 0.5 * system.mass * s[1] * s[1] + 0.5 * k_sys * s[0] * s[0];
            for (a, mode) in modes.iter().enumerate() {
                let (ya, va) = (s[2 + 2 * a], s[3 + 2 * a]);
                e += 0.5 * mode.mass * (va * va + mode.omega * mode.omega * ya * ya)
                    - mode.coupling * s[0] * ya;
            }
            e
        })
        .collect();
    let sys = Trajectory::new(*grid, states.iter().map(|s| s[0]).collect())?;
    let bath_traj = (0..modes.len())
        .map(|a| Trajectory::new(*grid, states.iter().map(|s| s[2 + 2 * a]).collect()))
        .collect::<Result<_>>()?;
    Ok(BipartiteSolution {
        system: sys,
        bath: bath_traj,
        energy,
    })
}

/// Write `t,x_full,x_eff,diff` for two trajectories on the same grid.
pub fn write_comparison_csv<W: Write>(out: W, full: &Trajectory, effective: &Trajectory) -> Result<()> {
    let n = full.len();
    if effective.len() != n {
        return Err(CtpError::LengthMismatch {
            expected: n,
            found: effective.len(),
        });
    }
    let t = full.grid().nodes();
    let diff: Vec<f64> = (0..n).map(|k| full.at(k) - effective.at(k)).collect();
    crate::report::write_columns(out, &["t", "x_full", "x_eff", "diff"], &[&t, full.values(), effective.values(), &diff])
        .map_err(|e| CtpError::InvalidInput(format!("write failed: {e}")))
}

/// Influence action and its split into single-leg and cross terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfluenceAction {
    pub total: Complex64,
    /// `S₁[x₊]`.
    pub s1_plus: f64,
    /// `S₁[x₋]`.
    pub s1_minus: f64,
    /// Cross-leg part `S₂[x₊, x₋]`.
    pub s2: f64,
}

fn near(mode: &BathMode, tau: f64) -> f64 {
    -(mode.omega * tau.abs()).sin() / (2.0 * mode.mass * mode.omega)
}

fn far(mode: &BathMode, tau: f64) -> f64 {
    -(mode.omega * tau).sin() / (2.0 * mode.mass * mode.omega)
}

/// Evaluate `S_infl[x₊, x₋]` for the eliminated bath.
pub fn influence_action(bath: &BathSpec, ctp: &CtpTrajectory) -> Result<InfluenceAction> {
    let grid = ctp.grid();
    let w = grid.trapezoid_weights();
    let t = grid.nodes();
    let (xp, xm) = (ctp.plus().values(), ctp.minus().values());
    let len = t.len();
    let single = |x: &[f64]| -> f64 {
        let mut s = 0.0;
        for mode in &bath.modes {
            let g2 = mode.coupling * mode.coupling;
            let mut quad = 0.0;
            for i in 0..len {
                let mut row = 0.0;
                for j in 0..len {
                    row += w[j] * near(mode, t[i] - t[j]) * x[j];
                }
                quad += w[i] * x[i] * row;
            }
            s -= 0.5 * g2 * quad;
        }
        s + (0..len).map(|i| w[i] * x[i] * bath.drive(grid, t[i])).sum::<f64>()
    };
    let mut s2 = 0.0;
    for mode in &bath.modes {
        let g2 = mode.coupling * mode.coupling;
        let mut quad = 0.0;
        for i in 0..len {
            let mut row = 0.0;
            for j in 0..len {
                row += w[j] * far(mode, t[i] - t[j]) * xm[j];
            }
            quad += w[i] * xp[i] * row;
        }
        s2 -= bath.arrow.sign() * g2 * quad;
    }
    let s1_plus = single(xp);
    let s1_minus = single(xm);
    Ok(InfluenceAction {
        total: Complex64::new(s1_plus - s1_minus + s2, 0.0),
        s1_plus,
        s1_minus,
        s2,
    })
}
