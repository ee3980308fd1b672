//! Discretized single- and closed-time-path actions.
//!
//! The single-time-path action of a particle in the quartic potential
//! `U(x) = mω₀²x²/2 + g x⁴/4 - j x` is
//!
//! ```text
//! S[x] = Δt Σ_{n=1}^{N+1} [ m/2 ((x_n - x_{n-1})/Δt)² - U(x_n) ].
//! ```
//!
//! Doubling the trajectory gives the CTP action
//!
//! ```text
//! S[x₊, x₋] = S[x₊] - S[x₋] + (iε/2) Δt Σ_{n=1}^{N+1} (x₊,n² + x₋,n²),
//! ```
//!
//! which obeys `S[x₊, x₋] = -S*[x₋, x₊]`. The open quadratic action adds a
//! friction cross term and an imaginary decoherence part,
//!
//! ```text
//! L = m/2 (ẋ₊² - ẋ₋²) - mω²/2 (x₊² - x₋²) + mν/2 (ẋ₊x₋ - ẋ₋x₊)
//!     + i/2 [d₀ (x₊ - x₋)² + d₂ (ẋ₊ - ẋ₋)²].
//! ```
//!
//! Velocities use the backward stencil `(x_n - x_{n-1})/Δt` on both legs
//! and the undifferentiated factor of the cross term is the node average
//! `(x_n + x_{n-1})/2`, which makes the discrete cross term exactly
//! `mν/2 Σ (x₊,n x₋,n-1 - x₊,n-1 x₋,n)`.

use num_complex::Complex64;

use crate::error::{invalid, require_finite, require_positive, CtpError, Result};
use crate::grid::{CtpTrajectory, PhaseTrajectory, TimeGrid, Trajectory};

/// Particle in `U(x) = mω₀²x²/2 + g x⁴/4 - j_n x`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarticModel {
    pub mass: f64,
    pub omega0: f64,
    pub coupling: f64,
    source: Option<Vec<f64>>,
}

impl QuarticModel {
    pub fn new(mass: f64, omega0: f64, coupling: f64) -> Result<Self> {
        require_positive("mass", mass)?;
        require_finite("omega0", omega0)?;
        if omega0 < 0.0 {
            return invalid(format!("omega0 must be non-negative, got {omega0}"));
        }
        require_finite("coupling", coupling)?;
        Ok(Self {
            mass,
            omega0,
            coupling,
            source: None,
        })
    }

    pub fn harmonic(mass: f64, omega0: f64) -> Result<Self> {
        Self::new(mass, omega0, 0.0)
    }

    /// Attach a source sampled on every node of the grid it will be used with.
    pub fn with_source(mut self, source: Vec<f64>) -> Self {
        self.source = Some(source);
        self
    }

    pub fn source(&self) -> Option<&[f64]> {
        self.source.as_deref()
    }

    pub fn source_at(&self, n: usize) -> f64 {
        self.source.as_ref().map_or(0.0, |j| j[n])
    }

    pub(crate) fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        match &self.source {
            Some(j) if j.len() != grid.len() => Err(CtpError::LengthMismatch {
                expected: grid.len(),
                found: j.len(),
            }),
            _ => Ok(()),
        }
    }

    pub fn potential(&self, x: f64, n: usize) -> f64 {
        0.5 * self.mass * self.omega0 * self.omega0 * x * x + 0.25 * self.coupling * x.powi(4)
            - self.source_at(n) * x
    }

    /// `U'(x)` at node `n`.
    pub fn force_gradient(&self, x: f64, n: usize) -> f64 {
        self.mass * self.omega0 * self.omega0 * x + self.coupling * x.powi(3) - self.source_at(n)
    }

    /// `U''(x)`.
    pub fn curvature(&self, x: f64) -> f64 {
        self.mass * self.omega0 * self.omega0 + 3.0 * self.coupling * x * x
    }
}

/// Discrete STP action with the potential evaluated at `x_n`.
pub fn stp_action(model: &QuarticModel, traj: &Trajectory) -> Result<f64> {
    stp_action_placed(model, traj, 0.0)
}

/// STP action with the potential evaluated at `x_n^η = (1-η) x_n + η x_{n-1}`.
pub fn stp_action_placed(model: &QuarticModel, traj: &Trajectory, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    model.check_grid(traj.grid())?;
    let dt = traj.grid().dt();
    let x = traj.values();
    let mut s = 0.0;
    for n in 1..x.len() {
        let v = (x[n] - x[n - 1]) / dt;
        let xe = (1.0 - eta) * x[n] + eta * x[n - 1];
        s += 0.5 * model.mass * v * v - model.potential(xe, n);
    }
    Ok(s * dt)
}

/// Exact partial derivatives `∂S/∂x_n` of [`stp_action`] for `n = 0..=N+1`.
///
/// The interior component is `(m/Δt)(2x_n - x_{n+1} - x_{n-1}) - Δt U'(x_n)`.
pub fn stp_gradient(model: &QuarticModel, traj: &Trajectory) -> Result<Vec<f64>> {
    stp_gradient_placed(model, traj, 0.0)
}

/// Exact gradient of [`stp_action_placed`].
pub fn stp_gradient_placed(model: &QuarticModel, traj: &Trajectory, eta: f64) -> Result<Vec<f64>> {
    check_eta(eta)?;
    model.check_grid(traj.grid())?;
    let dt = traj.grid().dt();
    let k = model.mass / dt;
    let x = traj.values();
    let last = x.len() - 1;
    let mut grad = vec![0.0; x.len()];
    for n in 1..=last {
        let xe = (1.0 - eta) * x[n] + eta * x[n - 1];
        let up = model.force_gradient(xe, n);
        let dv = k * (x[n] - x[n - 1]);
        grad[n] += dv - dt * (1.0 - eta) * up;
        grad[n - 1] += -dv - dt * eta * up;
    }
    Ok(grad)
}

/// Interior variational equations in the normalized form
/// `2x_n - x_{n+1} - x_{n-1} - (Δt²/m) U'(x_n)`, i.e. `(Δt/m) ∂S/∂x_n`.
pub fn variational_residuals(model: &QuarticModel, traj: &Trajectory) -> Result<Vec<f64>> {
    let grad = stp_gradient(model, traj)?;
    let scale = traj.grid().dt() / model.mass;
    Ok(grad[1..grad.len() - 1].iter().map(|g| g * scale).collect())
}

fn check_eta(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        invalid(format!("potential placement must lie in [0, 1], got {eta}"))
    }
}

/// CTP action `S[x₊] - S[x₋] + (iε/2) Δt Σ (x₊² + x₋²)`.
pub fn ctp_action(model: &QuarticModel, ctp: &CtpTrajectory, eps: f64) -> Result<Complex64> {
    if !eps.is_finite() || eps < 0.0 {
        return invalid(format!("epsilon must be non-negative, got {eps}"));
    }
    let re = stp_action(model, ctp.plus())? - stp_action(model, ctp.minus())?;
    let dt = ctp.grid().dt();
    let (xp, xm) = (ctp.plus().values(), ctp.minus().values());
    let sq: f64 = (1..xp.len()).map(|n| xp[n] * xp[n] + xm[n] * xm[n]).sum();
    Ok(Complex64::new(re, 0.5 * eps * dt * sq))
}

/// Parameters of the open quadratic Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpenQuadraticModel {
    pub mass: f64,
    pub omega: f64,
    pub nu: f64,
    pub d0: f64,
    pub d2: f64,
}

impl OpenQuadraticModel {
    pub fn new(mass: f64, omega: f64, nu: f64, d0: f64, d2: f64) -> Result<Self> {
        require_positive("mass", mass)?;
        require_finite("omega", omega)?;
        for (name, v) in [("nu", nu), ("d0", d0), ("d2", d2)] {
            require_finite(name, v)?;
            if v < 0.0 {
                return invalid(format!("{name} must be non-negative, got {v}"));
            }
        }
        Ok(Self {
            mass,
            omega,
            nu,
            d0,
            d2,
        })
    }

    /// Damped oscillator: `d₀ = d₂ = 0`.
    pub fn damped(mass: f64, omega: f64, nu: f64) -> Result<Self> {
        Self::new(mass, omega, nu, 0.0, 0.0)
    }
}

/// Discrete open quadratic action.
pub fn open_lagrangian_action(model: &OpenQuadraticModel, ctp: &CtpTrajectory) -> Result<Complex64> {
    let dt = ctp.grid().dt();
    let (xp, xm) = (ctp.plus().values(), ctp.minus().values());
    let m = model.mass;
    let w2 = model.omega * model.omega;
    let (mut re, mut im) = (0.0, 0.0);
    for n in 1..xp.len() {
        let vp = (xp[n] - xp[n - 1]) / dt;
        let vm = (xm[n] - xm[n - 1]) / dt;
        let ap = 0.5 * (xp[n] + xp[n - 1]);
        let am = 0.5 * (xm[n] + xm[n - 1]);
        re += 0.5 * m * (vp * vp - vm * vm) - 0.5 * m * w2 * (xp[n] * xp[n] - xm[n] * xm[n])
            + 0.5 * m * model.nu * (vp * am - vm * ap);
        let xd = xp[n] - xm[n];
        let vd = vp - vm;
        im += 0.5 * (model.d0 * xd * xd + model.d2 * vd * vd);
    }
    Ok(Complex64::new(re * dt, im * dt))
}

/// Classical Hamiltonian `H(p, x)` with its partial derivatives.
pub trait Hamiltonian {
    fn energy(&self, p: f64, x: f64) -> f64;
    /// `∂H/∂p`.
    fn dp(&self, p: f64, x: f64) -> f64;
    /// `∂H/∂x`.
    fn dx(&self, p: f64, x: f64) -> f64;
}

/// `H = p²/2m`.
#[derive(Debug, Clone, Copy)]
pub struct FreeHamiltonian {
    pub mass: f64,
}

impl Hamiltonian for FreeHamiltonian {
    fn energy(&self, p: f64, _x: f64) -> f64 {
        p * p / (2.0 * self.mass)
    }
    fn dp(&self, p: f64, _x: f64) -> f64 {
        p / self.mass
    }
    fn dx(&self, _p: f64, _x: f64) -> f64 {
        0.0
    }
}

/// `H = c √(m²c² + p²)`.
#[derive(Debug, Clone, Copy)]
pub struct RelativisticHamiltonian {
    pub mass: f64,
    pub c: f64,
}

impl Hamiltonian for RelativisticHamiltonian {
    fn energy(&self, p: f64, _x: f64) -> f64 {
        self.c * (self.mass * self.mass * self.c * self.c + p * p).sqrt()
    }
    fn dp(&self, p: f64, _x: f64) -> f64 {
        self.c * p / (self.mass * self.mass * self.c * self.c + p * p).sqrt()
    }
    fn dx(&self, _p: f64, _x: f64) -> f64 {
        0.0
    }
}

/// `H = p²/2m + mω²x²/2`.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicHamiltonian {
    pub mass: f64,
    pub omega: f64,
}

impl Hamiltonian for HarmonicHamiltonian {
    fn energy(&self, p: f64, x: f64) -> f64 {
        p * p / (2.0 * self.mass) + 0.5 * self.mass * self.omega * self.omega * x * x
    }
    fn dp(&self, p: f64, _x: f64) -> f64 {
        p / self.mass
    }
    fn dx(&self, _p: f64, x: f64) -> f64 {
        self.mass * self.omega * self.omega * x
    }
}

/// `S = Δt Σ_{n=1}^{N+1} [p_n (x_n - x_{n-1})/Δt - H(p_n, x_n)]`.
pub fn hamiltonian_action<H: Hamiltonian + ?Sized>(h: &H, ph: &PhaseTrajectory) -> f64 {
    let dt = ph.grid().dt();
    let x = ph.x();
    (1..x.len())
        .map(|n| {
            let p = ph.p_at(n);
            p * (x[n] - x[n - 1]) - dt * h.energy(p, x[n])
        })
        .sum()
}

/// Partial derivatives of [`hamiltonian_action`].
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonGradient {
    /// `∂S/∂p_n` for `n = 1..=N+1`.
    pub dp: Vec<f64>,
    /// `∂S/∂x_n` for `n = 0..=N+1`.
    pub dx: Vec<f64>,
}

pub fn hamiltonian_gradient<H: Hamiltonian + ?Sized>(h: &H, ph: &PhaseTrajectory) -> HamiltonGradient {
    let dt = ph.grid().dt();
    let x = ph.x();
    let last = x.len() - 1;
    let dp = (1..=last)
        .map(|n| (x[n] - x[n - 1]) - dt * h.dp(ph.p_at(n), x[n]))
        .collect();
    let mut dx = vec![0.0; x.len()];
    dx[0] = -ph.p_at(1);
    for n in 1..=last {
        let p = ph.p_at(n);
        dx[n] = p - dt * h.dx(p, x[n]);
        if n < last {
            dx[n] -= ph.p_at(n + 1);
        }
    }
    HamiltonGradient { dp, dx }
}

/// Forward solution of the discrete Hamilton equations from `x_0` and `p_1`.
///
/// The position update `x_n = x_{n-1} + Δt ∂H/∂p(p_n, x_n)` is implicit when
/// `∂H/∂p` depends on `x` and is solved by fixed-point iteration.
pub fn shoot_hamiltonian<H: Hamiltonian + ?Sized>(
    h: &H,
    x0: f64,
    p1: f64,
    grid: &TimeGrid,
) -> Result<PhaseTrajectory> {
    let dt = grid.dt();
    let len = grid.len();
    let mut x = vec![0.0; len];
    let mut p = vec![0.0; len - 1];
    x[0] = x0;
    p[0] = p1;
    for n in 1..len {
        let pn = p[n - 1];
        let mut xn = x[n - 1] + dt * h.dp(pn, x[n - 1]);
        for _ in 0..100 {
            let next = x[n - 1] + dt * h.dp(pn, xn);
            let done = (next - xn).abs() <= 1e-15 * (1.0 + next.abs());
            xn = next;
            if done {
                break;
            }
        }
        if !xn.is_finite() {
            return Err(CtpError::Divergence { index: n });
        }
        x[n] = xn;
        if n < len - 1 {
            p[n] = pn - dt * h.dx(pn, xn);
        }
    }
    PhaseTrajectory::new(*grid, x, p)
}

/// Quasi-local residual functional `F_n[x]` on interior nodes.
pub trait ResidualFunctional: Send + Sync {
    /// Residual at interior node `n ∈ 1..=N`. Stencils may reach `x_{n±1}`.
    fn residual(&self, grid: &TimeGrid, x: &[f64], n: usize) -> f64;

    /// Acceleration `ẍ(t_i)` implied by `F = 0`, used for a second-order
    /// start `x_1 = x_0 + v_0 Δt + a Δt²/2`.
    fn start_acceleration(&self, _x0: f64, _v0: f64) -> f64 {
        0.0
    }
}

/// `F = m ẍ + m ν ẋ + m ω² x` with central stencils.
#[derive(Debug, Clone, Copy)]
pub struct DampedResidual {
    pub mass: f64,
    pub omega: f64,
    pub nu: f64,
}

impl ResidualFunctional for DampedResidual {
    fn residual(&self, grid: &TimeGrid, x: &[f64], n: usize) -> f64 {
        let dt = grid.dt();
        let acc = (x[n + 1] - 2.0 * x[n] + x[n - 1]) / (dt * dt);
        let vel = (x[n + 1] - x[n - 1]) / (2.0 * dt);
        self.mass * (acc + self.nu * vel + self.omega * self.omega * x[n])
    }

    fn start_acceleration(&self, x0: f64, v0: f64) -> f64 {
        -self.omega * self.omega * x0 - self.nu * v0
    }
}

type OddFunctional = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Generalized ancilla action `S_F = Δt Σ_n x_d,n F_n[x] + S'[x_d]`.
pub struct AncillaModel {
    residual: Box<dyn ResidualFunctional>,
    odd: Option<OddFunctional>,
}

impl std::fmt::Debug for AncillaModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AncillaModel")
            .field("odd_part", &self.odd.is_some())
            .finish()
    }
}

impl AncillaModel {
    /// Ancilla with `S' ≡ 0`.
    pub fn new(residual: impl ResidualFunctional + 'static) -> Self {
        Self {
            residual: Box::new(residual),
            odd: None,
        }
    }

    /// Attach an odd functional `S'[x_d]` of the difference leg.
    pub fn with_odd_part(mut self, odd: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.odd = Some(Box::new(odd));
        self
    }

    pub fn residual(&self) -> &dyn ResidualFunctional {
        self.residual.as_ref()
    }

    pub fn odd_part(&self, xd: &[f64]) -> Result<f64> {
        match &self.odd {
            None => Ok(0.0),
            Some(f) => {
                let zero = f(&vec![0.0; xd.len()]);
                if zero != 0.0 {
                    return invalid(format!("odd functional must vanish at zero, got {zero}"));
                }
                Ok(f(xd))
            }
        }
    }

    pub fn has_odd_part(&self) -> bool {
        self.odd.is_some()
    }
}

/// `S_F` on a doubled trajectory, with `x = (x₊ + x₋)/2` and `x_d = x₊ - x₋`.
pub fn ancilla_action(model: &AncillaModel, ctp: &CtpTrajectory) -> Result<f64> {
    let grid = ctp.grid();
    let x = ctp.average();
    let xd = ctp.difference();
    let dt = grid.dt();
    let bulk: f64 = (1..=grid.interior())
        .map(|n| xd[n] * model.residual.residual(grid, &x, n))
        .sum();
    Ok(dt * bulk + model.odd_part(&xd)?)
}
