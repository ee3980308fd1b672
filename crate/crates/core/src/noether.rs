//! Momentum and energy balance for doubled Lagrangians.
//!
//! A doubled Lagrangian `L = L₁(x₊) - L₁(x₋) + L₂(x₊, x₋)` produces, at
//! coincident legs `x₊ = x₋ = x`, the semi-holonomic force
//!
//! ```text
//! F = ∂L₂/∂x₊ - d/dt ∂L₂/∂ẋ₊,
//! ```
//!
//! and the balance equations
//!
//! ```text
//! ṗ_r = ∂L₁/∂x + ∂L₂/∂x₊,            p_r = ∂L₁/∂ẋ + ∂L₂/∂ẋ₊,
//! Ė   = -∂_t L₁ + ẋ F,                E   = ẋ ∂L₁/∂ẋ - L₁.
//! ```
//!
//! Velocities come from fourth-order stencils on the positions. Time
//! derivatives of balanced quantities use the centered stencil in the interior
//! and second-order one-sided stencils at the ends, so residuals converge as
//! `O(Δt²)` at every node. Residuals are reported pointwise and as trapezoid
//! `L¹` norms.

use std::io::Write;
use std::sync::Arc;

use crate::error::{require_finite, require_positive, CtpError, Result};
use crate::grid::Trajectory;
use crate::report::write_columns;

/// Relative equation-of-motion residual above which a trajectory is rejected.
pub const DEFAULT_ON_SHELL_TOLERANCE: f64 = 1e-3;

/// Central difference with one Richardson level, step
/// `h = ε^{1/3} max(|x|, 1)`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = f64::EPSILON.cbrt() * x.abs().max(1.0);
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

/// Partials of `L₂` with respect to `(x₊, ẋ₊, x₋, ẋ₋)`.
pub type L2Partials = [f64; 4];

/// A doubled Lagrangian. Partial derivatives default to finite differences;
/// built-in models override them analytically.
pub trait DoubledLagrangian: Send + Sync {
    fn l1(&self, x: f64, v: f64, t: f64) -> f64;

    /// Cross-leg term; zero for closed dynamics.
    fn l2(&self, xp: f64, vp: f64, xm: f64, vm: f64, t: f64) -> f64 {
        let _ = (xp, vp, xm, vm, t);
        0.0
    }

    fn dl1_dx(&self, x: f64, v: f64, t: f64) -> f64 {
        central_difference(|s| self.l1(s, v, t), x)
    }

    fn dl1_dv(&self, x: f64, v: f64, t: f64) -> f64 {
        central_difference(|s| self.l1(x, s, t), v)
    }

    fn dl1_dt(&self, x: f64, v: f64, t: f64) -> f64 {
        central_difference(|s| self.l1(x, v, s), t)
    }

    fn dl2(&self, xp: f64, vp: f64, xm: f64, vm: f64, t: f64) -> L2Partials {
        [
            central_difference(|s| self.l2(s, vp, xm, vm, t), xp),
            central_difference(|s| self.l2(xp, s, xm, vm, t), vp),
            central_difference(|s| self.l2(xp, vp, s, vm, t), xm),
            central_difference(|s| self.l2(xp, vp, xm, s, t), vm),
        ]
    }
}

/// Free particle, `L₁ = mẋ²/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeParticle {
    pub mass: f64,
}

impl FreeParticle {
    pub fn new(mass: f64) -> Result<Self> {
        require_positive("mass", mass)?;
        Ok(Self { mass })
    }
}

impl DoubledLagrangian for FreeParticle {
    fn l1(&self, _x: f64, v: f64, _t: f64) -> f64 {
        0.5 * self.mass * v * v
    }
    fn dl1_dx(&self, _x: f64, _v: f64, _t: f64) -> f64 {
        0.0
    }
    fn dl1_dv(&self, _x: f64, v: f64, _t: f64) -> f64 {
        self.mass * v
    }
    fn dl1_dt(&self, _x: f64, _v: f64, _t: f64) -> f64 {
        0.0
    }
    fn dl2(&self, _: f64, _: f64, _: f64, _: f64, _: f64) -> L2Partials {
        [0.0; 4]
    }
}

/// Harmonic oscillator, `L₁ = mẋ²/2 - mω²x²/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicLagrangian {
    pub mass: f64,
    pub omega: f64,
}

impl HarmonicLagrangian {
    pub fn new(mass: f64, omega: f64) -> Result<Self> {
        require_positive("mass", mass)?;
        require_finite("omega", omega)?;
        Ok(Self { mass, omega })
    }
}

impl DoubledLagrangian for HarmonicLagrangian {
    fn l1(&self, x: f64, v: f64, _t: f64) -> f64 {
        0.5 * self.mass * (v * v - self.omega * self.omega * x * x)
    }
    fn dl1_dx(&self, x: f64, _v: f64, _t: f64) -> f64 {
        -self.mass * self.omega * self.omega * x
    }
    fn dl1_dv(&self, _x: f64, v: f64, _t: f64) -> f64 {
        self.mass * v
    }
    fn dl1_dt(&self, _x: f64, _v: f64, _t: f64) -> f64 {
        0.0
    }
    fn dl2(&self, _: f64, _: f64, _: f64, _: f64, _: f64) -> L2Partials {
        [0.0; 4]
    }
}

/// `L₂ = (mν/2)(ẋ₊x₋ - x₊ẋ₋)`, the Newton friction channel.
fn friction_l2(mass: f64, nu: f64, xp: f64, vp: f64, xm: f64, vm: f64) -> f64 {
    0.5 * mass * nu * (vp * xm - xp * vm)
}

fn friction_dl2(mass: f64, nu: f64, xp: f64, vp: f64, xm: f64, vm: f64) -> L2Partials {
    let c = 0.5 * mass * nu;
    [-c * vm, c * xm, c * vp, -c * xp]
}

/// Damped oscillator: harmonic `L₁` with the friction `L₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedLagrangian {
    pub mass: f64,
    pub omega: f64,
    pub nu: f64,
}

impl DampedLagrangian {
    pub fn new(mass: f64, omega: f64, nu: f64) -> Result<Self> {
        require_positive("mass", mass)?;
        require_finite("omega", omega)?;
        require_finite("nu", nu)?;
        Ok(Self { mass, omega, nu })
    }
}

impl DoubledLagrangian for DampedLagrangian {
    fn l1(&self, x: f64, v: f64, _t: f64) -> f64 {
        0.5 * self.mass * (v * v - self.omega * self.omega * x * x)
    }
    fn l2(&self, xp: f64, vp: f64, xm: f64, vm: f64, _t: f64) -> f64 {
        friction_l2(self.mass, self.nu, xp, vp, xm, vm)
    }
    fn dl1_dx(&self, x: f64, _v: f64, _t: f64) -> f64 {
        -self.mass * self.omega * self.omega * x
    }
    fn dl1_dv(&self, _x: f64, v: f64, _t: f64) -> f64 {
        self.mass * v
    }
    fn dl1_dt(&self, _x: f64, _v: f64, _t: f64) -> f64 {
        0.0
    }
    fn dl2(&self, xp: f64, vp: f64, xm: f64, vm: f64, _t: f64) -> L2Partials {
        friction_dl2(self.mass, self.nu, xp, vp, xm, vm)
    }
}

/// Free particle with the friction `L₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionParticle {
    pub mass: f64,
    pub nu: f64,
}

impl FrictionParticle {
    pub fn new(mass: f64, nu: f64) -> Result<Self> {
        require_positive("mass", mass)?;
        require_finite("nu", nu)?;
        Ok(Self { mass, nu })
    }
}

impl DoubledLagrangian for FrictionParticle {
    fn l1(&self, _x: f64, v: f64, _t: f64) -> f64 {
        0.5 * self.mass * v * v
    }
    fn l2(&self, xp: f64, vp: f64, xm: f64, vm: f64, _t: f64) -> f64 {
        friction_l2(self.mass, self.nu, xp, vp, xm, vm)
    }
    fn dl1_dx(&self, _x: f64, _v: f64, _t: f64) -> f64 {
        0.0
    }
    fn dl1_dv(&self, _x: f64, v: f64, _t: f64) -> f64 {
        self.mass * v
    }
    fn dl1_dt(&self, _x: f64, _v: f64, _t: f64) -> f64 {
        0.0
    }
    fn dl2(&self, xp: f64, vp: f64, xm: f64, vm: f64, _t: f64) -> L2Partials {
        friction_dl2(self.mass, self.nu, xp, vp, xm, vm)
    }
}

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `L₁ = mẋ²/2 - k(t)x²/2` with a supplied stiffness and its derivative.
#[derive(Clone)]
pub struct VaryingStiffness {
    pub mass: f64,
    stiffness: Scalar,
    rate: Scalar,
}

impl VaryingStiffness {
    pub fn new(
        mass: f64,
        stiffness: impl Fn(f64) -> f64 + Send + Sync + 'static,
        rate: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        require_positive("mass", mass)?;
        Ok(Self {
            mass,
            stiffness: Arc::new(stiffness),
            rate: Arc::new(rate),
        })
    }

    pub fn stiffness(&self, t: f64) -> f64 {
        (self.stiffness)(t)
    }
}

impl DoubledLagrangian for VaryingStiffness {
    fn l1(&self, x: f64, v: f64, t: f64) -> f64 {
        0.5 * (self.mass * v * v - (self.stiffness)(t) * x * x)
    }
    fn dl1_dx(&self, x: f64, _v: f64, t: f64) -> f64 {
        -(self.stiffness)(t) * x
    }
    fn dl1_dv(&self, _x: f64, v: f64, _t: f64) -> f64 {
        self.mass * v
    }
    fn dl1_dt(&self, x: f64, _v: f64, t: f64) -> f64 {
        -0.5 * (self.rate)(t) * x * x
    }
    fn dl2(&self, _: f64, _: f64, _: f64, _: f64, _: f64) -> L2Partials {
        [0.0; 4]
    }
}

type L1Fn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
type L2Fn = Arc<dyn Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync>;

/// User Lagrangian from closures; every partial is taken numerically.
#[derive(Clone)]
pub struct ClosureLagrangian {
    l1: L1Fn,
    l2: Option<L2Fn>,
}

impl ClosureLagrangian {
    pub fn new(l1: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            l1: Arc::new(l1),
            l2: None,
        }
    }

    pub fn with_l2(mut self, l2: impl Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.l2 = Some(Arc::new(l2));
        self
    }
}

impl DoubledLagrangian for ClosureLagrangian {
    fn l1(&self, x: f64, v: f64, t: f64) -> f64 {
        (self.l1)(x, v, t)
    }
    fn l2(&self, xp: f64, vp: f64, xm: f64, vm: f64, t: f64) -> f64 {
        self.l2.as_ref().map_or(0.0, |f| f(xp, vp, xm, vm, t))
    }
}

/// Derivative of node samples with spacing `dt`.
pub fn time_derivative(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    if n < 3 {
        return vec![0.0; n];
    }
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt);
    for k in 1..n - 1 {
        d[k] = (values[k + 1] - values[k - 1]) / (2.0 * dt);
    }
    d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dt);
    d
}

/// Fourth-order velocity of node samples. Five-point centered stencils in
/// the interior, off-center five-point stencils at the two outer nodes on
/// each side. Falls back to [`time_derivative`] below five nodes.
pub fn velocity_samples(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    if n < 5 {
        return time_derivative(values, dt);
    }
    let f = values;
    let c = 12.0 * dt;
    let mut d = vec![0.0; n];
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / c;
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / c;
    for k in 2..n - 2 {
        d[k] = (f[k - 2] - 8.0 * f[k - 1] + 8.0 * f[k + 1] - f[k + 2]) / c;
    }
    let m = n - 1;
    d[m] = (25.0 * f[m] - 48.0 * f[m - 1] + 36.0 * f[m - 2] - 16.0 * f[m - 3] + 3.0 * f[m - 4]) / c;
    d[m - 1] = (3.0 * f[m] + 10.0 * f[m - 1] - 18.0 * f[m - 2] + 6.0 * f[m - 3] - f[m - 4]) / c;
    d
}

fn integral(grid_w: &[f64], r: &[f64]) -> f64 {
    grid_w.iter().zip(r).map(|(w, v)| w * v.abs()).sum()
}

/// Coincident-leg samples along a trajectory.
struct Samples {
    t: Vec<f64>,
    x: Vec<f64>,
    v: Vec<f64>,
    l2: Vec<L2Partials>,
    dt: f64,
}

impl Samples {
    fn new<L: DoubledLagrangian + ?Sized>(dl: &L, traj: &Trajectory) -> Result<Self> {
        if traj.len() < 3 {
            return Err(CtpError::InvalidInput("balance audit needs at least three nodes".into()));
        }
        let grid = traj.grid();
        let t = grid.nodes();
        let x = traj.values().to_vec();
        let v = velocity_samples(&x, grid.dt());
        let l2 = (0..x.len()).map(|n| dl.dl2(x[n], v[n], x[n], v[n], t[n])).collect();
        Ok(Self {
            t,
            x,
            v,
            l2,
            dt: grid.dt(),
        })
    }

    fn momentum<L: DoubledLagrangian + ?Sized>(&self, dl: &L) -> Vec<f64> {
        (0..self.x.len())
            .map(|n| dl.dl1_dv(self.x[n], self.v[n], self.t[n]) + self.l2[n][1])
            .collect()
    }

    fn forces(&self) -> Vec<f64> {
        let pv: Vec<f64> = self.l2.iter().map(|p| p[1]).collect();
        let dpv = time_derivative(&pv, self.dt);
        self.l2.iter().zip(&dpv).map(|(p, d)| p[0] - d).collect()
    }
}

/// `p_r = ∂L₁/∂ẋ + ∂L₂/∂ẋ₊` at node `n`.
pub fn renormalized_momentum<L: DoubledLagrangian + ?Sized>(dl: &L, traj: &Trajectory, n: usize) -> Result<f64> {
    let s = Samples::new(dl, traj)?;
    Ok(s.momentum(dl)[n])
}

/// Semi-holonomic force `F = ∂L₂/∂x₊ - d/dt ∂L₂/∂ẋ₊` at node `n`.
pub fn semi_holonomic_force<L: DoubledLagrangian + ?Sized>(dl: &L, traj: &Trajectory, n: usize) -> Result<f64> {
    let s = Samples::new(dl, traj)?;
    Ok(s.forces()[n])
}

/// One balanced quantity with its residual.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceSlice {
    pub values: Vec<f64>,
    pub residual: Vec<f64>,
    /// `∫ |r| dt`.
    pub norm: f64,
}

impl BalanceSlice {
    /// `max_n |q_n - q_0| / max(|q_0|, tiny)`.
    pub fn relative_drift(&self) -> f64 {
        let q0 = self.values[0];
        let drift = self.values.iter().map(|q| (q - q0).abs()).fold(0.0, f64::max);
        drift / q0.abs().max(f64::MIN_POSITIVE)
    }
}

/// Momentum and energy balance along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub times: Vec<f64>,
    pub momentum: BalanceSlice,
    pub energy: BalanceSlice,
}

impl BalanceReport {
    /// CSV `t,p_r,E,r_p,r_E`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_columns(
            out,
            &["t", "p_r", "E", "r_p", "r_E"],
            &[
                &self.times,
                &self.momentum.values,
                &self.energy.values,
                &self.momentum.residual,
                &self.energy.residual,
            ],
        )
    }
}

fn momentum_slice<L: DoubledLagrangian + ?Sized>(
    dl: &L,
    s: &Samples,
    w: &[f64],
    tolerance: f64,
) -> Result<BalanceSlice> {
    let p = s.momentum(dl);
    let dp = time_derivative(&p, s.dt);
    let rhs: Vec<f64> = (0..p.len())
        .map(|n| dl.dl1_dx(s.x[n], s.v[n], s.t[n]) + s.l2[n][0])
        .collect();
    let residual: Vec<f64> = dp.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let duration = s.t[s.t.len() - 1] - s.t[0];
    let scale = max_abs(&dp).max(max_abs(&rhs)).max(max_abs(&p) / duration);
    let worst = max_abs(&residual);
    if worst > tolerance * scale.max(f64::MIN_POSITIVE) {
        return Err(CtpError::OffShell {
            residual: worst / scale.max(f64::MIN_POSITIVE),
            tolerance,
        });
    }
    let norm = integral(w, &residual);
    Ok(BalanceSlice {
        values: p,
        residual,
        norm,
    })
}

fn energy_slice<L: DoubledLagrangian + ?Sized>(dl: &L, s: &Samples, w: &[f64]) -> BalanceSlice {
    let e: Vec<f64> = (0..s.x.len())
        .map(|n| s.v[n] * dl.dl1_dv(s.x[n], s.v[n], s.t[n]) - dl.l1(s.x[n], s.v[n], s.t[n]))
        .collect();
    let de = time_derivative(&e, s.dt);
    let f = s.forces();
    let residual: Vec<f64> = (0..e.len())
        .map(|n| de[n] + dl.dl1_dt(s.x[n], s.v[n], s.t[n]) - s.v[n] * f[n])
        .collect();
    let norm = integral(w, &residual);
    BalanceSlice {
        values: e,
        residual,
        norm,
    }
}

/// Full audit with the default on-shell tolerance.
pub fn balance_report<L: DoubledLagrangian + ?Sized>(dl: &L, traj: &Trajectory) -> Result<BalanceReport> {
    balance_report_with_tolerance(dl, traj, DEFAULT_ON_SHELL_TOLERANCE)
}

/// Full audit. The trajectory is first checked against the equation of
/// motion, which coincides with the momentum balance.
pub fn balance_report_with_tolerance<L: DoubledLagrangian + ?Sized>(
    dl: &L,
    traj: &Trajectory,
    tolerance: f64,
) -> Result<BalanceReport> {
    let s = Samples::new(dl, traj)?;
    let w = traj.grid().trapezoid_weights();
    let momentum = momentum_slice(dl, &s, &w, tolerance)?;
    let energy = energy_slice(dl, &s, &w);
    Ok(BalanceReport {
        times: s.t,
        momentum,
        energy,
    })
}

/// `ṗ_r = ∂L₁/∂x + ∂L₂/∂x₊` audit.
pub fn momentum_balance<L: DoubledLagrangian + ?Sized>(dl: &L, traj: &Trajectory) -> Result<BalanceSlice> {
    balance_report(dl, traj).map(|r| r.momentum)
}

/// `Ė = -∂_t L₁ + ẋF` audit.
pub fn energy_balance<L: DoubledLagrangian + ?Sized>(dl: &L, traj: &Trajectory) -> Result<BalanceSlice> {
    balance_report(dl, traj).map(|r| r.energy)
}

/// Coefficient of a uniform variation `δx₊ = δx₋ = ξ(t)` in the linearized
/// action at coincident legs, after integration by parts:
///
/// ```text
/// c = Σ_σ [σ(∂L₁/∂x - d/dt ∂L₁/∂ẋ) + ∂L₂/∂x_σ - d/dt ∂L₂/∂ẋ_σ].
/// ```
///
/// The leg contributions are formed separately and then summed.
pub fn uniform_variation_coefficient<L: DoubledLagrangian + ?Sized>(dl: &L, traj: &Trajectory) -> Result<Vec<f64>> {
    let s = Samples::new(dl, traj)?;
    let len = s.x.len();
    let pv1: Vec<f64> = (0..len).map(|n| dl.dl1_dv(s.x[n], s.v[n], s.t[n])).collect();
    let dpv1 = time_derivative(&pv1, s.dt);
    let el: Vec<f64> = (0..len)
        .map(|n| dl.dl1_dx(s.x[n], s.v[n], s.t[n]) - dpv1[n])
        .collect();
    let leg = |ix: usize, iv: usize| -> Vec<f64> {
        let pv: Vec<f64> = s.l2.iter().map(|p| p[iv]).collect();
        let dpv = time_derivative(&pv, s.dt);
        (0..len).map(|n| s.l2[n][ix] - dpv[n]).collect()
    };
    let plus = leg(0, 1);
    let minus = leg(2, 3);
    Ok((0..len)
        .map(|n| (el[n] + plus[n]) + (-el[n] + minus[n]))
        .collect())
}
