//! Discretized CTP Green functions with the ε-prescription.
//!
//! On the grid `t_n = -T + nΔt`, `Δt = T/N`, with the doubled index `(n, σ)`
//! over interior nodes `n = 1..N-1`, the free kernel is block diagonal,
//!
//! ```text
//! D₀⁻¹ = -δ_{σσ'} m [σ (Δ/Δt + Δt ω₀²) - i Δt ε],
//! ```
//!
//! with `Δ` the second-difference matrix. Its inverse has the eigenfunction
//! expansion
//!
//! ```text
//! D₀₊₊(t, t') = (2/Tm) Σ_{n=1}^{N-1} sin ω_n(t+T) sin ω_n(t'+T) / (ω̂_n² - ω₀² + iε),
//! ω_n = πn/T,   ω̂_n = (2/Δt) sin(πn/2N),
//! ```
//!
//! and `D₀₋₋ = -D₀₊₊*`. The common end point `x₊(0) = x₋(0)` couples the legs
//! through the source `B_σ = -σ m/Δt` at the last interior node:
//!
//! ```text
//! D̂ = D̂₀ - D̂₀B (B D̂₀ B)⁻¹ B D̂₀.
//! ```
//!
//! The result splits into three real kernels,
//!
//! ```text
//! D₊₊ = Dⁿ + iDⁱ,  D₊₋ = -D^f + iDⁱ,  D₋₊ = D^f + iDⁱ,  D₋₋ = -Dⁿ + iDⁱ,
//! ```
//!
//! with retarded and advanced combinations `D^{r/a} = Dⁿ ± D^f`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::action::OpenQuadraticModel;
use crate::error::{invalid, require_finite, require_positive, CtpError, Result};
use crate::grid::TimeGrid;
use crate::linalg::TridiagonalLu;
use crate::report::fmt_f64;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// CTP leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Leg {
    Plus,
    Minus,
}

impl Leg {
    pub const BOTH: [Leg; 2] = [Leg::Plus, Leg::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Leg::Plus => 1.0,
            Leg::Minus => -1.0,
        }
    }

    fn slot(self) -> usize {
        match self {
            Leg::Plus => 0,
            Leg::Minus => 1,
        }
    }
}

/// Grid for the appendix convention: `[-T, 0]` with `N - 1` interior nodes.
pub fn appendix_grid(horizon: f64, steps: usize) -> Result<TimeGrid> {
    if steps < 2 {
        return invalid(format!("need at least two time steps, got {steps}"));
    }
    TimeGrid::new(-horizon, 0.0, steps - 1)
}

/// Complex kernel over the doubled index `(n, σ)`, `n = 1..=N_int`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexKernel {
    grid: TimeGrid,
    entries: DMatrix<Complex64>,
}

impl ComplexKernel {
    pub fn new(grid: TimeGrid, entries: DMatrix<Complex64>) -> Result<Self> {
        let dim = 2 * grid.interior();
        if entries.nrows() != dim || entries.ncols() != dim {
            return invalid(format!(
                "kernel must be {dim}x{dim}, got {}x{}",
                entries.nrows(),
                entries.ncols()
            ));
        }
        Ok(Self { grid, entries })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Flat index of node `n ∈ 1..=N_int` on `leg`.
    pub fn index(&self, n: usize, leg: Leg) -> usize {
        flat_index(self.grid.interior(), n, leg)
    }

    pub fn entry(&self, n: usize, leg: Leg, np: usize, legp: Leg) -> Complex64 {
        self.entries[(self.index(n, leg), self.index(np, legp))]
    }

    /// The `(σ, σ')` block.
    pub fn block(&self, leg: Leg, legp: Leg) -> DMatrix<Complex64> {
        let n = self.grid.interior();
        self.entries
            .view((leg.slot() * n, legp.slot() * n), (n, n))
            .into_owned()
    }

    /// Largest `|K_ab - K_ba|`.
    pub fn asymmetry(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for a in 0..d {
            for b in a + 1..d {
                worst = worst.max((self.entries[(a, b)] - self.entries[(b, a)]).norm());
            }
        }
        worst
    }

    pub fn max_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Dump as CSV `n,sigma,nprime,sigmaprime,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,sigma,nprime,sigmaprime,re,im")?;
        let n_int = self.grid.interior();
        for leg in Leg::BOTH {
            for n in 1..=n_int {
                for legp in Leg::BOTH {
                    for np in 1..=n_int {
                        let z = self.entry(n, leg, np, legp);
                        writeln!(
                            out,
                            "{},{},{},{},{},{}",
                            n,
                            leg.sign() as i32,
                            np,
                            legp.sign() as i32,
                            fmt_f64(z.re),
                            fmt_f64(z.im)
                        )?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn flat_index(n_int: usize, n: usize, leg: Leg) -> usize {
    debug_assert!((1..=n_int).contains(&n));
    leg.slot() * n_int + (n - 1)
}

/// How columns of `D₀` are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum D0Method {
    /// Eigenfunction expansion, `O(N)` per entry.
    Eigen,
    /// Banded LU solve, `O(N)` per column.
    Banded,
    /// Expansion up to 1024 steps, banded above.
    Auto,
}

/// Free kernel `D₀⁻¹` with its factorization; tridiagonal per leg.
#[derive(Debug, Clone)]
pub struct D0Kernel {
    grid: TimeGrid,
    mass: f64,
    omega0: f64,
    eps: f64,
    lu: [TridiagonalLu; 2],
}

/// Assemble `D₀⁻¹` for `ε > 0`.
pub fn build_d0_inverse(mass: f64, omega0: f64, grid: TimeGrid, eps: f64) -> Result<D0Kernel> {
    D0Kernel::new(mass, omega0, grid, eps)
}

impl D0Kernel {
    pub fn new(mass: f64, omega0: f64, grid: TimeGrid, eps: f64) -> Result<Self> {
        require_positive("mass", mass)?;
        require_finite("omega0", omega0)?;
        if !eps.is_finite() || eps <= 0.0 {
            return invalid(format!(
                "epsilon must be positive for the free kernel to be invertible, got {eps}"
            ));
        }
        let n = grid.interior();
        let mut lu = Vec::with_capacity(2);
        for leg in Leg::BOTH {
            let (d, o) = Self::bands(mass, omega0, grid.dt(), eps, leg);
            lu.push(TridiagonalLu::factor(&vec![o; n - 1], &vec![d; n], &vec![o; n - 1])?);
        }
        let minus = lu.pop().expect("two legs");
        let plus = lu.pop().expect("two legs");
        Ok(Self {
            grid,
            mass,
            omega0,
            eps,
            lu: [plus, minus],
        })
    }

    fn bands(mass: f64, omega0: f64, dt: f64, eps: f64, leg: Leg) -> (Complex64, Complex64) {
        let s = leg.sign();
        let diag = Complex64::new(-s * mass * (-2.0 / dt + dt * omega0 * omega0), mass * dt * eps);
        let off = Complex64::new(-s * mass / dt, 0.0);
        (diag, off)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Diagonal and off-diagonal entries of the `leg` block of `D₀⁻¹`.
    pub fn inverse_bands(&self, leg: Leg) -> (Complex64, Complex64) {
        Self::bands(self.mass, self.omega0, self.grid.dt(), self.eps, leg)
    }

    /// Dense `D₀⁻¹`.
    pub fn inverse_dense(&self) -> ComplexKernel {
        let n = self.grid.interior();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for leg in Leg::BOTH {
            let (d, o) = self.inverse_bands(leg);
            for k in 1..=n {
                let a = flat_index(n, k, leg);
                m[(a, a)] = d;
                if k < n {
                    m[(a, a + 1)] = o;
                    m[(a + 1, a)] = o;
                }
            }
        }
        ComplexKernel {
            grid: self.grid,
            entries: m,
        }
    }

    fn steps(&self) -> usize {
        self.grid.interior() + 1
    }

    fn resolve(&self, method: D0Method) -> D0Method {
        match method {
            D0Method::Auto if self.steps() <= 1024 => D0Method::Eigen,
            D0Method::Auto => D0Method::Banded,
            m => m,
        }
    }

    /// Column `(n', σ')` of `D₀` restricted to leg `σ'` (other leg vanishes).
    pub fn leg_column(&self, np: usize, leg: Leg, method: D0Method) -> Result<Vec<Complex64>> {
        let n = self.grid.interior();
        if !(1..=n).contains(&np) {
            return invalid(format!("node {np} outside interior range 1..={n}"));
        }
        match self.resolve(method) {
            D0Method::Banded => {
                let mut rhs = vec![Complex64::new(0.0, 0.0); n];
                rhs[np - 1] = Complex64::new(1.0, 0.0);
                self.lu[leg.slot()].solve_in_place(&mut rhs)?;
                Ok(rhs)
            }
            _ => {
                let table = SineTable::new(self.steps());
                Ok((1..=n).map(|k| self.eigen_entry(&table, k, np, leg)).collect())
            }
        }
    }

    /// Full column of `D₀` over the doubled index.
    pub fn column(&self, np: usize, leg: Leg, method: D0Method) -> Result<Vec<Complex64>> {
        let n = self.grid.interior();
        let part = self.leg_column(np, leg, method)?;
        let mut col = vec![Complex64::new(0.0, 0.0); 2 * n];
        col[leg.slot() * n..leg.slot() * n + n].copy_from_slice(&part);
        Ok(col)
    }

    fn eigen_entry(&self, table: &SineTable, k: usize, kp: usize, leg: Leg) -> Complex64 {
        let steps = self.steps();
        let dt = self.grid.dt();
        let w2 = self.omega0 * self.omega0;
        let mut sum = Complex64::new(0.0, 0.0);
        for n in 1..steps {
            let s = (2.0 / dt) * table.half(n);
            let denom = Complex64::new(s * s - w2, self.eps);
            sum += table.full(n * k) * table.full(n * kp) / denom;
        }
        let plus = sum * (2.0 / (steps as f64 * self.mass * dt));
        match leg {
            Leg::Plus => plus,
            Leg::Minus => -plus.conj(),
        }
    }

    /// Dense `D₀`.
    pub fn green_dense(&self, method: D0Method) -> Result<ComplexKernel> {
        let n = self.grid.interior();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for leg in Leg::BOTH {
            for np in 1..=n {
                let col = self.leg_column(np, leg, method)?;
                let off = leg.slot() * n;
                for k in 0..n {
                    m[(off + k, off + np - 1)] = col[k];
                }
            }
        }
        ComplexKernel::new(self.grid, m)
    }
}

/// `sin(πj/N)` and `sin(πj/2N)` lookups without accumulated phase error.
struct SineTable {
    steps: usize,
    full: Vec<f64>,
    half: Vec<f64>,
}

impl SineTable {
    fn new(steps: usize) -> Self {
        let full = (0..2 * steps)
            .map(|j| (PI * j as f64 / steps as f64).sin())
            .collect();
        let half = (0..=steps)
            .map(|j| (PI * j as f64 / (2.0 * steps as f64)).sin())
            .collect();
        Self { steps, full, half }
    }

    fn full(&self, j: usize) -> f64 {
        self.full[j % (2 * self.steps)]
    }

    fn half(&self, n: usize) -> f64 {
        self.half[n]
    }
}

/// `D₀` on leg `σ` at grid times `t, t' ∈ (-T, 0)` by the eigenfunction sum.
pub fn d0_eigen(mass: f64, omega0: f64, grid: &TimeGrid, eps: f64, t: f64, tp: f64, leg: Leg) -> Result<Complex64> {
    let k = interior_index(grid, t)?;
    let kp = interior_index(grid, tp)?;
    let kernel = D0Kernel::new(mass, omega0, *grid, eps)?;
    let table = SineTable::new(kernel.steps());
    Ok(kernel.eigen_entry(&table, k, kp, leg))
}

fn interior_index(grid: &TimeGrid, t: f64) -> Result<usize> {
    match grid.index_of(t) {
        Some(n) if n >= 1 && n <= grid.interior() => Ok(n),
        _ => invalid(format!("time {t} is not an interior grid node")),
    }
}

/// Common end-point source: `-σ m/Δt` at the last interior node of each leg.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySource {
    grid: TimeGrid,
    mass: f64,
}

impl BoundarySource {
    pub fn new(grid: TimeGrid, mass: f64) -> Result<Self> {
        require_positive("mass", mass)?;
        Ok(Self { grid, mass })
    }

    pub fn value(&self, leg: Leg) -> f64 {
        -leg.sign() * self.mass / self.grid.dt()
    }

    /// Dense vector over the doubled index.
    pub fn vector(&self) -> Vec<Complex64> {
        let n = self.grid.interior();
        let mut b = vec![Complex64::new(0.0, 0.0); 2 * n];
        for leg in Leg::BOTH {
            b[flat_index(n, n, leg)] = Complex64::new(self.value(leg), 0.0);
        }
        b
    }
}

fn check_degenerate(s: Complex64, scale: f64) -> Result<()> {
    if !s.is_finite() || s.norm() <= 1e-12 * scale {
        Err(CtpError::DegenerateEndpoint { magnitude: s.norm() })
    } else {
        Ok(())
    }
}

/// Dense end-point elimination `D̂ = D̂₀ - D̂₀B (B D̂₀ B)⁻¹ B D̂₀`.
pub fn eliminate_endpoint(d0: &ComplexKernel, b: &BoundarySource) -> Result<ComplexKernel> {
    if d0.grid != b.grid {
        return invalid("kernel and boundary source live on different grids");
    }
    let bv = nalgebra::DVector::from_vec(b.vector());
    let u = d0.entries.clone() * &bv;
    let s = bv.dot(&u);
    let scale: f64 = bv.iter().zip(u.iter()).map(|(x, y)| x.norm() * y.norm()).sum();
    check_degenerate(s, scale)?;
    let v = d0.entries.transpose() * &bv;
    let correction = &u * v.transpose() / s;
    ComplexKernel::new(d0.grid, &d0.entries - correction)
}

/// End-point-eliminated Green function evaluated column by column.
#[derive(Debug, Clone)]
pub struct CtpGreenFunction {
    d0: D0Kernel,
    method: D0Method,
    /// `D̂₀B` over the doubled index.
    u: Vec<Complex64>,
    /// `B D̂₀ B`.
    s: Complex64,
}

impl CtpGreenFunction {
    pub fn new(d0: D0Kernel, method: D0Method) -> Result<Self> {
        let n = d0.grid.interior();
        let b = BoundarySource::new(d0.grid, d0.mass)?;
        let mut u = vec![Complex64::new(0.0, 0.0); 2 * n];
        let mut s = Complex64::new(0.0, 0.0);
        let mut scale = 0.0;
        for leg in Leg::BOTH {
            let col = d0.leg_column(n, leg, method)?;
            let bval = b.value(leg);
            for k in 0..n {
                u[leg.slot() * n + k] = col[k] * bval;
            }
            s += col[n - 1] * bval * bval;
            scale += (col[n - 1] * bval * bval).norm();
        }
        check_degenerate(s, scale)?;
        Ok(Self { d0, method, u, s })
    }

    /// Build `D̂` for harmonic parameters on an appendix grid.
    pub fn harmonic(mass: f64, omega0: f64, horizon: f64, steps: usize, eps: f64) -> Result<Self> {
        let grid = appendix_grid(horizon, steps)?;
        Self::new(D0Kernel::new(mass, omega0, grid, eps)?, D0Method::Auto)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.d0.grid
    }

    pub fn d0(&self) -> &D0Kernel {
        &self.d0
    }

    /// Scalar `B D̂₀ B`.
    pub fn endpoint_scalar(&self) -> Complex64 {
        self.s
    }

    /// Column `(n', σ')` of `D̂` over the doubled index.
    pub fn column(&self, np: usize, legp: Leg) -> Result<Vec<Complex64>> {
        let mut col = self.d0.column(np, legp, self.method)?;
        let n = self.d0.grid.interior();
        let up = self.u[flat_index(n, np, legp)];
        for (c, u) in col.iter_mut().zip(&self.u) {
            *c -= u * up / self.s;
        }
        Ok(col)
    }

    /// The four blocks `D_{σσ'}(t, t')` at grid times, indexed `[σ][σ']`.
    pub fn blocks_at(&self, t: f64, tp: f64) -> Result<[[Complex64; 2]; 2]> {
        let grid = self.d0.grid;
        let n = interior_index(&grid, t)?;
        let np = interior_index(&grid, tp)?;
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        let n_int = grid.interior();
        for legp in Leg::BOTH {
            let col = self.column(np, legp)?;
            for leg in Leg::BOTH {
                out[leg.slot()][legp.slot()] = col[flat_index(n_int, n, leg)];
            }
        }
        Ok(out)
    }

    /// The `2 × 2` blocks at every pair of the given interior nodes, indexed
    /// `[i][j]` over `nodes`. Costs two columns per node.
    pub fn block_table(&self, nodes: &[usize]) -> Result<Vec<Vec<[[Complex64; 2]; 2]>>> {
        let n_int = self.d0.grid.interior();
        let zero = [[Complex64::new(0.0, 0.0); 2]; 2];
        let mut table = vec![vec![zero; nodes.len()]; nodes.len()];
        for (j, &np) in nodes.iter().enumerate() {
            for legp in Leg::BOTH {
                let col = self.column(np, legp)?;
                for (i, &n) in nodes.iter().enumerate() {
                    if !(1..=n_int).contains(&n) {
                        return invalid(format!("node {n} outside interior range 1..={n_int}"));
                    }
                    for leg in Leg::BOTH {
                        table[i][j][leg.slot()][legp.slot()] = col[flat_index(n_int, n, leg)];
                    }
                }
            }
        }
        Ok(table)
    }

    pub fn to_dense(&self) -> Result<ComplexKernel> {
        let n = self.d0.grid.interior();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for legp in Leg::BOTH {
            for np in 1..=n {
                let col = self.column(np, legp)?;
                let j = flat_index(n, np, legp);
                for (i, z) in col.into_iter().enumerate() {
                    m[(i, j)] = z;
                }
            }
        }
        ComplexKernel::new(self.d0.grid, m)
    }
}

/// Real kernels `(Dⁿ, D^f, Dⁱ)` on interior node times.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenBlocks {
    pub times: Vec<f64>,
    pub dn: DMatrix<f64>,
    pub df: DMatrix<f64>,
    pub di: DMatrix<f64>,
}

/// Block projection together with the reconstruction residual.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockProjection {
    pub blocks: GreenBlocks,
    /// Largest entrywise deviation between `D` and the reassembled pattern.
    pub residual: f64,
}

/// Projection of one `2 × 2` block onto `(Dⁿ, D^f, Dⁱ)` and the largest
/// deviation of the block from the reassembled pattern.
pub fn project_pair(z: &[[Complex64; 2]; 2]) -> ([f64; 3], f64) {
    let [[pp, pm], [mp, mm]] = *z;
    let dn = 0.5 * (pp - mm).re;
    let df = 0.5 * (mp - pm).re;
    let di = 0.25 * (pp + pm + mp + mm).im;
    let idi = I * di;
    let residual = [
        (pp - (dn + idi)).norm(),
        (pm - (-df + idi)).norm(),
        (mp - (df + idi)).norm(),
        (mm - (-dn + idi)).norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    ([dn, df, di], residual)
}

/// Project onto the CTP block pattern without enforcing it.
pub fn project_blocks(d: &ComplexKernel) -> BlockProjection {
    let pp = d.block(Leg::Plus, Leg::Plus);
    let pm = d.block(Leg::Plus, Leg::Minus);
    let mp = d.block(Leg::Minus, Leg::Plus);
    let mm = d.block(Leg::Minus, Leg::Minus);
    let n = pp.nrows();
    let mut dn = DMatrix::zeros(n, n);
    let mut df = DMatrix::zeros(n, n);
    let mut di = DMatrix::zeros(n, n);
    let mut residual = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let ([a, b, c], r) = project_pair(&[[pp[(i, j)], pm[(i, j)]], [mp[(i, j)], mm[(i, j)]]]);
            dn[(i, j)] = a;
            df[(i, j)] = b;
            di[(i, j)] = c;
            residual = residual.max(r);
        }
    }
    let grid = d.grid();
    let times = (1..=grid.interior()).map(|k| grid.node(k)).collect();
    BlockProjection {
        blocks: GreenBlocks { times, dn, df, di },
        residual,
    }
}

/// Decompose with the default pattern tolerance `10⁻⁸ · max|D|`.
pub fn decompose_blocks(d: &ComplexKernel) -> Result<GreenBlocks> {
    decompose_blocks_with_tolerance(d, 1e-8)
}

pub fn decompose_blocks_with_tolerance(d: &ComplexKernel, rel_tol: f64) -> Result<GreenBlocks> {
    let proj = project_blocks(d);
    let tolerance = rel_tol * d.max_norm();
    if proj.residual > tolerance {
        return Err(CtpError::StructureViolation {
            residual: proj.residual,
            tolerance,
        });
    }
    Ok(proj.blocks)
}

/// `D^r = Dⁿ + D^f`.
pub fn retarded(blocks: &GreenBlocks) -> DMatrix<f64> {
    &blocks.dn + &blocks.df
}

/// `D^a = Dⁿ - D^f`.
pub fn advanced(blocks: &GreenBlocks) -> DMatrix<f64> {
    &blocks.dn - &blocks.df
}

impl GreenBlocks {
    /// Dump as CSV `t,tprime,Dn,Df,Di`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,tprime,Dn,Df,Di")?;
        for (i, t) in self.times.iter().enumerate() {
            for (j, tp) in self.times.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    fmt_f64(*t),
                    fmt_f64(*tp),
                    fmt_f64(self.dn[(i, j)]),
                    fmt_f64(self.df[(i, j)]),
                    fmt_f64(self.di[(i, j)])
                )?;
            }
        }
        Ok(())
    }
}

/// Fraction of the retarded kernel found at `t < t' - guard`.
pub fn retarded_leakage(blocks: &GreenBlocks, guard: f64) -> f64 {
    let dr = retarded(blocks);
    let peak = dr.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut leak = 0.0f64;
    for (i, t) in blocks.times.iter().enumerate() {
        for (j, tp) in blocks.times.iter().enumerate() {
            if *t < tp - guard {
                leak = leak.max(dr[(i, j)].abs());
            }
        }
    }
    if peak == 0.0 {
        0.0
    } else {
        leak / peak
    }
}

/// Time-translation-invariant real kernels `Dⁿ(τ), D^f(τ), Dⁱ(τ)`, `τ = t - t'`.
pub trait TimeDomainBlocks {
    fn near(&self, tau: f64) -> f64;
    fn far(&self, tau: f64) -> f64;
    fn imaginary(&self, tau: f64) -> f64;

    fn retarded(&self, tau: f64) -> f64 {
        self.near(tau) + self.far(tau)
    }

    fn advanced(&self, tau: f64) -> f64 {
        self.near(tau) - self.far(tau)
    }
}

/// Large-T, ε → 0 harmonic blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicBlocks {
    pub mass: f64,
    pub omega0: f64,
}

impl HarmonicBlocks {
    pub fn new(mass: f64, omega0: f64) -> Result<Self> {
        require_positive("mass", mass)?;
        require_positive("omega0", omega0)?;
        Ok(Self { mass, omega0 })
    }

    fn z(&self) -> f64 {
        1.0 / (2.0 * self.mass * self.omega0)
    }
}

impl TimeDomainBlocks for HarmonicBlocks {
    fn near(&self, tau: f64) -> f64 {
        -(self.omega0 * tau.abs()).sin() * self.z()
    }

    fn far(&self, tau: f64) -> f64 {
        -(self.omega0 * tau).sin() * self.z()
    }

    fn imaginary(&self, tau: f64) -> f64 {
        -(self.omega0 * tau).cos() * self.z()
    }

    fn retarded(&self, tau: f64) -> f64 {
        if tau > 0.0 {
            -(self.omega0 * tau).sin() / (self.mass * self.omega0)
        } else {
            0.0
        }
    }

    fn advanced(&self, tau: f64) -> f64 {
        self.retarded(-tau)
    }
}

/// Principal-value near Green function `-sin(ω₀|t|)/(2mω₀)`.
pub fn near_green_pv(mass: f64, omega0: f64, t: f64) -> f64 {
    -(omega0 * t.abs()).sin() / (2.0 * mass * omega0)
}

/// Harmonic CTP matrix in the large-T, ε → 0 limit, indexed `[σ][σ']`:
///
/// ```text
/// -(i/2mω₀) [[e^{-iω₀|τ|}, e^{iω₀τ}], [e^{-iω₀τ}, e^{iω₀|τ|}]],   τ = t - t'.
/// ```
pub fn harmonic_ctp_matrix(mass: f64, omega0: f64, tau: f64) -> [[Complex64; 2]; 2] {
    let pre = -I / (2.0 * mass * omega0);
    let e = |phase: f64| Complex64::from_polar(1.0, phase);
    [
        [pre * e(-omega0 * tau.abs()), pre * e(omega0 * tau)],
        [pre * e(-omega0 * tau), pre * e(omega0 * tau.abs())],
    ]
}

/// Complex pole `Ω = √(ω₀² - iε)` of the regulated free kernel.
pub fn pole_frequency(omega0: f64, eps: f64) -> Complex64 {
    Complex64::new(omega0 * omega0, -eps).sqrt()
}

/// Continuum `D₀₊₊` for times `t, t' ≤ 0` with the end point at `0`,
/// `(i/2mΩ)[e^{iΩ(t+t')} - e^{-iΩ|t-t'|}]`. It vanishes at `t = 0` and the
/// initial boundary at `-T` is suppressed by `Im Ω < 0`.
pub fn d0_continuum(mass: f64, pole: Complex64, t: f64, tp: f64) -> Complex64 {
    let pre = I / (2.0 * mass * pole);
    pre * ((I * pole * (t + tp)).exp() - (-I * pole * (t - tp).abs()).exp())
}

/// Ground-state propagator from truncated ladder operators,
/// `x(t) = (a e^{-iω₀t} + a† e^{iω₀t})/√(2mω₀)`:
///
/// ```text
/// D₊₊ = -i⟨T x(t)x(t')⟩,  D₊₋ = -i⟨x(t')x(t)⟩,  D₋₊ = -i⟨x(t)x(t')⟩,  D₋₋ = -i⟨T̄ x(t)x(t')⟩.
/// ```
pub fn operator_propagator(mass: f64, omega0: f64, t: f64, tp: f64, fock_dim: usize) -> Result<[[Complex64; 2]; 2]> {
    require_positive("mass", mass)?;
    require_positive("omega0", omega0)?;
    if fock_dim < 3 {
        return invalid(format!("Fock truncation must keep at least 3 levels, got {fock_dim}"));
    }
    let a = DMatrix::from_fn(fock_dim, fock_dim, |i, j| {
        if j == i + 1 {
            Complex64::new((j as f64).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let ad = a.adjoint();
    let scale = 1.0 / (2.0 * mass * omega0).sqrt();
    let x_at = |time: f64| -> DMatrix<Complex64> {
        let phase = Complex64::from_polar(1.0, -omega0 * time);
        (&a * phase + &ad * phase.conj()) * Complex64::new(scale, 0.0)
    };
    let (xt, xtp) = (x_at(t), x_at(tp));
    let vac = |m: DMatrix<Complex64>| m[(0, 0)];
    let fwd = vac(&xt * &xtp);
    let bwd = vac(&xtp * &xt);
    let (ordered, anti) = if t >= tp { (fwd, bwd) } else { (bwd, fwd) };
    Ok([[-I * ordered, -I * bwd], [-I * fwd, -I * anti]])
}

/// Frequency-domain kernels of the open quadratic model.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenKernels {
    pub omega: Vec<f64>,
    pub dr: Vec<Complex64>,
    pub da: Vec<Complex64>,
    pub di: Vec<Complex64>,
    pub kn: Vec<Complex64>,
    pub kf: Vec<Complex64>,
    pub ki: Vec<Complex64>,
}

/// Sample `D^{r/a} = 1/(m[ω² - ω₀² ± iων])`, `Dⁱ`, `Kⁿ = m(ω² - ω₀²)`,
/// `K^f = imων` and `Kⁱ = d₀ + d₂ω²` on a frequency grid.
pub fn open_kernels(model: &OpenQuadraticModel, omegas: &[f64]) -> Result<OpenKernels> {
    let m = model.mass;
    let w02 = model.omega * model.omega;
    let n = omegas.len();
    let mut out = OpenKernels {
        omega: omegas.to_vec(),
        dr: Vec::with_capacity(n),
        da: Vec::with_capacity(n),
        di: Vec::with_capacity(n),
        kn: Vec::with_capacity(n),
        kf: Vec::with_capacity(n),
        ki: Vec::with_capacity(n),
    };
    for &w in omegas {
        require_finite("frequency", w)?;
        let off = w * w - w02;
        let fric = w * model.nu;
        let mag2 = off * off + fric * fric;
        if mag2.sqrt() <= 1e-14 * (w * w + w02).max(f64::MIN_POSITIVE) || mag2 == 0.0 {
            return Err(CtpError::Singularity { frequency: w });
        }
        let kn = Complex64::new(m * off, 0.0);
        let kf = Complex64::new(0.0, m * fric);
        let noise = model.d0 + model.d2 * w * w;
        out.dr.push((kn + kf).inv());
        out.da.push((kn - kf).inv());
        out.di.push(Complex64::new(-noise / (m * m * mag2), 0.0));
        out.kn.push(kn);
        out.kf.push(kf);
        out.ki.push(Complex64::new(noise, 0.0));
    }
    Ok(out)
}
