//! Uniform time grids and trajectories on them.
//!
//! A grid on `[t_i, t_f]` with `N` interior nodes has `N + 2` nodes
//! `t_n = t_i + n Δt`, `n = 0..=N+1`, with `Δt = (t_f - t_i)/(N + 1)`.
//! The final node is pinned to `t_f` exactly so that closing conditions
//! compare values at the same instant.
//!
//! A doubled (closed-time-path) trajectory carries two legs `x₊` and `x₋`
//! on the same grid. It is *closed* when `x₊(t_f) = x₋(t_f)`. A single
//! trajectory on `[t_i, 2t_f - t_i]` with an odd interior count folds into
//! a closed pair through
//!
//! ```text
//! x₊[n] = x[n],   x₋[n] = x[2N + 2 - n],   n = 0..=N+1.
//! ```

use crate::error::{invalid, CtpError, Result};

/// Uniform grid with pinned endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_i: f64,
    t_f: f64,
    interior: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(t_i: f64, t_f: f64, interior: usize) -> Result<Self> {
        if !t_i.is_finite() || !t_f.is_finite() {
            return invalid(format!("grid endpoints must be finite, got [{t_i}, {t_f}]"));
        }
        if t_f <= t_i {
            return invalid(format!("grid requires t_f > t_i, got [{t_i}, {t_f}]"));
        }
        if interior < 1 {
            return invalid("grid requires at least one interior node");
        }
        let dt = (t_f - t_i) / (interior as f64 + 1.0);
        Ok(Self {
            t_i,
            t_f,
            interior,
            dt,
        })
    }

    /// Grid with step as close as possible to `dt` (rounded to an integer node count).
    pub fn with_step(t_i: f64, t_f: f64, dt: f64) -> Result<Self> {
        if !dt.is_finite() || dt <= 0.0 {
            return invalid(format!("time step must be positive, got {dt}"));
        }
        let steps = ((t_f - t_i) / dt).round().max(2.0) as usize;
        Self::new(t_i, t_f, steps - 1)
    }

    pub fn t_i(&self) -> f64 {
        self.t_i
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    /// Number of interior nodes `N`.
    pub fn interior(&self) -> usize {
        self.interior
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Total node count `N + 2`.
    pub fn len(&self) -> usize {
        self.interior + 2
    }

    /// Always false: a grid carries at least its two endpoints.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the final node, `N + 1`.
    pub fn last(&self) -> usize {
        self.interior + 1
    }

    pub fn duration(&self) -> f64 {
        self.t_f - self.t_i
    }

    pub fn node(&self, n: usize) -> f64 {
        if n == self.last() {
            self.t_f
        } else {
            self.t_i + n as f64 * self.dt
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.node(n)).collect()
    }

    /// Node index of `t` when `t` lies on the grid up to rounding.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = ((t - self.t_i) / self.dt).round();
        if k < 0.0 || k > self.last() as f64 {
            return None;
        }
        let n = k as usize;
        ((self.node(n) - t).abs() <= 1e-9 * self.dt).then_some(n)
    }

    /// Trapezoid weights over all nodes.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut w = vec![self.dt; self.len()];
        w[0] *= 0.5;
        w[self.last()] *= 0.5;
        w
    }
}

/// Convenience constructor mirroring [`TimeGrid::new`].
pub fn make_grid(t_i: f64, t_f: f64, interior: usize) -> Result<TimeGrid> {
    TimeGrid::new(t_i, t_f, interior)
}

/// Real trajectory sampled on every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CtpError::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, n: usize) -> f64 {
        self.values[n]
    }

    /// `∇⁺x_n = (x_{n+1} - x_n)/Δt`, defined for `n = 0..=N`.
    pub fn forward_diff(&self, n: usize) -> Result<f64> {
        if n >= self.grid.last() {
            return invalid(format!(
                "forward difference undefined at node {n} (last node {})",
                self.grid.last()
            ));
        }
        Ok((self.values[n + 1] - self.values[n]) / self.grid.dt)
    }

    /// `∇⁻x_n = (x_n - x_{n-1})/Δt`, defined for `n = 1..=N+1`.
    pub fn backward_diff(&self, n: usize) -> Result<f64> {
        if n == 0 || n > self.grid.last() {
            return invalid(format!(
                "backward difference undefined at node {n} (last node {})",
                self.grid.last()
            ));
        }
        Ok((self.values[n] - self.values[n - 1]) / self.grid.dt)
    }

    /// Maximum absolute difference against another trajectory on the same grid.
    pub fn max_abs_diff(&self, other: &Trajectory) -> Result<f64> {
        if self.values.len() != other.values.len() {
            return Err(CtpError::LengthMismatch {
                expected: self.values.len(),
                found: other.values.len(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Pair of legs on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CtpTrajectory {
    plus: Trajectory,
    minus: Trajectory,
    closed: bool,
}

impl CtpTrajectory {
    /// Pair without a closing condition.
    pub fn open(plus: Trajectory, minus: Trajectory) -> Result<Self> {
        if plus.grid != minus.grid {
            return invalid("legs must share the same grid");
        }
        Ok(Self {
            plus,
            minus,
            closed: false,
        })
    }

    /// Pair satisfying `x₊(t_f) = x₋(t_f)`.
    pub fn closed(plus: Trajectory, minus: Trajectory) -> Result<Self> {
        let mut pair = Self::open(plus, minus)?;
        let last = pair.plus.grid.last();
        let (p, m) = (pair.plus.values[last], pair.minus.values[last]);
        if p != m {
            return Err(CtpError::NotClosed { plus: p, minus: m });
        }
        pair.closed = true;
        Ok(pair)
    }

    /// Closed pair from leg values, overwriting the final `x₋` node with the
    /// final `x₊` node.
    pub fn closed_from_values(grid: TimeGrid, plus: Vec<f64>, mut minus: Vec<f64>) -> Result<Self> {
        let last = grid.last();
        if plus.len() == grid.len() && minus.len() == grid.len() {
            minus[last] = plus[last];
        }
        Self::closed(Trajectory::new(grid, plus)?, Trajectory::new(grid, minus)?)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.plus.grid
    }

    pub fn plus(&self) -> &Trajectory {
        &self.plus
    }

    pub fn minus(&self) -> &Trajectory {
        &self.minus
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// `(x₊ + x₋)/2` on every node.
    pub fn average(&self) -> Vec<f64> {
        self.plus
            .values
            .iter()
            .zip(&self.minus.values)
            .map(|(p, m)| 0.5 * (p + m))
            .collect()
    }

    /// `x₊ - x₋` on every node.
    pub fn difference(&self) -> Vec<f64> {
        self.plus
            .values
            .iter()
            .zip(&self.minus.values)
            .map(|(p, m)| p - m)
            .collect()
    }

    /// Legs exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            plus: self.minus.clone(),
            minus: self.plus.clone(),
            closed: self.closed,
        }
    }
}

/// Phase-space trajectory: positions on every node, momenta on the
/// intervals `(t_{n-1}, t_n]`, indexed `n = 1..=N+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    grid: TimeGrid,
    x: Vec<f64>,
    p: Vec<f64>,
}

impl PhaseTrajectory {
    /// `p` holds `p_1, …, p_{N+1}`.
    pub fn new(grid: TimeGrid, x: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if x.len() != grid.len() {
            return Err(CtpError::LengthMismatch {
                expected: grid.len(),
                found: x.len(),
            });
        }
        if p.len() != grid.len() - 1 {
            return Err(CtpError::LengthMismatch {
                expected: grid.len() - 1,
                found: p.len(),
            });
        }
        Ok(Self { grid, x, p })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Momenta `p_1, …, p_{N+1}`.
    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// Momentum on interval `n`, `1 <= n <= N+1`.
    pub fn p_at(&self, n: usize) -> f64 {
        self.p[n - 1]
    }
}

fn folded_grid(full: &TimeGrid) -> Result<TimeGrid> {
    let m = full.interior();
    if m.is_multiple_of(2) {
        return invalid(format!(
            "round-trip split needs an odd interior count, got {m}"
        ));
    }
    let n = (m - 1) / 2;
    if n < 1 {
        return invalid("round-trip split needs at least three interior nodes");
    }
    TimeGrid::new(full.t_i(), full.node(n + 1), n)
}

/// Fold a trajectory on `[t_i, 2t_f - t_i]` into a closed pair on `[t_i, t_f]`.
pub fn roundtrip_split(full: &Trajectory) -> Result<CtpTrajectory> {
    let grid = folded_grid(full.grid())?;
    let n = grid.interior();
    let plus: Vec<f64> = (0..=n + 1).map(|k| full.at(k)).collect();
    let minus: Vec<f64> = (0..=n + 1).map(|k| full.at(2 * n + 2 - k)).collect();
    CtpTrajectory::closed(Trajectory::new(grid, plus)?, Trajectory::new(grid, minus)?)
}

/// Unfold a closed pair into a single trajectory on `[t_i, 2t_f - t_i]`.
pub fn roundtrip_join(pair: &CtpTrajectory) -> Result<Trajectory> {
    let grid = pair.grid();
    let last = grid.last();
    let (p, m) = (pair.plus().at(last), pair.minus().at(last));
    if p != m {
        return Err(CtpError::NotClosed { plus: p, minus: m });
    }
    let n = grid.interior();
    let full_grid = TimeGrid::new(grid.t_i(), 2.0 * grid.t_f() - grid.t_i(), 2 * n + 1)?;
    let mut values = pair.plus().values().to_vec();
    values.extend((0..=n).rev().map(|k| pair.minus().at(k)));
    Trajectory::new(full_grid, values)
}

/// Fold a phase-space trajectory. Momenta on the returning leg flip sign:
/// `p₋_n = -p_{2N+3-n}`, the momentum on the mirrored interval.
pub fn roundtrip_split_hamiltonian(
    full: &PhaseTrajectory,
) -> Result<(PhaseTrajectory, PhaseTrajectory)> {
    let grid = folded_grid(full.grid())?;
    let n = grid.interior();
    let x_plus: Vec<f64> = (0..=n + 1).map(|k| full.x[k]).collect();
    let x_minus: Vec<f64> = (0..=n + 1).map(|k| full.x[2 * n + 2 - k]).collect();
    let p_plus: Vec<f64> = (1..=n + 1).map(|k| full.p_at(k)).collect();
    let p_minus: Vec<f64> = (1..=n + 1).map(|k| -full.p_at(2 * n + 3 - k)).collect();
    Ok((
        PhaseTrajectory::new(grid, x_plus, p_plus)?,
        PhaseTrajectory::new(grid, x_minus, p_minus)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn last_node_is_exact() {
        let g = TimeGrid::new(0.1, 0.7, 2).unwrap();
        assert_eq!(g.node(3), 0.7);
        assert_eq!(g.len(), 4);
        assert!((g.dt() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(1.0, 1.0, 3).is_err());
        assert!(TimeGrid::new(1.0, 0.0, 3).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn index_lookup() {
        let g = TimeGrid::new(-1.0, 1.0, 199).unwrap();
        assert_eq!(g.index_of(0.0), Some(100));
        assert_eq!(g.index_of(1.0), Some(200));
        assert_eq!(g.index_of(0.0031), None);
    }

    #[test]
    fn difference_ranges() {
        let g = TimeGrid::new(0.0, 1.0, 3).unwrap();
        let x = Trajectory::from_fn(g, |t| t * t);
        assert!(x.forward_diff(3).is_ok());
        assert!(x.forward_diff(4).is_err());
        assert!(x.backward_diff(0).is_err());
        assert!(x.backward_diff(4).is_ok());
    }

    #[test]
    fn differences_exact_on_linear() {
        let g = TimeGrid::new(0.0, 2.0, 9).unwrap();
        let x = Trajectory::from_fn(g, |t| 3.0 * t - 1.0);
        for n in 0..=g.interior() {
            assert!((x.forward_diff(n).unwrap() - 3.0).abs() < 1e-12);
            assert!((x.backward_diff(n + 1).unwrap() - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_requires_matching_endpoint() {
        let g = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let a = Trajectory::new(g, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let b = Trajectory::new(g, vec![0.0, 1.0, 2.0, 3.5]).unwrap();
        assert!(CtpTrajectory::closed(a.clone(), b.clone()).is_err());
        assert!(CtpTrajectory::open(a, b).is_ok());
    }

    #[test]
    fn split_example() {
        // 2N+3 = 7 nodes, N = 2.
        let g = TimeGrid::new(0.0, 6.0, 5).unwrap();
        let full = Trajectory::new(g, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let pair = roundtrip_split(&full).unwrap();
        assert_eq!(pair.plus().values(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(pair.minus().values(), &[6.0, 5.0, 4.0, 3.0]);
        assert!(pair.is_closed());
        assert_eq!(pair.grid().t_f(), 3.0);
    }

    #[test]
    fn split_rejects_even_interior() {
        let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
        assert!(roundtrip_split(&Trajectory::zeros(g)).is_err());
    }

    #[test]
    fn hamiltonian_split_flips_return_momenta() {
        let g = TimeGrid::new(0.0, 6.0, 5).unwrap();
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let p = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let full = PhaseTrajectory::new(g, x, p).unwrap();
        let (plus, minus) = roundtrip_split_hamiltonian(&full).unwrap();
        assert_eq!(plus.p(), &[1.0, 2.0, 3.0]);
        assert_eq!(minus.p(), &[-6.0, -5.0, -4.0]);
        assert_eq!(minus.x(), &[6.0, 5.0, 4.0, 3.0]);
    }

    proptest! {
        #[test]
        fn split_join_roundtrip(
            n in 1usize..40,
            t_i in -5.0f64..5.0,
            span in 0.1f64..10.0,
            seed in proptest::collection::vec(-10.0f64..10.0, 83),
        ) {
            let g = TimeGrid::new(t_i, t_i + span, 2 * n + 1).unwrap();
            let values: Vec<f64> = (0..g.len()).map(|k| seed[k % seed.len()] + k as f64).collect();
            let full = Trajectory::new(g, values).unwrap();
            let pair = roundtrip_split(&full).unwrap();
            let back = roundtrip_join(&pair).unwrap();
            prop_assert_eq!(back.values(), full.values());
            prop_assert!((back.grid().t_f() - full.grid().t_f()).abs() <= 1e-12 * span.max(1.0));
        }

        #[test]
        fn summation_by_parts(
            f in proptest::collection::vec(-3.0f64..3.0, 12),
            g in proptest::collection::vec(-3.0f64..3.0, 12),
        ) {
            let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
            let n = grid.interior();
            let ft = Trajectory::new(grid, f.clone()).unwrap();
            let gt = Trajectory::new(grid, g.clone()).unwrap();
            let lhs: f64 = (1..n).map(|k| ft.forward_diff(k).unwrap() * g[k]).sum();
            let rhs: f64 = -(1..n).map(|k| f[k] * gt.backward_diff(k).unwrap()).sum::<f64>()
                + (f[n] * g[n - 1] - f[1] * g[0]) / grid.dt();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }
    }
}
