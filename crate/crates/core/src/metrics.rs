//! Distances between ensembles, empirical measures and pseudo-inverse fields.

use num_integer::Integer;

use crate::assignment::{bottleneck_assignment, min_sum_assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::kernel::CommunicationKernel;
use crate::kinetic::PseudoInverseField;
use crate::model::{mean, Ensemble};
use crate::order::{pow_abs, Order};

/// Largest `N` accepted by [`wasserstein_phase`].
pub const DEFAULT_ASSIGNMENT_CAP: usize = 512;

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { left: a, right: b });
    }
    Ok(())
}

/// Center of mass and mean natural velocity of an initial state. Both are invariants of the
/// flow, so the center at time `t` is `x_c + omega_c t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComovingFrame {
    pub x_c: f64,
    pub omega_c: f64,
}

impl ComovingFrame {
    pub fn of<E: Ensemble>(initial: &E, kernel: &CommunicationKernel) -> Self {
        Self {
            x_c: mean(initial.positions()),
            omega_c: mean(&initial.natural_velocities(kernel)),
        }
    }

    pub fn center_at(&self, t: f64) -> f64 {
        self.x_c + self.omega_c * t
    }
}

/// Modulated distance between index-matched configurations at time `t`:
/// `((1/N) sum |(x_i - c_A(t)) - (y_i - c_B(t))|^p)^(1/p)`.
pub fn modulated_lp_distance<E: Ensemble>(
    a: &E,
    frame_a: &ComovingFrame,
    b: &E,
    frame_b: &ComovingFrame,
    p: Order,
    t: f64,
) -> Result<f64> {
    same_len(a.len(), b.len())?;
    let (ca, cb) = (frame_a.center_at(t), frame_b.center_at(t));
    let diff: Vec<f64> = a
        .positions()
        .iter()
        .zip(b.positions())
        .map(|(x, y)| (x - ca) - (y - cb))
        .collect();
    Ok(p.uniform_mean(&diff))
}

/// `((1/N) sum |(a_i - mean a) - (b_i - mean b)|^p)^(1/p)`.
pub fn centered_lp_mismatch(a: &[f64], b: &[f64], p: Order) -> Result<f64> {
    same_len(a.len(), b.len())?;
    let (ma, mb) = (mean(a), mean(b));
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) - (y - mb)).collect();
    Ok(p.uniform_mean(&diff))
}

/// The centered natural-velocity mismatch between two ensembles.
pub fn natural_velocity_mismatch(omega_a: &[f64], omega_b: &[f64], p: Order) -> Result<f64> {
    centered_lp_mismatch(omega_a, omega_b, p)
}

/// Weighted point masses on the line.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure1D {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure1D {
    /// Weights must be positive and sum to 1 within `1e-12`.
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        same_len(points.len(), weights.len())?;
        if points.is_empty() {
            return Err(Error::InvalidParameter(
                "measure needs at least one atom".into(),
            ));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "atom positions must be finite".into(),
            ));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { points, weights })
    }

    pub fn uniform(points: Vec<f64>) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        let weights = vec![w; points.len()];
        Self::new(points, weights)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Atoms sorted by position, ties by index.
    fn sorted(&self) -> Vec<(f64, f64)> {
        let mut idx: Vec<usize> = (0..self.points.len()).collect();
        idx.sort_by(|&a, &b| self.points[a].total_cmp(&self.points[b]).then(a.cmp(&b)));
        idx.into_iter()
            .map(|i| (self.points[i], self.weights[i]))
            .collect()
    }
}

/// Exact `W_p` on the line through the quantile functions on the common refinement of both
/// cumulative-weight partitions.
pub fn wasserstein_1d(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D, p: Order) -> f64 {
    const EPS: f64 = 1e-14;
    let (a, b) = (mu.sorted(), nu.sorted());
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut acc = 0.0f64;
    while i < a.len() && j < b.len() {
        let m = ra.min(rb);
        let gap = a[i].0 - b[j].0;
        match p {
            Order::Finite(p) => acc += m * pow_abs(gap, p),
            Order::Infinity => {
                if m > EPS {
                    acc = acc.max(gap.abs());
                }
            }
        }
        ra -= m;
        rb -= m;
        if ra <= EPS {
            i += 1;
            if i < a.len() {
                ra += a[i].1;
            }
        }
        if rb <= EPS {
            j += 1;
            if j < b.len() {
                rb += b[j].1;
            }
        }
    }
    match p {
        Order::Finite(p) => acc.max(0.0).powf(1.0 / p),
        Order::Infinity => acc,
    }
}

/// Uniformly weighted atoms in the `(x, v)` or `(x, omega)` plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoints {
    points: Vec<(f64, f64)>,
}

impl PhasePoints {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter(
                "phase measure needs at least one atom".into(),
            ));
        }
        if points
            .iter()
            .any(|(x, y)| !(x.is_finite() && y.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "phase points must be finite".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn from_columns(x: &[f64], y: &[f64]) -> Result<Self> {
        same_len(x.len(), y.len())?;
        Self::new(x.iter().copied().zip(y.iter().copied()).collect())
    }

    /// Atoms `(x_i, second_i)` of an ensemble.
    pub fn of<E: Ensemble>(e: &E) -> Self {
        Self::from_columns(e.positions(), e.second()).expect("ensembles are finite and nonempty")
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The same measure with every atom repeated `k` times.
    fn replicated(&self, k: usize) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .flat_map(|&z| std::iter::repeat_n(z, k))
            .collect()
    }
}

fn euclid(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn assignment_distance(a: &[(f64, f64)], b: &[(f64, f64)], p: Order) -> f64 {
    let n = a.len();
    match p {
        Order::Finite(p) => {
            let cost = CostMatrix::from_fn(n, |i, j| pow_abs(euclid(a[i], b[j]), p));
            let (total, _) = min_sum_assignment(&cost);
            (total / n as f64).max(0.0).powf(1.0 / p)
        }
        Order::Infinity => {
            bottleneck_assignment(&CostMatrix::from_fn(n, |i, j| euclid(a[i], b[j])))
        }
    }
}

/// Exact phase-space `W_p` between two uniform empirical measures of equal size, capped at
/// [`DEFAULT_ASSIGNMENT_CAP`] atoms.
pub fn wasserstein_phase(a: &PhasePoints, b: &PhasePoints, p: Order) -> Result<f64> {
    wasserstein_phase_capped(a, b, p, DEFAULT_ASSIGNMENT_CAP)
}

pub fn wasserstein_phase_capped(
    a: &PhasePoints,
    b: &PhasePoints,
    p: Order,
    cap: usize,
) -> Result<f64> {
    same_len(a.len(), b.len())?;
    if a.len() > cap {
        return Err(Error::SizeCapExceeded { n: a.len(), cap });
    }
    Ok(assignment_distance(&a.points, &b.points, p))
}

/// Phase-space `W_p` between uniform measures of different sizes: both are refined to
/// `lcm(N, N')` equal atoms, which leaves the measures unchanged. The refined size is capped.
pub fn wasserstein_phase_unequal(
    a: &PhasePoints,
    b: &PhasePoints,
    p: Order,
    cap: usize,
) -> Result<f64> {
    let l = a.len().lcm(&b.len());
    if l > cap {
        return Err(Error::SizeCapExceeded { n: l, cap });
    }
    let ra = a.replicated(l / a.len());
    let rb = b.replicated(l / b.len());
    Ok(assignment_distance(&ra, &rb, p))
}

/// Fiberwise distance
/// `(sum_m sum_k (w_m / n_m) |chi_F[m][k] - chi_G[m][k]|^p)^(1/p)` (nested max for `p = inf`).
pub fn modified_wasserstein(
    f: &PseudoInverseField,
    g: &PseudoInverseField,
    p: Order,
) -> Result<f64> {
    f.check_same_grid(g)?;
    let terms = f
        .levels()
        .zip(g.levels())
        .map(|(a, b)| (a.mass, a.chi - b.chi));
    Ok(p.weighted_mean(terms))
}
