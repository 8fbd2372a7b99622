//! Mass-level discretization of the pseudo-inverse formulation of the kinetic equation.
//!
//! For each natural-velocity node `omega_m` (mass `w_m`) the conditional distribution in `x`
//! is carried by `n_m` equal-mass levels `chi[m][k]`, nondecreasing in `k`. Each level is a
//! weighted particle moving with the drift
//! `omega_m + sum_{m*,k*} mass(m*,k*) Psi(chi[m*][k*] - chi[m][k])`,
//! which equals `omega - (Psi * rho)(chi)` by oddness of `Psi`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::CommunicationKernel;
use crate::metrics::{DiscreteMeasure1D, PhasePoints};
use crate::model::{weighted_interaction_into, Ensemble, FirstOrderEnsemble, Weights};
use crate::ode::{self, AdaptiveOptions};
use crate::sim::{IntegratorSpec, Scheme};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoInverseField {
    omega_nodes: Vec<f64>,
    omega_weights: Vec<f64>,
    eta_counts: Vec<usize>,
    chi: Vec<Vec<f64>>,
}

/// One mass level of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub node: usize,
    pub level: usize,
    pub omega: f64,
    pub mass: f64,
    pub chi: f64,
}

/// Natural-velocity marginal `h`.
pub enum OmegaSpec<'a> {
    /// Density on `[lo, hi]`, sampled at `M` midpoints.
    Density {
        lo: f64,
        hi: f64,
        density: &'a dyn Fn(f64) -> f64,
    },
    /// Explicit nodes with nonnegative masses (`M` is their count).
    Atoms { nodes: Vec<f64>, weights: Vec<f64> },
}

/// Conditional law of `x` given `omega`.
pub enum PositionProfile<'a> {
    /// Quantile function `(omega, u) -> x`, nondecreasing in `u`.
    Quantile(&'a dyn Fn(f64, f64) -> f64),
    /// One sample set per node.
    Samples(Vec<Vec<f64>>),
}

fn slice_violation(chi: &[f64]) -> Option<(usize, f64)> {
    chi.windows(2)
        .enumerate()
        .map(|(k, w)| (k, w[0] - w[1]))
        .filter(|&(_, overlap)| overlap > 0.0)
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

impl PseudoInverseField {
    pub fn new(omega_nodes: Vec<f64>, omega_weights: Vec<f64>, chi: Vec<Vec<f64>>) -> Result<Self> {
        let m = omega_nodes.len();
        if m == 0 {
            return Err(Error::DegenerateSupport);
        }
        for len in [omega_weights.len(), chi.len()] {
            if len != m {
                return Err(Error::DimensionMismatch {
                    left: m,
                    right: len,
                });
            }
        }
        if omega_weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter(
                "omega weights must be positive".into(),
            ));
        }
        let sum: f64 = omega_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized { sum });
        }
        if omega_nodes
            .iter()
            .chain(chi.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidParameter(
                "field entries must be finite".into(),
            ));
        }
        for (node, slice) in chi.iter().enumerate() {
            if slice.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "node {node} has no levels"
                )));
            }
            if let Some((level, overlap)) = slice_violation(slice) {
                return Err(Error::MonotonicityViolation {
                    node,
                    level,
                    time: 0.0,
                    overlap,
                });
            }
        }
        let eta_counts = chi.iter().map(Vec::len).collect();
        Ok(Self {
            omega_nodes,
            omega_weights,
            eta_counts,
            chi,
        })
    }

    /// One node per particle, one level per node, masses `1/N`.
    pub fn from_ensemble(e: &FirstOrderEnsemble) -> Self {
        let n = e.len();
        let w = 1.0 / n as f64;
        Self {
            omega_nodes: e.natural_velocities().to_vec(),
            omega_weights: vec![w; n],
            eta_counts: vec![1; n],
            chi: e.positions().iter().map(|&x| vec![x]).collect(),
        }
    }

    pub fn omega_nodes(&self) -> &[f64] {
        &self.omega_nodes
    }

    pub fn omega_weights(&self) -> &[f64] {
        &self.omega_weights
    }

    pub fn eta_counts(&self) -> &[usize] {
        &self.eta_counts
    }

    pub fn chi(&self) -> &[Vec<f64>] {
        &self.chi
    }

    pub fn total_levels(&self) -> usize {
        self.eta_counts.iter().sum()
    }

    pub fn mass(&self, node: usize) -> f64 {
        self.omega_weights[node] / self.eta_counts[node] as f64
    }

    /// Levels in node-major order.
    pub fn levels(&self) -> impl Iterator<Item = Level> + '_ {
        self.chi.iter().enumerate().flat_map(move |(node, slice)| {
            let omega = self.omega_nodes[node];
            let mass = self.mass(node);
            slice.iter().enumerate().map(move |(level, &chi)| Level {
                node,
                level,
                omega,
                mass,
                chi,
            })
        })
    }

    /// Second marginals must agree bitwise.
    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.omega_nodes != other.omega_nodes {
            return Err(Error::GridMismatch("omega nodes differ".into()));
        }
        if self.omega_weights != other.omega_weights {
            return Err(Error::GridMismatch("omega weights differ".into()));
        }
        if self.eta_counts != other.eta_counts {
            return Err(Error::GridMismatch("level counts differ".into()));
        }
        Ok(())
    }

    /// Same grid, every level moved by `shift`.
    pub fn translated(&self, shift: f64) -> Self {
        let mut out = self.clone();
        out.chi.iter_mut().flatten().for_each(|c| *c += shift);
        out
    }

    fn flat_chi(&self) -> Vec<f64> {
        self.chi.iter().flatten().copied().collect()
    }

    fn level_masses(&self) -> Vec<f64> {
        self.levels().map(|l| l.mass).collect()
    }

    fn level_omegas(&self) -> Vec<f64> {
        self.levels().map(|l| l.omega).collect()
    }

    fn with_flat_chi(&self, flat: &[f64]) -> Self {
        let mut out = self.clone();
        let mut it = flat.iter();
        for slice in &mut out.chi {
            for c in slice.iter_mut() {
                *c = *it.next().expect("flat length matches level count");
            }
        }
        out
    }

    /// Mass-weighted mean of the levels.
    pub fn mean_position(&self) -> f64 {
        self.levels().map(|l| l.mass * l.chi).sum()
    }

    /// Diameter of the x-support.
    pub fn position_diameter(&self) -> f64 {
        crate::model::diameter(&self.flat_chi())
    }

    /// Diameter of the omega-support.
    pub fn omega_diameter(&self) -> f64 {
        crate::model::diameter(&self.omega_nodes)
    }
}

/// Builds `M` nodes and `n_eta` equal-mass levels per node; level `k` sits at the conditional
/// quantile of mass `(k + 1/2) / n_eta`. Nodes carrying zero mass are dropped.
pub fn discretize_initial(
    h: OmegaSpec<'_>,
    x: PositionProfile<'_>,
    m: usize,
    n_eta: usize,
) -> Result<PseudoInverseField> {
    if n_eta == 0 {
        return Err(Error::InvalidParameter("n_eta must be positive".into()));
    }
    let (nodes, raw) = match h {
        OmegaSpec::Density { lo, hi, density } => {
            if m == 0 || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::BadRange(format!(
                    "omega interval [{lo}, {hi}] with M = {m}"
                )));
            }
            let dw = (hi - lo) / m as f64;
            let nodes: Vec<f64> = (0..m).map(|i| lo + (i as f64 + 0.5) * dw).collect();
            let raw = nodes
                .iter()
                .map(|&w| density(w).max(0.0) * dw.max(f64::MIN_POSITIVE))
                .collect();
            (nodes, raw)
        }
        OmegaSpec::Atoms { nodes, weights } => {
            if nodes.len() != weights.len() {
                return Err(Error::DimensionMismatch {
                    left: nodes.len(),
                    right: weights.len(),
                });
            }
            (nodes, weights)
        }
    };
    let samples = match &x {
        PositionProfile::Samples(s) if s.len() != nodes.len() => {
            return Err(Error::DimensionMismatch {
                left: nodes.len(),
                right: s.len(),
            })
        }
        PositionProfile::Samples(s) => Some(s),
        PositionProfile::Quantile(_) => None,
    };
    let total: f64 = raw.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DegenerateSupport);
    }
    let mut omega_nodes = Vec::new();
    let mut omega_weights = Vec::new();
    let mut chi = Vec::new();
    for (i, (&w, &r)) in nodes.iter().zip(&raw).enumerate() {
        if r <= 0.0 {
            continue;
        }
        let u = |k: usize| (k as f64 + 0.5) / n_eta as f64;
        let slice: Vec<f64> = match (&x, samples) {
            (PositionProfile::Quantile(q), _) => (0..n_eta).map(|k| q(w, u(k))).collect(),
            (_, Some(s)) => {
                let mut sorted = s[i].clone();
                if sorted.is_empty() {
                    return Err(Error::InvalidParameter(format!("node {i} has no samples")));
                }
                sorted.sort_by(f64::total_cmp);
                let len = sorted.len();
                (0..n_eta)
                    .map(|k| sorted[((u(k) * len as f64) as usize).min(len - 1)])
                    .collect()
            }
            _ => unreachable!(),
        };
        omega_nodes.push(w);
        omega_weights.push(r / total);
        chi.push(slice);
    }
    // absorb rounding so the weights sum to 1 within the field tolerance
    let drift: f64 = 1.0 - omega_weights.iter().sum::<f64>();
    let heaviest = (0..omega_weights.len())
        .max_by(|&a, &b| omega_weights[a].total_cmp(&omega_weights[b]))
        .expect("at least one node has mass");
    omega_weights[heaviest] += drift;
    PseudoInverseField::new(omega_nodes, omega_weights, chi)
}

fn rhs_flat(
    kernel: &CommunicationKernel,
    chi: &[f64],
    masses: &[f64],
    omegas: &[f64],
    out: &mut [f64],
) {
    weighted_interaction_into(kernel, chi, Weights::Given(masses), out);
    for (o, w) in out.iter_mut().zip(omegas) {
        *o += w;
    }
    for i in 1..chi.len() {
        if chi[i] == chi[i - 1] && omegas[i] == omegas[i - 1] {
            out[i] = out[i - 1];
        }
    }
}

/// Collapses runs of adjacent levels onto their mass-weighted mean. Neighbours join a run when
/// they are within `tol` or would close their gap within one more step `h` at the current drift.
fn merge_touching(chi: &mut [f64], drift: &[f64], masses: &[f64], h: f64, tol: f64) {
    let mut start = 0;
    for end in 1..=chi.len() {
        if end < chi.len() {
            let gap = chi[end] - chi[end - 1];
            if gap <= tol.max(h * (drift[end - 1] - drift[end])) {
                continue;
            }
        }
        if end - start > 1 && chi[start..end].windows(2).any(|w| w[0] != w[1]) {
            let mass: f64 = masses[start..end].iter().sum();
            let mean = chi[start..end]
                .iter()
                .zip(&masses[start..end])
                .map(|(c, m)| c * m)
                .sum::<f64>()
                / mass;
            chi[start..end].fill(mean);
        }
        start = end;
    }
}

/// `d chi[m][k] / dt`.
pub fn pseudoinverse_rhs(
    field: &PseudoInverseField,
    kernel: &CommunicationKernel,
) -> Vec<Vec<f64>> {
    let chi = field.flat_chi();
    let mut out = vec![0.0; chi.len()];
    rhs_flat(
        kernel,
        &chi,
        &field.level_masses(),
        &field.level_omegas(),
        &mut out,
    );
    field.with_flat_chi(&out).chi
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub time: f64,
    /// `1/2 sum mass |drift|^2`.
    pub kinetic_energy_e: f64,
    /// `1/2 sum sum mass mass psi(chi - chi*) |drift - drift*|^2`; `+inf` if two levels share a
    /// position but not a drift.
    pub dissipation_d: f64,
    /// `1/2 sum sum mass mass K(chi - chi*) - sum mass omega chi`.
    pub free_energy_f: f64,
}

fn energy_flat(
    kernel: &CommunicationKernel,
    chi: &[f64],
    masses: &[f64],
    omegas: &[f64],
    time: f64,
) -> EnergyReport {
    let n = chi.len();
    let mut drift = vec![0.0; n];
    rhs_flat(kernel, chi, masses, omegas, &mut drift);
    let e = 0.5
        * masses
            .iter()
            .zip(&drift)
            .map(|(m, v)| m * v * v)
            .sum::<f64>();
    let (mut d, mut k) = (0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let mm = masses[i] * masses[j];
            let gap = chi[j] - chi[i];
            let dv = drift[j] - drift[i];
            if gap != 0.0 {
                d += mm * kernel.psi(gap) * dv * dv;
            } else if dv != 0.0 {
                d = f64::INFINITY;
            }
            k += mm * kernel.potential(gap);
        }
    }
    let linear: f64 = (0..n).map(|i| masses[i] * omegas[i] * chi[i]).sum();
    EnergyReport {
        time,
        kinetic_energy_e: e,
        dissipation_d: d,
        free_energy_f: k - linear,
    }
}

pub fn energy_report(
    field: &PseudoInverseField,
    kernel: &CommunicationKernel,
    time: f64,
) -> EnergyReport {
    energy_flat(
        kernel,
        &field.flat_chi(),
        &field.level_masses(),
        &field.level_omegas(),
        time,
    )
}

/// x-marginal: one atom per level.
pub fn reconstruct_density(field: &PseudoInverseField) -> DiscreteMeasure1D {
    DiscreteMeasure1D::new(field.flat_chi(), field.level_masses())
        .expect("field weights are validated at construction")
}

/// Image of the levels under `(x, omega) -> (x, omega - (Psi * rho)(x))`, as
/// `(x, v, mass)` triples in node-major order.
pub fn gamma_pushforward_field(
    field: &PseudoInverseField,
    kernel: &CommunicationKernel,
) -> Vec<(f64, f64, f64)> {
    let chi = field.flat_chi();
    let masses = field.level_masses();
    let mut v = vec![0.0; chi.len()];
    rhs_flat(kernel, &chi, &masses, &field.level_omegas(), &mut v);
    chi.into_iter()
        .zip(v)
        .zip(masses)
        .map(|((x, v), m)| (x, v, m))
        .collect()
}

/// Empirical version: atoms `(x_i, v_i)` with `v_i = omega_i + (1/N) sum_j Psi(x_j - x_i)`.
pub fn gamma_pushforward(e: &FirstOrderEnsemble, kernel: &CommunicationKernel) -> PhasePoints {
    PhasePoints::from_columns(e.positions(), &e.velocities(kernel))
        .expect("ensembles are finite and nonempty")
}

#[derive(Debug, Clone)]
pub struct KineticSnapshot {
    pub time: f64,
    pub field: PseudoInverseField,
    pub energy: EnergyReport,
}

/// Method-of-lines evolution of every level on the grid `spec.record_times(record_every)`.
///
/// Slice ordering is checked on every step. A step that would overlap two levels by more than
/// `1e-10` times the initial x-scale is retried in halves, and running out of halvings raises
/// [`Error::MonotonicityViolation`]. Levels of one slice that meet are merged for good.
pub fn evolve_kinetic(
    field: &PseudoInverseField,
    kernel: &CommunicationKernel,
    spec: &IntegratorSpec,
    record_every: usize,
) -> Result<Vec<KineticSnapshot>> {
    evolve_kinetic_at(field, kernel, spec, &spec.record_times(record_every))
}

pub fn evolve_kinetic_at(
    field: &PseudoInverseField,
    kernel: &CommunicationKernel,
    spec: &IntegratorSpec,
    times: &[f64],
) -> Result<Vec<KineticSnapshot>> {
    spec.validate()?;
    let chi0 = field.flat_chi();
    let masses = field.level_masses();
    let omegas = field.level_omegas();
    let scale = chi0.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let tol = 1e-10 * scale;
    let mut offsets = Vec::with_capacity(field.eta_counts.len() + 1);
    offsets.push(0);
    for c in &field.eta_counts {
        offsets.push(offsets.last().unwrap() + c);
    }
    let slices: Vec<std::ops::Range<usize>> = offsets.windows(2).map(|w| w[0]..w[1]).collect();
    let worst_overlap = |y: &[f64]| -> Option<(usize, usize, f64)> {
        slices
            .iter()
            .enumerate()
            .filter_map(|(node, r)| slice_violation(&y[r.clone()]).map(|(k, o)| (node, k, o)))
            .max_by(|a, b| a.2.total_cmp(&b.2))
    };
    let mut rejected: Option<(usize, usize, f64)> = None;
    let admissible = |_: &[f64], y_new: &[f64]| match worst_overlap(y_new) {
        Some(v) if v.2 > tol => {
            rejected = Some(v);
            false
        }
        _ => true,
    };
    // levels of one slice that meet stay together, as the exact flow would keep them
    let mut last_t = times.first().copied().unwrap_or(0.0);
    let mut drift = vec![0.0; chi0.len()];
    let merge = |t: f64, y: &mut [f64]| -> Result<()> {
        let h = t - last_t;
        last_t = t;
        rhs_flat(kernel, y, &masses, &omegas, &mut drift);
        for r in &slices {
            merge_touching(
                &mut y[r.clone()],
                &drift[r.clone()],
                &masses[r.clone()],
                h,
                tol,
            );
        }
        Ok(())
    };
    let sys = |y: &[f64], dy: &mut [f64]| -> Result<()> {
        rhs_flat(kernel, y, &masses, &omegas, dy);
        Ok(())
    };
    let run = match spec.scheme {
        Scheme::Rk4Fixed => ode::rk4_guarded(
            &sys,
            &chi0,
            times,
            spec.dt,
            spec.max_step_halvings,
            admissible,
            merge,
        )?,
        Scheme::Rk45Adaptive => {
            let opts = AdaptiveOptions {
                h0: spec.dt,
                abs_tol: spec.abs_tol,
                rel_tol: spec.rel_tol,
                max_halvings: spec.max_step_halvings,
            };
            ode::dopri_sampled(&sys, &chi0, times, &opts, admissible, |_, _| {}, merge)?
        }
    };
    if let Some((time, _)) = run.stopped {
        let (node, level, overlap) = rejected.unwrap_or((0, 0, f64::NAN));
        return Err(Error::MonotonicityViolation {
            node,
            level,
            time,
            overlap,
        });
    }
    let states = run.states;
    Ok(states
        .into_iter()
        .zip(times)
        .map(|(y, &t)| {
            let energy = energy_flat(kernel, &y, &masses, &omegas, t);
            let f = field.with_flat_chi(&y);
            KineticSnapshot {
                time: t,
                field: f,
                energy,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::wasserstein_1d;
    use crate::model::first_order_rhs;
    use crate::order::Order;
    use approx::assert_relative_eq;

    fn k() -> CommunicationKernel {
        CommunicationKernel::new(0.5).unwrap()
    }

    fn single(chi: Vec<f64>, omega: f64) -> PseudoInverseField {
        PseudoInverseField::new(vec![omega], vec![1.0], vec![chi]).unwrap()
    }

    #[test]
    fn construction_examples() {
        let f = discretize_initial(
            OmegaSpec::Atoms {
                nodes: vec![0.0],
                weights: vec![1.0],
            },
            PositionProfile::Quantile(&|_, u| u),
            1,
            2,
        )
        .unwrap();
        assert_eq!(f.chi(), &[vec![0.25, 0.75]]);

        let uniform = |_: f64| 1.0;
        let f = discretize_initial(
            OmegaSpec::Density {
                lo: -1.0,
                hi: 1.0,
                density: &uniform,
            },
            PositionProfile::Quantile(&|_, u| u),
            2,
            3,
        )
        .unwrap();
        assert_eq!(f.omega_weights(), &[0.5, 0.5]);
        assert_eq!(f.omega_nodes(), &[-0.5, 0.5]);

        let zero = |_: f64| 0.0;
        let r = discretize_initial(
            OmegaSpec::Density {
                lo: 0.0,
                hi: 1.0,
                density: &zero,
            },
            PositionProfile::Quantile(&|_, u| u),
            4,
            2,
        );
        assert!(matches!(r, Err(Error::DegenerateSupport)));
    }

    #[test]
    fn empirical_samples_are_reproduced() {
        let samples = vec![vec![0.3, -0.1, 0.2], vec![2.0, 1.0, 1.5]];
        let f = discretize_initial(
            OmegaSpec::Atoms {
                nodes: vec![-1.0, 1.0],
                weights: vec![1.0, 1.0],
            },
            PositionProfile::Samples(samples),
            2,
            3,
        )
        .unwrap();
        assert_eq!(f.chi(), &[vec![-0.1, 0.2, 0.3], vec![1.0, 1.5, 2.0]]);
        let rho = reconstruct_density(&f);
        let direct = DiscreteMeasure1D::uniform(vec![-0.1, 0.2, 0.3, 1.0, 1.5, 2.0]).unwrap();
        for p in [Order::ONE, Order::INF] {
            assert!(wasserstein_1d(&rho, &direct, p) < 1e-15);
        }
    }

    #[test]
    fn meeting_levels_merge_and_stay_merged() {
        let f = single(vec![-0.01, 0.01], 0.0);
        let out = evolve_kinetic(&f, &k(), &IntegratorSpec::rk4(1e-2, 1.0), 10).unwrap();
        let last = &out.last().unwrap().field.chi()[0];
        assert_eq!(last[0], last[1]);
        assert!(last[0].abs() < 1e-15);
        assert_eq!(out.last().unwrap().energy.dissipation_d, 0.0);
    }

    #[test]
    fn unsorted_slices_are_rejected() {
        let r = PseudoInverseField::new(vec![0.0], vec![1.0], vec![vec![1.0, 0.0]]);
        assert!(matches!(r, Err(Error::MonotonicityViolation { .. })));
    }

    #[test]
    fn rhs_examples() {
        let kk = k();
        assert_eq!(
            pseudoinverse_rhs(&single(vec![0.4], 0.0), &kk),
            vec![vec![0.0]]
        );
        let d = pseudoinverse_rhs(&single(vec![-1.0, 1.0], 0.0), &kk);
        let half = kk.psi_antideriv(2.0) / 2.0;
        assert_eq!(d, vec![vec![half, -half]]);

        let e =
            FirstOrderEnsemble::new(vec![0.1, -0.7, 1.3, 0.4], vec![0.5, 0.0, -1.0, 2.0]).unwrap();
        let flat: Vec<f64> = pseudoinverse_rhs(&PseudoInverseField::from_ensemble(&e), &kk)
            .into_iter()
            .flatten()
            .collect();
        assert_eq!(flat, first_order_rhs(&e, &kk));
    }

    #[test]
    fn density_examples() {
        let rho = reconstruct_density(&single(vec![0.0], 3.0));
        assert_eq!((rho.points(), rho.weights()), (&[0.0][..], &[1.0][..]));
        let f =
            PseudoInverseField::new(vec![0.0, 1.0], vec![0.25, 0.75], vec![vec![0.0], vec![1.0]])
                .unwrap();
        let rho = reconstruct_density(&f);
        assert_eq!(rho.points(), &[0.0, 1.0]);
        assert_eq!(rho.weights(), &[0.25, 0.75]);
    }

    #[test]
    fn energy_examples() {
        let kk = k();
        let r = energy_report(&single(vec![0.0], 0.0), &kk, 0.0);
        assert_eq!(
            (r.kinetic_energy_e, r.dissipation_d, r.free_energy_f),
            (0.0, 0.0, 0.0)
        );

        let r = energy_report(&single(vec![-1.0, 1.0], 0.0), &kk, 0.0);
        // 1/2 * 2 * (1/2)(1/2) K(2), K(2) = 2^1.5 / 0.75
        let expect = 2f64.powf(1.5) / 0.75 / 4.0;
        assert_relative_eq!(r.free_energy_f, expect, max_relative = 1e-14);
        assert!(r.dissipation_d >= 0.0);
    }

    #[test]
    fn gamma_examples() {
        let kk = k();
        let one = FirstOrderEnsemble::new(vec![2.0], vec![-0.3]).unwrap();
        assert_eq!(gamma_pushforward(&one, &kk).points(), &[(2.0, -0.3)]);
        let two = FirstOrderEnsemble::new(vec![0.0, 4.0], vec![-1.0, 3.0]).unwrap();
        assert_eq!(
            gamma_pushforward(&two, &kk).points(),
            &[(0.0, 1.0), (4.0, 1.0)]
        );
        let f = PseudoInverseField::from_ensemble(&two);
        let g = gamma_pushforward_field(&f, &kk);
        assert_eq!(g, vec![(0.0, 1.0, 0.5), (4.0, 1.0, 0.5)]);
    }

    #[test]
    fn stationary_and_antisymmetric_evolution() {
        let kk = k();
        let still = single(vec![0.5; 4], 0.0);
        let out = evolve_kinetic(&still, &kk, &IntegratorSpec::rk4(1e-2, 2.0), 50).unwrap();
        assert!(out.iter().all(|s| s.field == still));

        let f = PseudoInverseField::new(
            vec![-1.0, 1.0],
            vec![0.5, 0.5],
            vec![vec![-0.3, -0.1], vec![0.1, 0.3]],
        )
        .unwrap();
        let out = evolve_kinetic(&f, &kk, &IntegratorSpec::rk4(1e-2, 60.0), 500).unwrap();
        for s in &out {
            let c = s.field.chi();
            assert!((c[0][0] + c[1][1]).abs() < 1e-12);
            assert!((c[0][1] + c[1][0]).abs() < 1e-12);
        }

        let pair =
            PseudoInverseField::new(vec![-1.0, 1.0], vec![0.5, 0.5], vec![vec![-0.2], vec![0.2]])
                .unwrap();
        let out = evolve_kinetic(&pair, &kk, &IntegratorSpec::rk4(1e-2, 60.0), 500).unwrap();
        let last = out.last().unwrap().field.chi();
        assert!((last[0][0] + last[1][0]).abs() < 1e-12);
        assert_relative_eq!(last[1][0] - last[0][0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn grid_mismatch_detected() {
        let a = single(vec![0.0, 1.0], 0.0);
        let b = single(vec![0.0, 1.0], 0.5);
        assert!(matches!(a.check_same_grid(&b), Err(Error::GridMismatch(_))));
        assert!(a.check_same_grid(&a.translated(2.0)).is_ok());
    }
}
