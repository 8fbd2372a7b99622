//! Particle states and the right-hand sides of the second-order (alignment) system and its
//! exact first-order reformulation.
//!
//! Along the second-order flow the natural velocities
//! `omega_i = v_i - (1/N) sum_j Psi(x_j - x_i)` are conserved, so the positions alone obey
//! `dx_i/dt = omega_i + (1/N) sum_j Psi(x_j - x_i)`. The transforms below move between the two
//! descriptions at a fixed configuration.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::CommunicationKernel;
use crate::order::Order;

fn check_columns(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::InvalidParameter(
            "ensemble needs at least one particle".into(),
        ));
    }
    if let Some(i) = a.iter().chain(b).position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("entry {i} is not finite")));
    }
    Ok(())
}

/// Common view over both particle descriptions: positions plus one velocity-like column.
pub trait Ensemble: Clone + Sized {
    /// CSV column name of the second coordinate.
    const SECOND_COLUMN: &'static str;

    fn from_columns(positions: Vec<f64>, second: Vec<f64>) -> Result<Self>;
    fn positions(&self) -> &[f64];
    fn second(&self) -> &[f64];

    /// Physical velocities `v_i`.
    fn velocities(&self, kernel: &CommunicationKernel) -> Vec<f64>;
    /// Natural velocities `omega_i`.
    fn natural_velocities(&self, kernel: &CommunicationKernel) -> Vec<f64>;

    fn len(&self) -> usize {
        self.positions().len()
    }

    fn is_empty(&self) -> bool {
        self.positions().is_empty()
    }
}

/// State `(x, v)` of the alignment system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondOrderEnsemble {
    positions: Vec<f64>,
    velocities: Vec<f64>,
}

impl SecondOrderEnsemble {
    pub fn new(positions: Vec<f64>, velocities: Vec<f64>) -> Result<Self> {
        check_columns(&positions, &velocities)?;
        Ok(Self {
            positions,
            velocities,
        })
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// The equivalent first-order state at the same positions.
    pub fn to_first_order(&self, kernel: &CommunicationKernel) -> FirstOrderEnsemble {
        FirstOrderEnsemble {
            natural_velocities: natural_velocities(&self.positions, &self.velocities, kernel),
            positions: self.positions.clone(),
        }
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.positions, self.velocities)
    }
}

/// State `(x, omega)` of the first-order reformulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstOrderEnsemble {
    positions: Vec<f64>,
    natural_velocities: Vec<f64>,
}

impl FirstOrderEnsemble {
    pub fn new(positions: Vec<f64>, natural_velocities: Vec<f64>) -> Result<Self> {
        check_columns(&positions, &natural_velocities)?;
        Ok(Self {
            positions,
            natural_velocities,
        })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn natural_velocities(&self) -> &[f64] {
        &self.natural_velocities
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Same natural velocities, new positions.
    pub fn with_positions(&self, positions: Vec<f64>) -> Result<Self> {
        Self::new(positions, self.natural_velocities.clone())
    }

    pub fn to_second_order(&self, kernel: &CommunicationKernel) -> SecondOrderEnsemble {
        SecondOrderEnsemble {
            velocities: velocities_from_natural(&self.positions, &self.natural_velocities, kernel),
            positions: self.positions.clone(),
        }
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.positions, self.natural_velocities)
    }
}

impl Ensemble for SecondOrderEnsemble {
    const SECOND_COLUMN: &'static str = "v";

    fn from_columns(positions: Vec<f64>, second: Vec<f64>) -> Result<Self> {
        Self::new(positions, second)
    }
    fn positions(&self) -> &[f64] {
        &self.positions
    }
    fn second(&self) -> &[f64] {
        &self.velocities
    }
    fn velocities(&self, _: &CommunicationKernel) -> Vec<f64> {
        self.velocities.clone()
    }
    fn natural_velocities(&self, kernel: &CommunicationKernel) -> Vec<f64> {
        natural_velocities(&self.positions, &self.velocities, kernel)
    }
}

impl Ensemble for FirstOrderEnsemble {
    const SECOND_COLUMN: &'static str = "omega";

    fn from_columns(positions: Vec<f64>, second: Vec<f64>) -> Result<Self> {
        Self::new(positions, second)
    }
    fn positions(&self) -> &[f64] {
        &self.positions
    }
    fn second(&self) -> &[f64] {
        &self.natural_velocities
    }
    fn velocities(&self, kernel: &CommunicationKernel) -> Vec<f64> {
        velocities_from_natural(&self.positions, &self.natural_velocities, kernel)
    }
    fn natural_velocities(&self, _: &CommunicationKernel) -> Vec<f64> {
        self.natural_velocities.clone()
    }
}

/// `out_i = sum_j m_j Psi(x_j - x_i)` with `m_j = weights[j]`.
///
/// Each unordered pair is evaluated once; every output accumulates its terms in ascending
/// partner index, so the reduction order is fixed.
pub(crate) fn weighted_interaction_into(
    kernel: &CommunicationKernel,
    positions: &[f64],
    weights: Weights<'_>,
    out: &mut [f64],
) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let n = positions.len();
    for i in 0..n {
        let xi = positions[i];
        let mi = weights.get(i);
        let mut acc = out[i];
        for j in (i + 1)..n {
            let f = kernel.psi_antideriv(positions[j] - xi);
            acc += weights.get(j) * f;
            out[j] -= mi * f;
        }
        out[i] = acc;
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Weights<'a> {
    Uniform(f64),
    Given(&'a [f64]),
}

impl Weights<'_> {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        match self {
            Weights::Uniform(m) => *m,
            Weights::Given(w) => w[i],
        }
    }
}

fn uniform(n: usize) -> Weights<'static> {
    Weights::Uniform(1.0 / n as f64)
}

/// `(1/N) sum_j Psi(x_j - x_i)` for every `i`.
pub fn mean_interaction(positions: &[f64], kernel: &CommunicationKernel) -> Vec<f64> {
    let mut out = vec![0.0; positions.len()];
    weighted_interaction_into(kernel, positions, uniform(positions.len()), &mut out);
    out
}

pub(crate) fn second_order_rhs_into(
    positions: &[f64],
    velocities: &[f64],
    kernel: &CommunicationKernel,
    dv: &mut [f64],
) -> Result<()> {
    let n = positions.len();
    let inv_n = 1.0 / n as f64;
    dv.iter_mut().for_each(|o| *o = 0.0);
    for i in 0..n {
        let (xi, vi) = (positions[i], velocities[i]);
        let mut acc = dv[i];
        for j in (i + 1)..n {
            let gap = positions[j] - xi;
            if gap == 0.0 {
                return Err(Error::Collision { i, j, gap });
            }
            let f = kernel.psi(gap) * (velocities[j] - vi) * inv_n;
            acc += f;
            dv[j] -= f;
        }
        dv[i] = acc;
    }
    Ok(())
}

/// Right-hand side of the alignment system: `(dx, dv)`.
///
/// The self term `psi(0) (v_i - v_i)` is taken as 0. Any other pair at zero distance is a
/// collision.
pub fn second_order_rhs(
    state: &SecondOrderEnsemble,
    kernel: &CommunicationKernel,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut dv = vec![0.0; state.len()];
    second_order_rhs_into(&state.positions, &state.velocities, kernel, &mut dv)?;
    Ok((state.velocities.clone(), dv))
}

pub(crate) fn first_order_rhs_into(
    positions: &[f64],
    natural_velocities: &[f64],
    kernel: &CommunicationKernel,
    out: &mut [f64],
) {
    weighted_interaction_into(kernel, positions, uniform(positions.len()), out);
    for (o, w) in out.iter_mut().zip(natural_velocities) {
        *o += w;
    }
}

/// `dx_i/dt = omega_i + (1/N) sum_j Psi(x_j - x_i)`.
pub fn first_order_rhs(state: &FirstOrderEnsemble, kernel: &CommunicationKernel) -> Vec<f64> {
    let mut out = vec![0.0; state.len()];
    first_order_rhs_into(
        &state.positions,
        &state.natural_velocities,
        kernel,
        &mut out,
    );
    out
}

/// `omega_i = v_i - (1/N) sum_j Psi(x_j - x_i)`.
pub fn natural_velocities(
    positions: &[f64],
    velocities: &[f64],
    kernel: &CommunicationKernel,
) -> Vec<f64> {
    assert_eq!(positions.len(), velocities.len(), "column lengths differ");
    let s = mean_interaction(positions, kernel);
    velocities.iter().zip(s).map(|(v, s)| v - s).collect()
}

/// `v_i = omega_i + (1/N) sum_j Psi(x_j - x_i)`.
pub fn velocities_from_natural(
    positions: &[f64],
    natural_velocities: &[f64],
    kernel: &CommunicationKernel,
) -> Vec<f64> {
    assert_eq!(
        positions.len(),
        natural_velocities.len(),
        "column lengths differ"
    );
    let s = mean_interaction(positions, kernel);
    natural_velocities
        .iter()
        .zip(s)
        .map(|(w, s)| w + s)
        .collect()
}

pub fn diameter(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `max{D_x, Psi^-1(D_omega)}`, the uniform bound on the position diameter.
pub fn flocking_constant(
    positions: &[f64],
    natural_velocities: &[f64],
    kernel: &CommunicationKernel,
) -> f64 {
    diameter(positions).max(kernel.psi_antideriv_inv(diameter(natural_velocities)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleDiagnostics {
    pub position_diameter: f64,
    pub velocity_diameter: f64,
    pub natural_velocity_diameter: f64,
    /// `((1/N) sum |v_i - mean v|^p)^(1/p)`.
    pub lp_velocity_norm: f64,
    /// `max{D_x, Psi^-1(D_omega)}` of this snapshot; the flocking constant when the snapshot is
    /// the initial state.
    pub flocking_constant_c0: f64,
}

pub fn diagnostics<E: Ensemble>(
    snapshot: &E,
    kernel: &CommunicationKernel,
    p: Order,
) -> EnsembleDiagnostics {
    let v = snapshot.velocities(kernel);
    let w = snapshot.natural_velocities(kernel);
    let vbar = mean(&v);
    let centered: Vec<f64> = v.iter().map(|x| x - vbar).collect();
    let dx = diameter(snapshot.positions());
    let dw = diameter(&w);
    EnsembleDiagnostics {
        position_diameter: dx,
        velocity_diameter: diameter(&v),
        natural_velocity_diameter: dw,
        lp_velocity_norm: if diameter(&v) == 0.0 {
            0.0
        } else {
            p.uniform_mean(&centered)
        },
        flocking_constant_c0: dx.max(kernel.psi_antideriv_inv(dw)),
    }
}
