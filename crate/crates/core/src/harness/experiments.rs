use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::sampling::{sample_initial, InitSpec};
use super::table::ResultTable;
use crate::error::{Error, Result};
use crate::kernel::CommunicationKernel;
use crate::kinetic::{evolve_kinetic_at, PseudoInverseField};
use crate::metrics::{
    centered_lp_mismatch, modified_wasserstein, modulated_lp_distance, natural_velocity_mismatch,
    wasserstein_1d, wasserstein_phase_unequal, ComovingFrame, DiscreteMeasure1D, PhasePoints,
    DEFAULT_ASSIGNMENT_CAP,
};
use crate::model::{diameter, FirstOrderEnsemble, SecondOrderEnsemble};
use crate::order::Order;
use crate::sim::{integrate_first_order_at, integrate_via_reformulation_at, IntegratorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    FirstOrder,
    SecondOrder,
}

/// `0` followed by `count` geometrically spaced times from `t_end / 1000` to `t_end`.
pub fn log_spaced_times(t_end: f64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0];
    if t_end <= 0.0 || count == 0 {
        return out;
    }
    let lo = (t_end * 1e-3).ln();
    let hi = t_end.ln();
    for k in 0..count {
        let s = if count == 1 {
            1.0
        } else {
            k as f64 / (count - 1) as f64
        };
        out.push(if k + 1 == count {
            t_end
        } else {
            (lo + s * (hi - lo)).exp()
        });
    }
    out
}

/// `max{D_x(A), D_x(B), Psi^-1(D_omega(A)), Psi^-1(D_omega(B))}`.
pub fn stability_d0(
    a: &FirstOrderEnsemble,
    b: &FirstOrderEnsemble,
    kernel: &CommunicationKernel,
) -> f64 {
    [a, b]
        .iter()
        .map(|e| {
            diameter(e.positions()).max(kernel.psi_antideriv_inv(diameter(e.natural_velocities())))
        })
        .fold(0.0, f64::max)
}

/// Paired-run curves for one order `p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityCurve {
    pub p: Order,
    pub x_t: Vec<f64>,
    /// `e^{-psi(2 D0) t} X(0) + U / psi(2 D0)`.
    pub bound: Vec<f64>,
    pub u: f64,
    /// Velocity mismatch, second-order runs only.
    pub v_t: Option<Vec<f64>>,
    /// Smallest `C` with `X(t) <= C (X0 + V0 + X0^{1-beta})` and
    /// `V(t) <= C (V0 + X0^{1-beta} + (X0 + V0 + X0^{1-beta})^{1-beta})` on the grid.
    pub fitted_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityCurves {
    pub times: Vec<f64>,
    pub d0: f64,
    /// `psi(2 D0)`.
    pub rate: f64,
    pub curves: Vec<StabilityCurve>,
}

fn stability_core(
    a0: &FirstOrderEnsemble,
    b0: &FirstOrderEnsemble,
    xa: &[FirstOrderEnsemble],
    xb: &[FirstOrderEnsemble],
    velocities: Option<(&[SecondOrderEnsemble], &[SecondOrderEnsemble])>,
    kernel: &CommunicationKernel,
    ps: &[Order],
    times: &[f64],
) -> Result<StabilityCurves> {
    let d0 = stability_d0(a0, b0, kernel);
    let rate = kernel.psi(2.0 * d0);
    let (fa, fb) = (ComovingFrame::of(a0, kernel), ComovingFrame::of(b0, kernel));
    let one_minus_beta = 1.0 - kernel.beta();
    let mut curves = Vec::with_capacity(ps.len());
    for &p in ps {
        let u = natural_velocity_mismatch(a0.natural_velocities(), b0.natural_velocities(), p)?;
        let x_t = times
            .iter()
            .zip(xa.iter().zip(xb))
            .map(|(&t, (a, b))| modulated_lp_distance(a, &fa, b, &fb, p, t))
            .collect::<Result<Vec<_>>>()?;
        let x0 = x_t[0];
        let bound = times
            .iter()
            .map(|&t| (-rate * t).exp() * x0 + u / rate)
            .collect();
        let (v_t, fitted_c) = match velocities {
            None => (None, None),
            Some((va, vb)) => {
                let v_t = va
                    .iter()
                    .zip(vb)
                    .map(|(a, b)| centered_lp_mismatch(a.velocities(), b.velocities(), p))
                    .collect::<Result<Vec<_>>>()?;
                let v0 = v_t[0];
                let h = x0.powf(one_minus_beta);
                let rx = x0 + v0 + h;
                let rv = v0 + h + rx.powf(one_minus_beta);
                let c = x_t
                    .iter()
                    .zip(&v_t)
                    .map(|(x, v)| {
                        let cx = if rx > 0.0 { x / rx } else { 0.0 };
                        let cv = if rv > 0.0 { v / rv } else { 0.0 };
                        cx.max(cv)
                    })
                    .fold(0.0, f64::max);
                (Some(v_t), Some(c))
            }
        };
        curves.push(StabilityCurve {
            p,
            x_t,
            bound,
            u,
            v_t,
            fitted_c,
        });
    }
    Ok(StabilityCurves {
        times: times.to_vec(),
        d0,
        rate,
        curves,
    })
}

/// Integrates both first-order solutions on `times` and evaluates the modulated distance
/// against its exponential bound for every `p` in `ps`.
pub fn stability_first_order(
    a0: &FirstOrderEnsemble,
    b0: &FirstOrderEnsemble,
    kernel: &CommunicationKernel,
    ps: &[Order],
    spec: &IntegratorSpec,
    times: &[f64],
) -> Result<StabilityCurves> {
    if a0.len() != b0.len() {
        return Err(Error::DimensionMismatch {
            left: a0.len(),
            right: b0.len(),
        });
    }
    let ta = integrate_first_order_at(a0, kernel, spec, times)?;
    let tb = integrate_first_order_at(b0, kernel, spec, times)?;
    stability_core(
        a0,
        b0,
        ta.snapshots(),
        tb.snapshots(),
        None,
        kernel,
        ps,
        times,
    )
}

/// Second-order counterpart: additionally reports the velocity mismatch and fitted `C`.
pub fn stability_second_order(
    a0: &SecondOrderEnsemble,
    b0: &SecondOrderEnsemble,
    kernel: &CommunicationKernel,
    ps: &[Order],
    spec: &IntegratorSpec,
    times: &[f64],
) -> Result<StabilityCurves> {
    if a0.len() != b0.len() {
        return Err(Error::DimensionMismatch {
            left: a0.len(),
            right: b0.len(),
        });
    }
    let ta = integrate_via_reformulation_at(a0, kernel, spec, times)?;
    let tb = integrate_via_reformulation_at(b0, kernel, spec, times)?;
    let first = |s: &[SecondOrderEnsemble]| -> Vec<FirstOrderEnsemble> {
        s.iter().map(|e| e.to_first_order(kernel)).collect()
    };
    let (fa, fb) = (first(ta.snapshots()), first(tb.snapshots()));
    stability_core(
        &fa[0],
        &fb[0],
        &fa,
        &fb,
        Some((ta.snapshots(), tb.snapshots())),
        kernel,
        ps,
        times,
    )
}

fn spec_echo(spec: &InitSpec) -> Value {
    serde_json::to_value(spec).unwrap_or(Value::Null)
}

pub fn stability_experiment(
    spec_a: &InitSpec,
    spec_b: &InitSpec,
    kernel: &CommunicationKernel,
    p: Order,
    integ: &IntegratorSpec,
    times: &[f64],
    mode: Mode,
) -> Result<ResultTable> {
    let curves = match mode {
        Mode::FirstOrder => stability_first_order(
            &sample_initial(spec_a)?,
            &sample_initial(spec_b)?,
            kernel,
            &[p],
            integ,
            times,
        )?,
        Mode::SecondOrder => stability_second_order(
            &sample_initial(spec_a)?,
            &sample_initial(spec_b)?,
            kernel,
            &[p],
            integ,
            times,
        )?,
    };
    let c = &curves.curves[0];
    let mut table = ResultTable::new(json!({
        "experiment": "stability",
        "mode": mode,
        "beta": kernel.beta(),
        "p": p,
        "init_a": spec_echo(spec_a),
        "init_b": spec_echo(spec_b),
        "integrator": integ,
        "d0": curves.d0,
        "rate": curves.rate,
        "U": c.u,
        "fitted_C": c.fitted_c,
    }))
    .with_column("t", curves.times.clone())?
    .with_column("X_t", c.x_t.clone())?
    .with_column("bound", c.bound.clone())?;
    if let Some(v) = &c.v_t {
        table.push_column("V_t", v.clone())?;
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MeanfieldDistance {
    /// Exact assignment on `(x, v)` or `(x, omega)`, subject to the assignment cap.
    Phase,
    /// `W_p` of the position marginals.
    PositionMarginal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanfieldSweep {
    pub ns: Vec<usize>,
    pub times: Vec<f64>,
    /// `distances[k][s]` compares `ns[k]` with `ns[k + 1]` at `times[s]`.
    pub distances: Vec<Vec<f64>>,
}

impl MeanfieldSweep {
    /// Per pair, the largest distance over sample times `<= t_max`.
    pub fn sup_up_to(&self, t_max: f64) -> Vec<f64> {
        self.distances
            .iter()
            .map(|d| {
                self.times
                    .iter()
                    .zip(d)
                    .filter(|(t, _)| **t <= t_max)
                    .fold(0.0f64, |m, (_, v)| m.max(*v))
            })
            .collect()
    }
}

/// Simulates nested samples of every size in `ns` and tabulates the distance between
/// consecutive sizes at every sample time.
#[allow(clippy::too_many_arguments)]
pub fn meanfield_sweep(
    base: &InitSpec,
    ns: &[usize],
    kernel: &CommunicationKernel,
    p: Order,
    times: &[f64],
    mode: Mode,
    integ: &IntegratorSpec,
    distance: MeanfieldDistance,
) -> Result<MeanfieldSweep> {
    if ns.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("Ns must be nondecreasing".into()));
    }
    if distance == MeanfieldDistance::Phase {
        for w in ns.windows(2) {
            let l = num_integer::lcm(w[0], w[1]);
            if l > DEFAULT_ASSIGNMENT_CAP {
                return Err(Error::SizeCapExceeded {
                    n: l,
                    cap: DEFAULT_ASSIGNMENT_CAP,
                });
            }
        }
    }
    let runs: Vec<Vec<(Vec<f64>, Vec<f64>)>> = ns
        .par_iter()
        .map(|&n| -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
            let spec = InitSpec { n, ..base.clone() };
            Ok(match mode {
                Mode::SecondOrder => {
                    let init: SecondOrderEnsemble = sample_initial(&spec)?;
                    integrate_via_reformulation_at(&init, kernel, integ, times)?
                        .snapshots()
                        .iter()
                        .map(|s| (s.positions().to_vec(), s.velocities().to_vec()))
                        .collect()
                }
                Mode::FirstOrder => {
                    let init: FirstOrderEnsemble = sample_initial(&spec)?;
                    integrate_first_order_at(&init, kernel, integ, times)?
                        .snapshots()
                        .iter()
                        .map(|s| (s.positions().to_vec(), s.natural_velocities().to_vec()))
                        .collect()
                }
            })
        })
        .collect::<Result<_>>()?;
    let distances = runs
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|((xa, ya), (xb, yb))| match distance {
                    MeanfieldDistance::Phase => wasserstein_phase_unequal(
                        &PhasePoints::from_columns(xa, ya)?,
                        &PhasePoints::from_columns(xb, yb)?,
                        p,
                        DEFAULT_ASSIGNMENT_CAP,
                    ),
                    MeanfieldDistance::PositionMarginal => Ok(wasserstein_1d(
                        &DiscreteMeasure1D::uniform(xa.clone())?,
                        &DiscreteMeasure1D::uniform(xb.clone())?,
                        p,
                    )),
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeanfieldSweep {
        ns: ns.to_vec(),
        times: times.to_vec(),
        distances,
    })
}

impl MeanfieldSweep {
    /// One row per consecutive pair: `N, N_next, sup_W`.
    pub fn to_table(&self, metadata: Value) -> Result<ResultTable> {
        let sups = self.sup_up_to(f64::INFINITY);
        let pairs = self.ns.windows(2);
        ResultTable::new(metadata)
            .with_column("N", pairs.clone().map(|w| w[0] as f64).collect())?
            .with_column("N_next", pairs.map(|w| w[1] as f64).collect())?
            .with_column("sup_W", sups)
    }
}

/// `max{D_x(F), D_x(G), Psi^-1(D_omega)}` for fields on a shared omega grid.
pub fn contraction_d0(
    f: &PseudoInverseField,
    g: &PseudoInverseField,
    kernel: &CommunicationKernel,
) -> f64 {
    f.position_diameter()
        .max(g.position_diameter())
        .max(kernel.psi_antideriv_inv(f.omega_diameter()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionCurve {
    pub p: Order,
    pub w_t: Vec<f64>,
    /// `W(0) e^{-psi(2 D0) t}`.
    pub bound: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionCurves {
    pub times: Vec<f64>,
    pub d0: f64,
    pub rate: f64,
    pub curves: Vec<ContractionCurve>,
}

pub fn contraction_curves(
    f0: &PseudoInverseField,
    g0: &PseudoInverseField,
    kernel: &CommunicationKernel,
    ps: &[Order],
    spec: &IntegratorSpec,
    times: &[f64],
) -> Result<ContractionCurves> {
    f0.check_same_grid(g0)?;
    let d0 = contraction_d0(f0, g0, kernel);
    let rate = kernel.psi(2.0 * d0);
    let fs = evolve_kinetic_at(f0, kernel, spec, times)?;
    let gs = evolve_kinetic_at(g0, kernel, spec, times)?;
    let mut curves = Vec::with_capacity(ps.len());
    for &p in ps {
        let w_t = fs
            .iter()
            .zip(&gs)
            .map(|(a, b)| modified_wasserstein(&a.field, &b.field, p))
            .collect::<Result<Vec<_>>>()?;
        let bound = times.iter().map(|t| w_t[0] * (-rate * t).exp()).collect();
        curves.push(ContractionCurve { p, w_t, bound });
    }
    Ok(ContractionCurves {
        times: times.to_vec(),
        d0,
        rate,
        curves,
    })
}

pub fn contraction_experiment(
    f0: &PseudoInverseField,
    g0: &PseudoInverseField,
    kernel: &CommunicationKernel,
    p: Order,
    spec: &IntegratorSpec,
    times: &[f64],
) -> Result<ResultTable> {
    let c = contraction_curves(f0, g0, kernel, &[p], spec, times)?;
    ResultTable::new(json!({
        "experiment": "contraction",
        "beta": kernel.beta(),
        "p": p,
        "integrator": spec,
        "d0": c.d0,
        "rate": c.rate,
    }))
    .with_column("t", c.times.clone())?
    .with_column("W_t", c.curves[0].w_t.clone())?
    .with_column("bound", c.curves[0].bound.clone())
}
