//! Time integration of both particle systems.
//!
//! The canonical second-order integrator goes through the first-order reformulation, whose drift
//! is continuous even when distinct particles meet. The direct integrator of the singular system
//! is kept for cross-validation and stops with a [`EventKind::CollisionStop`] event when a
//! collision cannot be stepped around.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::CommunicationKernel;
use crate::model::{
    first_order_rhs_into, mean, second_order_rhs_into, velocities_from_natural, Ensemble,
    FirstOrderEnsemble, SecondOrderEnsemble,
};
use crate::ode::{self, AdaptiveOptions, Rejection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Rk4Fixed,
    Rk45Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSpec {
    pub scheme: Scheme,
    /// Fixed step, or the initial step of the adaptive scheme.
    pub dt: f64,
    pub t_end: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Smallest admissible gap between distinct particles in the direct integrator.
    pub collision_gap: f64,
    pub max_step_halvings: u32,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self {
            scheme: Scheme::Rk4Fixed,
            dt: 1e-3,
            t_end: 10.0,
            abs_tol: 1e-8,
            rel_tol: 1e-8,
            collision_gap: 1e-8,
            max_step_halvings: 30,
        }
    }
}

impl IntegratorSpec {
    pub fn rk4(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            ..Self::default()
        }
    }

    pub fn rk45(t_end: f64, tol: f64) -> Self {
        Self {
            scheme: Scheme::Rk45Adaptive,
            dt: 1e-2,
            t_end,
            abs_tol: tol,
            rel_tol: tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be non-negative");
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.collision_gap >= 0.0) {
            return bad("collision_gap must be non-negative");
        }
        Ok(())
    }

    /// Output grid `0, k dt, 2 k dt, ...` with `t_end` always included.
    pub fn record_times(&self, record_every: usize) -> Vec<f64> {
        let stride = self.dt * record_every.max(1) as f64;
        let mut times = Vec::new();
        let mut k = 0usize;
        loop {
            let t = k as f64 * stride;
            if t > self.t_end * (1.0 - 1e-12) {
                break;
            }
            times.push(t);
            k += 1;
        }
        if times.is_empty() {
            times.push(0.0);
        }
        if *times.last().unwrap() < self.t_end {
            times.push(self.t_end);
        }
        times
    }
}

/// Validated output grid: starts at 0, strictly increasing.
fn check_times(times: &[f64]) -> Result<()> {
    if times.first() != Some(&0.0) {
        return Err(Error::InvalidParameter(
            "sample times must start at 0".into(),
        ));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "sample times must be strictly increasing".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    CollisionStop,
    StepRejected,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::CollisionStop => "COLLISION_STOP",
            EventKind::StepRejected => "STEP_REJECTED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone)]
pub struct Trajectory<E> {
    times: Vec<f64>,
    snapshots: Vec<E>,
    events: Vec<Event>,
}

impl<E: Ensemble> Trajectory<E> {
    fn new(times: Vec<f64>, snapshots: Vec<E>, events: Vec<Event>) -> Self {
        debug_assert_eq!(times.len(), snapshots.len());
        Self {
            times,
            snapshots,
            events,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[E] {
        &self.snapshots
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> (f64, &E) {
        let i = self.times.len() - 1;
        (self.times[i], &self.snapshots[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &E)> {
        self.times.iter().copied().zip(&self.snapshots)
    }

    pub fn collided(&self) -> bool {
        self.events
            .iter()
            .any(|e| e.kind == EventKind::CollisionStop)
    }
}

fn first_order_positions(
    init: &FirstOrderEnsemble,
    kernel: &CommunicationKernel,
    spec: &IntegratorSpec,
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    check_times(times)?;
    let omega = init.natural_velocities();
    let sys = |y: &[f64], dy: &mut [f64]| -> Result<()> {
        first_order_rhs_into(y, omega, kernel, dy);
        Ok(())
    };
    match spec.scheme {
        Scheme::Rk4Fixed => ode::rk4_sampled(&sys, init.positions(), times, spec.dt, |_, _| Ok(())),
        Scheme::Rk45Adaptive => {
            let opts = AdaptiveOptions {
                h0: spec.dt,
                abs_tol: spec.abs_tol,
                rel_tol: spec.rel_tol,
                max_halvings: spec.max_step_halvings,
            };
            let run = ode::dopri_sampled(
                &sys,
                init.positions(),
                times,
                &opts,
                |_, _| true,
                |_, _| {},
                |_, _| Ok(()),
            )?;
            Ok(run.states)
        }
    }
}

/// First-order flow sampled on an explicit grid starting at 0.
pub fn integrate_first_order_at(
    init: &FirstOrderEnsemble,
    kernel: &CommunicationKernel,
    spec: &IntegratorSpec,
    times: &[f64],
) -> Result<Trajectory<FirstOrderEnsemble>> {
    let states = first_order_positions(init, kernel, spec, times)?;
    let snapshots = states
        .into_iter()
        .map(|x| init.with_positions(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory::new(times.to_vec(), snapshots, Vec::new()))
}

pub fn integrate_first_order(
    init: &FirstOrderEnsemble,
    kernel: &CommunicationKernel,
    spec: &IntegratorSpec,
    record_every: usize,
) -> Result<Trajectory<FirstOrderEnsemble>> {
    integrate_first_order_at(init, kernel, spec, &spec.record_times(record_every))
}

/// Second-order trajectory obtained from the first-order flow of the conserved natural
/// velocities, mapped back through `v = omega + (1/N) sum Psi(x_j - x_i)`.
pub fn integrate_via_reformulation_at(
    init: &SecondOrderEnsemble,
    kernel: &CommunicationKernel,
    spec: &IntegratorSpec,
    times: &[f64],
) -> Result<Trajectory<SecondOrderEnsemble>> {
    let first = init.to_first_order(kernel);
    let states = first_order_positions(&first, kernel, spec, times)?;
    let omega = first.natural_velocities();
    let snapshots = states
        .into_iter()
        .enumerate()
        .map(|(k, x)| {
            if k == 0 {
                // the initial snapshot is the given state, not its round trip
                return Ok(init.clone());
            }
            let v = velocities_from_natural(&x, omega, kernel);
            SecondOrderEnsemble::new(x, v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory::new(times.to_vec(), snapshots, Vec::new()))
}

pub fn integrate_via_reformulation(
    init: &SecondOrderEnsemble,
    kernel: &CommunicationKernel,
    spec: &IntegratorSpec,
    record_every: usize,
) -> Result<Trajectory<SecondOrderEnsemble>> {
    integrate_via_reformulation_at(init, kernel, spec, &spec.record_times(record_every))
}

fn sorted_order(x: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    idx
}

/// Smallest gap between distinct particles, with the indices attaining it.
fn min_gap(x: &[f64]) -> Option<(usize, usize, f64)> {
    let idx = sorted_order(x);
    idx.windows(2)
        .map(|w| (w[0].min(w[1]), w[0].max(w[1]), x[w[1]] - x[w[0]]))
        .min_by(|a, b| a.2.total_cmp(&b.2))
}

/// Adaptive integration of the singular alignment system itself.
///
/// A proposal that brings two particles closer than `collision_gap`, or swaps the order of
/// two particles, is halved; once the halving budget is exhausted the run ends early with a
/// `COLLISION_STOP` event and the last admissible state.
pub fn integrate_second_order_direct_at(
    init: &SecondOrderEnsemble,
    kernel: &CommunicationKernel,
    spec: &IntegratorSpec,
    times: &[f64],
) -> Result<Trajectory<SecondOrderEnsemble>> {
    spec.validate()?;
    check_times(times)?;
    let n = init.len();
    if let Some((i, j, gap)) = min_gap(init.positions()) {
        if gap <= spec.collision_gap {
            return Err(Error::Collision { i, j, gap });
        }
    }
    let sys = |y: &[f64], dy: &mut [f64]| -> Result<()> {
        let (x, v) = y.split_at(n);
        let (dx, dv) = dy.split_at_mut(n);
        dx.copy_from_slice(v);
        second_order_rhs_into(x, v, kernel, dv)
    };
    let gap = spec.collision_gap;
    let admissible = |old: &[f64], new: &[f64]| {
        let order = sorted_order(&old[..n]);
        order.windows(2).all(|w| new[w[1]] - new[w[0]] > gap)
    };
    let mut events = Vec::new();
    let opts = AdaptiveOptions {
        h0: spec.dt,
        abs_tol: spec.abs_tol,
        rel_tol: spec.rel_tol,
        max_halvings: spec.max_step_halvings,
    };
    let mut y0 = init.positions().to_vec();
    y0.extend_from_slice(init.velocities());
    let run = ode::dopri_sampled(
        &sys,
        &y0,
        times,
        &opts,
        admissible,
        |t, why| {
            if why == Rejection::Halved {
                events.push(Event {
                    time: t,
                    kind: EventKind::StepRejected,
                });
            }
        },
        |_, _| Ok(()),
    )?;
    let to_state = |y: Vec<f64>| {
        let v = y[n..].to_vec();
        let mut x = y;
        x.truncate(n);
        SecondOrderEnsemble::new(x, v)
    };
    let mut out_times = times[..run.states.len()].to_vec();
    let mut snapshots = run
        .states
        .into_iter()
        .map(to_state)
        .collect::<Result<Vec<_>>>()?;
    if let Some((t, y)) = run.stopped {
        events.push(Event {
            time: t,
            kind: EventKind::CollisionStop,
        });
        if t > *out_times.last().unwrap() {
            out_times.push(t);
            snapshots.push(to_state(y)?);
        }
    }
    Ok(Trajectory::new(out_times, snapshots, events))
}

pub fn integrate_second_order_direct(
    init: &SecondOrderEnsemble,
    kernel: &CommunicationKernel,
    spec: &IntegratorSpec,
    record_every: usize,
) -> Result<Trajectory<SecondOrderEnsemble>> {
    integrate_second_order_direct_at(init, kernel, spec, &spec.record_times(record_every))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    /// Final positions in the frame moving with `x_c + omega_c t`.
    pub positions: Vec<f64>,
    pub converged: bool,
    /// Largest comoving drift at the final time.
    pub residual: f64,
}

/// Equilibrium test on the last snapshot: converged iff every comoving drift is below `tol`.
///
/// The drift of particle `i` is its velocity `v_i`, which for a first-order snapshot is
/// `omega_i + (1/N) sum Psi(x_j - x_i)`.
pub fn detect_equilibrium<E: Ensemble>(
    traj: &Trajectory<E>,
    kernel: &CommunicationKernel,
    tol: f64,
) -> Equilibrium {
    let (_, first) = (traj.times[0], &traj.snapshots[0]);
    let x_c = mean(first.positions());
    let omega_c = mean(&first.natural_velocities(kernel));
    let (t, last) = traj.last();
    let shift = x_c + omega_c * t;
    let positions = last.positions().iter().map(|x| x - shift).collect();
    let residual = last
        .velocities(kernel)
        .iter()
        .fold(0.0f64, |m, v| m.max((v - omega_c).abs()));
    Equilibrium {
        positions,
        converged: residual < tol,
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{diagnostics, diameter};
    use crate::order::Order;

    fn k(beta: f64) -> CommunicationKernel {
        CommunicationKernel::new(beta).unwrap()
    }

    #[test]
    fn record_grid_includes_end() {
        let s = IntegratorSpec::rk4(0.1, 1.05);
        let t = s.record_times(5);
        assert_eq!(t.first(), Some(&0.0));
        assert_eq!(t.last(), Some(&1.05));
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(IntegratorSpec::rk4(0.1, 0.0).record_times(3), vec![0.0]);
    }

    #[test]
    fn single_particle_translates_exactly() {
        let init = FirstOrderEnsemble::new(vec![0.3], vec![-1.25]).unwrap();
        let traj =
            integrate_first_order(&init, &k(0.5), &IntegratorSpec::rk4(1e-2, 3.0), 10).unwrap();
        for (t, s) in traj.iter() {
            assert!((s.positions()[0] - (0.3 - 1.25 * t)).abs() < 1e-12);
        }
        assert_eq!(traj.last().0, 3.0);
    }

    #[test]
    fn rigid_translation_keeps_zero_diameter() {
        let init = FirstOrderEnsemble::new(vec![1.0; 5], vec![0.5; 5]).unwrap();
        let traj =
            integrate_first_order(&init, &k(0.3), &IntegratorSpec::rk4(1e-2, 2.0), 20).unwrap();
        for (_, s) in traj.iter() {
            assert_eq!(diameter(s.positions()), 0.0);
        }
    }

    #[test]
    fn two_body_gap_relaxes_to_inverse_of_omega_diameter() {
        let kk = k(0.5);
        let init = FirstOrderEnsemble::new(vec![-1.0, 1.0], vec![-1.0, 1.0]).unwrap();
        let traj =
            integrate_first_order(&init, &kk, &IntegratorSpec::rk4(1e-3, 50.0), 1000).unwrap();
        let (_, s) = traj.last();
        assert!((s.positions()[1] - s.positions()[0] - 1.0).abs() < 1e-6);
        let eq = detect_equilibrium(&traj, &kk, 1e-8);
        assert!(eq.converged);
        assert!((eq.positions[1] - eq.positions[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn equilibrium_edge_cases() {
        let kk = k(0.5);
        let still = FirstOrderEnsemble::new(vec![0.4; 3], vec![0.0; 3]).unwrap();
        let traj = integrate_first_order(&still, &kk, &IntegratorSpec::rk4(1e-2, 0.0), 1).unwrap();
        let eq = detect_equilibrium(&traj, &kk, 1e-12);
        assert!(eq.converged);
        assert!(eq.positions.iter().all(|x| x.abs() < 1e-15));

        let moving = FirstOrderEnsemble::new(vec![-1.0, 1.0], vec![-1.0, 1.0]).unwrap();
        let traj = integrate_first_order(&moving, &kk, &IntegratorSpec::rk4(1e-2, 0.0), 1).unwrap();
        assert!(!detect_equilibrium(&traj, &kk, 1e-6).converged);
    }

    #[test]
    fn equal_velocities_translate_in_the_direct_integrator() {
        let kk = k(0.5);
        let init = SecondOrderEnsemble::new(vec![0.0, 2.0], vec![0.7, 0.7]).unwrap();
        let traj =
            integrate_second_order_direct(&init, &kk, &IntegratorSpec::rk45(5.0, 1e-10), 100)
                .unwrap();
        assert!(!traj.collided());
        for (t, s) in traj.iter() {
            assert!((s.velocities()[0] - 0.7).abs() < 1e-12);
            assert!((s.positions()[1] - s.positions()[0] - 2.0).abs() < 1e-12);
            assert!((s.positions()[0] - 0.7 * t).abs() < 1e-9);
        }
    }

    #[test]
    fn separating_pair_matches_reformulation() {
        let kk = k(0.5);
        let init = SecondOrderEnsemble::new(vec![0.0, 4.0], vec![-1.0, 1.0]).unwrap();
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
        let direct = integrate_second_order_direct_at(
            &init,
            &kk,
            &IntegratorSpec::rk45(10.0, 1e-11),
            &times,
        )
        .unwrap();
        let reform =
            integrate_via_reformulation_at(&init, &kk, &IntegratorSpec::rk4(1e-3, 10.0), &times)
                .unwrap();
        assert_eq!(direct.times(), reform.times());
        let mut sup = 0.0f64;
        for (a, b) in direct.snapshots().iter().zip(reform.snapshots()) {
            for i in 0..2 {
                sup = sup.max((a.positions()[i] - b.positions()[i]).abs());
                sup = sup.max((a.velocities()[i] - b.velocities()[i]).abs());
            }
        }
        assert!(sup < 1e-6, "sup-norm gap {sup}");
        let d0 = diagnostics(&direct.snapshots()[0], &kk, Order::INF).velocity_diameter;
        let d1 = diagnostics(direct.last().1, &kk, Order::INF).velocity_diameter;
        assert!(d1 < d0);
    }

    #[test]
    fn head_on_pair_stops_with_collision_event() {
        let kk = k(0.5);
        let init = SecondOrderEnsemble::new(vec![0.0, 1.0], vec![5.0, -5.0]).unwrap();
        let spec = IntegratorSpec::rk45(10.0, 1e-8);
        let traj = integrate_second_order_direct(&init, &kk, &spec, 10).unwrap();
        assert!(traj.collided());
        let (t, s) = traj.last();
        assert!(t < 10.0);
        assert!(s.positions()[1] - s.positions()[0] > spec.collision_gap);
    }

    #[test]
    fn initial_collision_is_rejected() {
        let init = SecondOrderEnsemble::new(vec![0.0, 0.0], vec![1.0, -1.0]).unwrap();
        let r = integrate_second_order_direct(&init, &k(0.5), &IntegratorSpec::rk45(1.0, 1e-8), 1);
        assert!(matches!(r, Err(Error::Collision { .. })));
    }

    #[test]
    fn reformulation_conserves_momentum_and_starts_at_init() {
        let kk = k(0.4);
        let init = SecondOrderEnsemble::new(vec![-1.0, 0.2, 0.5, 2.0], vec![1.0, -0.5, 0.3, -0.1])
            .unwrap();
        let traj =
            integrate_via_reformulation(&init, &kk, &IntegratorSpec::rk4(1e-2, 5.0), 25).unwrap();
        assert_eq!(traj.snapshots()[0], init);
        let m0 = mean(init.velocities());
        for (_, s) in traj.iter() {
            assert!((mean(s.velocities()) - m0).abs() < 1e-10);
        }
    }
}
