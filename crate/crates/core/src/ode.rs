//! Explicit Runge-Kutta drivers over flat state vectors.
//!
//! Both drivers land exactly on the requested output times, so trajectories produced with
//! different schemes share a time axis.

use crate::error::{Error, Result};

pub(crate) trait System {
    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

impl<F> System for F
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self(y, dy)
    }
}

fn check_finite(t: f64, y: &[f64]) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalBlowup { time: t })
    }
}

struct Rk4Work {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Work {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    fn step<S: System>(&mut self, sys: &S, y: &mut [f64], h: f64) -> Result<()> {
        let n = y.len();
        sys.rhs(y, &mut self.k1)?;
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        sys.rhs(&self.tmp, &mut self.k2)?;
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        sys.rhs(&self.tmp, &mut self.k3)?;
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        sys.rhs(&self.tmp, &mut self.k4)?;
        for i in 0..n {
            y[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}

/// Number of equal substeps of size at most `dt` covering `span`.
fn substeps(span: f64, dt: f64) -> usize {
    ((span / dt) - 1e-9).ceil().max(1.0) as usize
}

/// Classical RK4 with nominal step `dt`, sampled at `times` (`times[0]` is the start).
///
/// `after_step` sees every accepted state and may abort the run.
pub(crate) fn rk4_sampled<S, F>(
    sys: &S,
    y0: &[f64],
    times: &[f64],
    dt: f64,
    after_step: F,
) -> Result<Vec<Vec<f64>>>
where
    S: System,
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let run = rk4_guarded(sys, y0, times, dt, 0, |_, _| true, after_step)?;
    Ok(run.states)
}

/// RK4 where `admissible(y_old, y_new)` vets each step. An inadmissible step is retried in
/// halves; a nominal step that needs more than `max_halvings` halvings stops the run.
///
/// Runs that never reject take exactly the steps of [`rk4_sampled`]. `after_step` may adjust
/// the accepted state in place.
pub(crate) fn rk4_guarded<S, A, F>(
    sys: &S,
    y0: &[f64],
    times: &[f64],
    dt: f64,
    max_halvings: u32,
    mut admissible: A,
    mut after_step: F,
) -> Result<AdaptiveRun>
where
    S: System,
    A: FnMut(&[f64], &[f64]) -> bool,
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let mut work = Rk4Work::new(y0.len());
    let mut y = y0.to_vec();
    let mut trial = y.clone();
    let mut out = Vec::with_capacity(times.len());
    out.push(y.clone());
    for w in times.windows(2) {
        let span = w[1] - w[0];
        if span > 0.0 {
            let n = substeps(span, dt);
            let h = span / n as f64;
            for s in 0..n {
                let t0 = w[0] + s as f64 * h;
                let t1 = if s + 1 == n {
                    w[1]
                } else {
                    w[0] + (s + 1) as f64 * h
                };
                let (mut t, mut halvings) = (t0, 0u32);
                while t < t1 {
                    let h_try = (h * 0.5f64.powi(halvings as i32)).min(t1 - t);
                    trial.copy_from_slice(&y);
                    work.step(sys, &mut trial, h_try)?;
                    if !admissible(&y, &trial) {
                        halvings += 1;
                        if halvings > max_halvings {
                            return Ok(AdaptiveRun {
                                states: out,
                                stopped: Some((t, y)),
                            });
                        }
                        continue;
                    }
                    t = if h_try >= t1 - t { t1 } else { t + h_try };
                    std::mem::swap(&mut y, &mut trial);
                    check_finite(t, &y)?;
                    after_step(t, &mut y)?;
                }
            }
        }
        out.push(y.clone());
    }
    Ok(AdaptiveRun {
        states: out,
        stopped: None,
    })
}

// Dormand-Prince 5(4) tableau (autonomous systems only, so the nodes c_i are not needed).
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct DopriWork {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

impl DopriWork {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
        }
    }

    /// One trial step from `y`; returns the scaled error norm. The proposal is in `y_new`.
    fn trial<S: System>(
        &mut self,
        sys: &S,
        y: &[f64],
        h: f64,
        abs_tol: f64,
        rel_tol: f64,
    ) -> Result<f64> {
        let n = y.len();
        sys.rhs(y, &mut self.k[0])?;
        let stage = |tmp: &mut Vec<f64>, k: &[Vec<f64>; 7], coeffs: &[f64]| {
            for i in 0..n {
                let mut s = 0.0;
                for (c, kk) in coeffs.iter().zip(k.iter()) {
                    s += c * kk[i];
                }
                tmp[i] = y[i] + h * s;
            }
        };
        stage(&mut self.tmp, &self.k, &[A21]);
        sys.rhs(&self.tmp, &mut self.k[1])?;
        stage(&mut self.tmp, &self.k, &[A31, A32]);
        sys.rhs(&self.tmp, &mut self.k[2])?;
        stage(&mut self.tmp, &self.k, &[A41, A42, A43]);
        sys.rhs(&self.tmp, &mut self.k[3])?;
        stage(&mut self.tmp, &self.k, &[A51, A52, A53, A54]);
        sys.rhs(&self.tmp, &mut self.k[4])?;
        stage(&mut self.tmp, &self.k, &[A61, A62, A63, A64, A65]);
        sys.rhs(&self.tmp, &mut self.k[5])?;
        stage(&mut self.y_new, &self.k, &[B1, 0.0, B3, B4, B5, B6]);
        if !self.y_new.iter().all(|v| v.is_finite()) {
            return Ok(f64::INFINITY);
        }
        let (last, rest) = self.k.split_last_mut().expect("seven stages");
        sys.rhs(&self.y_new, last)?;
        let mut acc = 0.0;
        for i in 0..n {
            let err = h
                * (E1 * rest[0][i]
                    + E3 * rest[2][i]
                    + E4 * rest[3][i]
                    + E5 * rest[4][i]
                    + E6 * rest[5][i]
                    + E7 * last[i]);
            let sc = abs_tol + rel_tol * y[i].abs().max(self.y_new[i].abs());
            acc += (err / sc).powi(2);
        }
        Ok((acc / n as f64).sqrt())
    }
}

pub(crate) struct AdaptiveOptions {
    pub h0: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_halvings: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Rejection {
    /// The embedded error estimate exceeded tolerance.
    Error,
    /// The proposal was inadmissible and the step was halved.
    Halved,
}

pub(crate) struct AdaptiveRun {
    pub states: Vec<Vec<f64>>,
    /// Set when the halving budget ran out: `(time, last admissible state)`.
    pub stopped: Option<(f64, Vec<f64>)>,
}

/// Dormand-Prince 5(4) sampled at `times`.
///
/// `admissible(y_old, y_new)` vets each proposal; an inadmissible proposal (or one whose stage
/// evaluation fails with [`Error::Collision`]) halves the step. Halvings accumulate across
/// consecutive steps that each needed one, and the run stops once they exceed
/// `max_halvings`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn dopri_sampled<S, A, R, F>(
    sys: &S,
    y0: &[f64],
    times: &[f64],
    opts: &AdaptiveOptions,
    mut admissible: A,
    mut on_reject: R,
    mut after_step: F,
) -> Result<AdaptiveRun>
where
    S: System,
    A: FnMut(&[f64], &[f64]) -> bool,
    R: FnMut(f64, Rejection),
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let mut work = DopriWork::new(y0.len());
    let mut y = y0.to_vec();
    let mut t = times.first().copied().unwrap_or(0.0);
    let mut h = opts.h0;
    let mut streak = 0u32;
    let mut states = Vec::with_capacity(times.len());
    states.push(y.clone());

    for &target in times.iter().skip(1) {
        while t < target {
            let remaining = target - t;
            let clipped = h >= remaining;
            let mut h_try = if clipped { remaining } else { h };
            let mut halved_this_step = false;
            loop {
                let outcome = match work.trial(sys, &y, h_try, opts.abs_tol, opts.rel_tol) {
                    Ok(err) if err.is_finite() && admissible(&y, &work.y_new) => Some(err),
                    Ok(err) if !err.is_finite() => Some(err),
                    Ok(_) | Err(Error::Collision { .. }) => None,
                    Err(e) => return Err(e),
                };
                match outcome {
                    None => {
                        streak += 1;
                        halved_this_step = true;
                        on_reject(t, Rejection::Halved);
                        if streak > opts.max_halvings {
                            return Ok(AdaptiveRun {
                                states,
                                stopped: Some((t, y)),
                            });
                        }
                        h_try *= 0.5;
                    }
                    Some(err) if err > 1.0 => {
                        on_reject(t, Rejection::Error);
                        let fac = if err.is_finite() {
                            (0.9 * err.powf(-0.2)).max(0.2)
                        } else {
                            0.2
                        };
                        h_try *= fac;
                        if h_try <= 1e-15 * t.abs().max(1.0) {
                            return Err(Error::NumericalBlowup { time: t });
                        }
                    }
                    Some(err) => {
                        let last = h_try == remaining;
                        t = if last { target } else { t + h_try };
                        std::mem::swap(&mut y, &mut work.y_new);
                        check_finite(t, &y)?;
                        after_step(t, &mut y)?;
                        let fac = if err == 0.0 {
                            5.0
                        } else {
                            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                        };
                        let proposal = h_try * fac;
                        h = if clipped && !halved_this_step {
                            h.max(proposal)
                        } else {
                            proposal
                        };
                        if !halved_this_step {
                            streak = 0;
                        }
                        break;
                    }
                }
            }
        }
        states.push(y.clone());
    }
    Ok(AdaptiveRun {
        states,
        stopped: None,
    })
}
