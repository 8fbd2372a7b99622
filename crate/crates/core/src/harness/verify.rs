//! Reduced-scale theorem checks run by the `verify` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::experiments::{contraction_curves, log_spaced_times, stability_first_order};
use super::sampling::{sample_initial, sample_order_preserving, InitSpec};
use crate::assignment::{min_sum_assignment, CostMatrix};
use crate::error::Result;
use crate::kernel::CommunicationKernel;
use crate::kinetic::{
    discretize_initial, evolve_kinetic, reconstruct_density, OmegaSpec, PositionProfile,
    PseudoInverseField,
};
use crate::metrics::{wasserstein_phase, PhasePoints};
use crate::model::{diagnostics, Ensemble, FirstOrderEnsemble, SecondOrderEnsemble};
use crate::order::Order;
use crate::sim::{
    integrate_first_order, integrate_first_order_at, integrate_second_order_direct_at,
    integrate_via_reformulation_at, IntegratorSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed ratio or error, for the report.
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

fn two_body_equilibrium() -> Result<Check> {
    let kk = CommunicationKernel::new(0.5)?;
    let init = FirstOrderEnsemble::new(vec![-2.0, 2.0], vec![-1.0, 1.0])?;
    let traj = integrate_first_order(&init, &kk, &IntegratorSpec::rk4(1e-3, 50.0), 50_000)?;
    let x = traj.last().1.positions();
    let err = (x[1] - x[0] - 1.0).abs();
    Ok(check(
        "two_body_equilibrium",
        err <= 1e-6,
        format!("gap error {err:.3e}"),
    ))
}

fn reformulation_equivalence() -> Result<Check> {
    let kk = CommunicationKernel::new(0.5)?;
    let times: Vec<f64> = (0..=20).map(|k| 0.5 * k as f64).collect();
    let direct = IntegratorSpec::rk45(10.0, 1e-10);
    let tol = (100.0 * direct.abs_tol).max(1e-6);
    let mut worst = 0.0f64;
    for seed in 0..3 {
        let init = sample_order_preserving(
            &InitSpec {
                n: 8,
                seed,
                ..InitSpec::default()
            },
            &kk,
        )?;
        let a = integrate_second_order_direct_at(&init, &kk, &direct, &times)?;
        let b =
            integrate_via_reformulation_at(&init, &kk, &IntegratorSpec::rk4(1e-3, 10.0), &times)?;
        for (s, r) in a.snapshots().iter().zip(b.snapshots()) {
            for i in 0..init.len() {
                worst = worst
                    .max((s.positions()[i] - r.positions()[i]).abs())
                    .max((s.velocities()[i] - r.velocities()[i]).abs());
            }
        }
        if a.collided() || a.len() != times.len() {
            return Ok(check(
                "reformulation_equivalence",
                false,
                "direct run stopped early".into(),
            ));
        }
    }
    Ok(check(
        "reformulation_equivalence",
        worst <= tol,
        format!("sup gap {worst:.3e}"),
    ))
}

fn stability_bound() -> Result<Check> {
    let kk = CommunicationKernel::new(0.5)?;
    let times = log_spaced_times(10.0, 32);
    let integ = IntegratorSpec::rk4(1e-2, 10.0);
    let mut worst = 0.0f64;
    for seed in 0..4u64 {
        let a: FirstOrderEnsemble = sample_initial(&InitSpec {
            n: 16,
            seed,
            ..InitSpec::default()
        })?;
        let b: FirstOrderEnsemble = sample_initial(&InitSpec {
            n: 16,
            seed: seed + 100,
            ..InitSpec::default()
        })?;
        let c = stability_first_order(
            &a,
            &b,
            &kk,
            &[Order::ONE, Order::TWO, Order::INF],
            &integ,
            &times,
        )?;
        for curve in &c.curves {
            for (x, b) in curve.x_t.iter().zip(&curve.bound) {
                worst = worst.max(x / b);
            }
        }
    }
    Ok(check(
        "stability_bound",
        worst <= 1.02,
        format!("max X/bound {worst:.4}"),
    ))
}

fn flocking_rate() -> Result<Check> {
    let kk = CommunicationKernel::new(0.5)?;
    let times = log_spaced_times(10.0, 32);
    let mut worst = 0.0f64;
    for p in [Order::TWO, Order::INF] {
        let init: SecondOrderEnsemble = sample_initial(&InitSpec {
            n: 16,
            seed: 9,
            ..InitSpec::default()
        })?;
        let c0 = diagnostics(&init, &kk, p);
        let rate = kk.psi(c0.flocking_constant_c0);
        let traj =
            integrate_via_reformulation_at(&init, &kk, &IntegratorSpec::rk4(1e-3, 10.0), &times)?;
        for (t, s) in traj.iter() {
            let bound = c0.lp_velocity_norm * (-rate * t).exp();
            worst = worst.max(diagnostics(s, &kk, p).lp_velocity_norm / bound);
        }
    }
    Ok(check(
        "flocking_rate",
        worst <= 1.05,
        format!("max ratio {worst:.4}"),
    ))
}

fn interaction_difference_bound() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut violations = 0usize;
    for beta in [0.1, 0.5, 0.9] {
        let kk = CommunicationKernel::new(beta)?;
        for _ in 0..10_000 {
            let [xi, xj, bi, bj]: [f64; 4] = std::array::from_fn(|_| rng.random_range(-10.0..10.0));
            let lhs = (kk.psi_antideriv(xj - xi) - kk.psi_antideriv(bj - bi)).abs();
            let rhs = 2.0 * (kk.psi_antideriv(xj - bj).abs() + kk.psi_antideriv(xi - bi).abs());
            if lhs > rhs * (1.0 + 1e-12) {
                violations += 1;
            }
        }
    }
    Ok(check(
        "interaction_difference_bound",
        violations == 0,
        format!("{violations} violations"),
    ))
}

fn kinetic_oracle() -> Result<Check> {
    let kk = CommunicationKernel::new(0.5)?;
    let init: FirstOrderEnsemble = sample_initial(&InitSpec {
        n: 16,
        seed: 4,
        ..InitSpec::default()
    })?;
    let integ = IntegratorSpec::rk4(1e-2, 5.0);
    let particles = integrate_first_order(&init, &kk, &integ, 50)?;
    let field = evolve_kinetic(&PseudoInverseField::from_ensemble(&init), &kk, &integ, 50)?;
    let mut worst = 0.0f64;
    for (s, f) in particles.snapshots().iter().zip(&field) {
        for (x, c) in s.positions().iter().zip(f.field.chi()) {
            worst = worst.max((x - c[0]).abs());
        }
    }
    Ok(check(
        "kinetic_oracle",
        worst <= 1e-10,
        format!("sup gap {worst:.3e}"),
    ))
}

fn smooth_field(m: usize, n_eta: usize, shift: f64) -> Result<PseudoInverseField> {
    let h = |w: f64| 1.0 - w * w;
    discretize_initial(
        OmegaSpec::Density {
            lo: -1.0,
            hi: 1.0,
            density: &h,
        },
        PositionProfile::Quantile(&|w, u| shift + 0.5 * w + (u - 0.5) * (1.0 + 0.25 * w)),
        m,
        n_eta,
    )
}

fn energy_laws() -> Result<Check> {
    let kk = CommunicationKernel::new(0.5)?;
    let (m, n_eta) = (8, 8);
    let field = smooth_field(m, n_eta, 0.0)?;
    let spec = IntegratorSpec::rk4(1e-2, 5.0);
    let out = evolve_kinetic(&field, &kk, &spec, 10)?;
    let slack = 10.0
        * (spec.dt * spec.dt + 1.0 / m as f64 + 1.0 / n_eta as f64)
        * out[0].energy.kinetic_energy_e;
    let mut ok = true;
    let mut mass_err = 0.0f64;
    for w in out.windows(2) {
        ok &= w[1].energy.kinetic_energy_e <= w[0].energy.kinetic_energy_e + slack;
    }
    for s in &out {
        mass_err = mass_err.max((reconstruct_density(&s.field).total_mass() - 1.0).abs());
        ok &= s.energy.dissipation_d >= -1e-9;
        ok &= s.field.omega_nodes() == field.omega_nodes()
            && s.field.omega_weights() == field.omega_weights();
    }
    ok &= mass_err <= 1e-12;
    Ok(check(
        "energy_laws",
        ok,
        format!("mass error {mass_err:.3e}"),
    ))
}

fn wasserstein_contraction() -> Result<Check> {
    let kk = CommunicationKernel::new(0.5)?;
    let f = smooth_field(6, 6, 0.0)?;
    let g = {
        let base = smooth_field(6, 6, 0.0)?;
        let chi: Vec<Vec<f64>> = base
            .chi()
            .iter()
            .enumerate()
            .map(|(m, s)| s.iter().map(|c| c * 1.5 + 0.1 * (m as f64 - 2.5)).collect())
            .collect();
        let raw = PseudoInverseField::new(
            base.omega_nodes().to_vec(),
            base.omega_weights().to_vec(),
            chi,
        )?;
        let mean = |x: &PseudoInverseField| x.levels().map(|l| l.mass * l.chi).sum::<f64>();
        raw.translated(mean(&f) - mean(&raw))
    };
    let times = log_spaced_times(5.0, 16);
    let c = contraction_curves(
        &f,
        &g,
        &kk,
        &[Order::ONE, Order::TWO, Order::INF],
        &IntegratorSpec::rk4(1e-2, 5.0),
        &times,
    )?;
    let worst = c
        .curves
        .iter()
        .flat_map(|cv| cv.w_t.iter().zip(&cv.bound).map(|(w, b)| w / b))
        .fold(0.0, f64::max);
    Ok(check(
        "wasserstein_contraction",
        worst <= 1.02,
        format!("max W/bound {worst:.4}"),
    ))
}

fn transport_oracle() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(1..=5);
        let mut cloud = || -> Vec<(f64, f64)> {
            (0..n)
                .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect()
        };
        let (a, b) = (cloud(), cloud());
        let w = wasserstein_phase(
            &PhasePoints::new(a.clone())?,
            &PhasePoints::new(b.clone())?,
            Order::TWO,
        )?;
        let cost = CostMatrix::from_fn(n, |i, j| {
            (a[i].0 - b[j].0).powi(2) + (a[i].1 - b[j].1).powi(2)
        });
        let direct = (min_sum_assignment(&cost).0 / n as f64).sqrt();
        worst = worst.max((w - direct).abs());
    }
    Ok(check(
        "transport_oracle",
        worst <= 1e-12,
        format!("max gap {worst:.3e}"),
    ))
}

fn reformulation_velocities_sample() -> Result<Check> {
    let kk = CommunicationKernel::new(0.5)?;
    let init: SecondOrderEnsemble = sample_initial(&InitSpec {
        n: 10,
        seed: 3,
        ..InitSpec::default()
    })?;
    let times = [0.0, 1.0];
    let first = integrate_first_order_at(
        &init.to_first_order(&kk),
        &kk,
        &IntegratorSpec::rk4(1e-3, 1.0),
        &times,
    )?;
    let second =
        integrate_via_reformulation_at(&init, &kk, &IntegratorSpec::rk4(1e-3, 1.0), &times)?;
    let worst = first
        .last()
        .1
        .velocities(&kk)
        .iter()
        .zip(second.last().1.velocities())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(check(
        "gamma_consistency",
        worst <= 1e-12,
        format!("max gap {worst:.3e}"),
    ))
}

/// Runs every check; errors inside a check count as failures.
pub fn run_suite() -> Vec<Check> {
    let suite: [(&'static str, fn() -> Result<Check>); 10] = [
        ("two_body_equilibrium", two_body_equilibrium),
        ("reformulation_equivalence", reformulation_equivalence),
        ("stability_bound", stability_bound),
        ("flocking_rate", flocking_rate),
        ("interaction_difference_bound", interaction_difference_bound),
        ("kinetic_oracle", kinetic_oracle),
        ("energy_laws", energy_laws),
        ("wasserstein_contraction", wasserstein_contraction),
        ("transport_oracle", transport_oracle),
        ("gamma_consistency", reformulation_velocities_sample),
    ];
    suite
        .iter()
        .map(|(name, f)| f().unwrap_or_else(|e| check(name, false, format!("error: {e}"))))
        .collect()
}
