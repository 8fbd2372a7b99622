use std::error::Error;
use std::fs;
use std::path::Path;

use flocklab::harness::{
    contraction_experiment, log_spaced_times, meanfield_sweep, sample_columns, sample_initial,
    stability_first_order, stability_second_order, verify, MeanfieldDistance, Mode, ResultTable,
    StabilityCurves, RNG_FAMILY,
};
use flocklab::io::{write_energy, write_events, write_field, write_text, write_trajectory};
use flocklab::kinetic::{
    discretize_initial, evolve_kinetic, OmegaSpec, PositionProfile, PseudoInverseField,
};
use flocklab::metrics::DEFAULT_ASSIGNMENT_CAP;
use flocklab::model::{diagnostics, velocities_from_natural};
use flocklab::sim::{
    detect_equilibrium, integrate_first_order, integrate_second_order_direct,
    integrate_via_reformulation, Trajectory,
};
use flocklab::{CommunicationKernel, Ensemble, FirstOrderEnsemble, SecondOrderEnsemble};
use serde_json::json;

use crate::config::{Command, Model, RunConfig};
use crate::svg::line_chart;

type AnyResult<T> = Result<T, Box<dyn Error + Send + Sync>>;

pub enum Outcome {
    Done { files: Vec<String> },
    VerifyFailed { failed: Vec<&'static str> },
}

struct Output<'a> {
    dir: &'a Path,
    files: Vec<String>,
    svg: bool,
}

impl Output<'_> {
    fn path(&mut self, name: &str) -> std::path::PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn table(&mut self, table: &ResultTable, stem: &str) -> AnyResult<()> {
        table.write(self.dir, stem)?;
        self.files.push(format!("{stem}.csv"));
        self.files.push(format!("{stem}.meta.json"));
        Ok(())
    }

    fn chart(
        &mut self,
        name: &str,
        title: &str,
        x: &[f64],
        series: &[(&str, &[f64])],
        log_y: bool,
    ) -> AnyResult<()> {
        if self.svg {
            let path = self.path(name);
            write_text(&path, &line_chart(title, x, series, log_y))?;
        }
        Ok(())
    }
}

pub fn run(cfg: &RunConfig) -> AnyResult<Outcome> {
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir)
        .map_err(|e| format!("cannot create output_dir {}: {e}", dir.display()))?;
    let threads = if cfg.threads == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        cfg.threads
    };
    let mut resolved = serde_json::to_value(cfg)?;
    resolved["seed_b"] = json!(cfg.seed_b());
    resolved["threads"] = json!(threads);
    resolved["rng"] = json!(RNG_FAMILY);
    write_text(
        &dir.join("config.resolved"),
        &serde_json::to_string_pretty(&resolved)?,
    )?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()?;
    let mut out = Output {
        dir,
        files: vec!["config.resolved".into()],
        svg: cfg.emit_svg,
    };
    let failed = pool.install(|| dispatch(cfg, &mut out))?;
    if !failed.is_empty() {
        return Ok(Outcome::VerifyFailed { failed });
    }
    Ok(Outcome::Done { files: out.files })
}

/// Returns the names of failed checks (only `verify` can fail checks).
fn dispatch(cfg: &RunConfig, out: &mut Output<'_>) -> AnyResult<Vec<&'static str>> {
    let kernel = cfg.kernel()?;
    match cfg.command() {
        Command::Simulate => simulate(cfg, &kernel, out)?,
        Command::Stability => stability(cfg, &kernel, out)?,
        Command::Meanfield => meanfield(cfg, &kernel, out)?,
        Command::Kinetic => kinetic(cfg, &kernel, out)?,
        Command::Contract => contract(cfg, &kernel, out)?,
        Command::Verify => return run_verify(out),
    }
    Ok(Vec::new())
}

fn diagnostics_table<E: Ensemble>(
    cfg: &RunConfig,
    kernel: &CommunicationKernel,
    traj: &Trajectory<E>,
) -> AnyResult<ResultTable> {
    let d: Vec<_> = traj
        .snapshots()
        .iter()
        .map(|s| diagnostics(s, kernel, cfg.p))
        .collect();
    let eq = detect_equilibrium(traj, kernel, 1e-8);
    Ok(ResultTable::new(json!({
        "experiment": "simulate",
        "model": cfg.model,
        "p": cfg.p,
        "flocking_constant_c0": d[0].flocking_constant_c0,
        "equilibrium_converged": eq.converged,
        "equilibrium_residual": eq.residual,
        "events": traj.events().len(),
        "collided": traj.collided(),
    }))
    .with_column("t", traj.times().to_vec())?
    .with_column("D_x", d.iter().map(|d| d.position_diameter).collect())?
    .with_column("D_v", d.iter().map(|d| d.velocity_diameter).collect())?
    .with_column(
        "D_omega",
        d.iter().map(|d| d.natural_velocity_diameter).collect(),
    )?
    .with_column(
        "lp_velocity_norm",
        d.iter().map(|d| d.lp_velocity_norm).collect(),
    )?)
}

fn write_run<E: Ensemble>(
    cfg: &RunConfig,
    kernel: &CommunicationKernel,
    traj: &Trajectory<E>,
    out: &mut Output<'_>,
) -> AnyResult<()> {
    write_trajectory(&out.path("trajectory.csv"), traj)?;
    write_events(&out.path("events.csv"), traj.events())?;
    let table = diagnostics_table(cfg, kernel, traj)?;
    out.table(&table, "diagnostics")?;
    let t = table.column("t").unwrap_or_default().to_vec();
    let dv = table.column("D_v").unwrap_or_default().to_vec();
    out.chart(
        "diagnostics.svg",
        "velocity diameter",
        &t,
        &[("D_v", &dv)],
        true,
    )
}

fn simulate(cfg: &RunConfig, kernel: &CommunicationKernel, out: &mut Output<'_>) -> AnyResult<()> {
    let init = cfg.init_spec(cfg.seed)?;
    let spec = cfg.integrator_spec();
    match cfg.model {
        Model::SecondOrder => {
            let e: SecondOrderEnsemble = sample_initial(&init)?;
            write_run(
                cfg,
                kernel,
                &integrate_via_reformulation(&e, kernel, &spec, cfg.record_every)?,
                out,
            )
        }
        Model::SecondOrderDirect => {
            let e: SecondOrderEnsemble = sample_initial(&init)?;
            write_run(
                cfg,
                kernel,
                &integrate_second_order_direct(&e, kernel, &spec, cfg.record_every)?,
                out,
            )
        }
        Model::FirstOrder => {
            let e: FirstOrderEnsemble = sample_initial(&init)?;
            write_run(
                cfg,
                kernel,
                &integrate_first_order(&e, kernel, &spec, cfg.record_every)?,
                out,
            )
        }
    }
}

fn stability(cfg: &RunConfig, kernel: &CommunicationKernel, out: &mut Output<'_>) -> AnyResult<()> {
    let (spec_a, spec_b) = (cfg.init_spec(cfg.seed)?, cfg.init_spec(cfg.seed_b())?);
    let times = log_spaced_times(cfg.t_end, cfg.sample_times);
    let integ = cfg.integrator_spec();
    let ps = [cfg.p];
    let curves: StabilityCurves = match cfg.model {
        Model::FirstOrder => {
            let a: FirstOrderEnsemble = sample_initial(&spec_a)?;
            let mut b: FirstOrderEnsemble = sample_initial(&spec_b)?;
            if cfg.same_omega {
                b = FirstOrderEnsemble::new(
                    b.positions().to_vec(),
                    a.natural_velocities().to_vec(),
                )?;
            }
            stability_first_order(&a, &b, kernel, &ps, &integ, &times)?
        }
        Model::SecondOrder | Model::SecondOrderDirect => {
            let a: SecondOrderEnsemble = sample_initial(&spec_a)?;
            let mut b: SecondOrderEnsemble = sample_initial(&spec_b)?;
            if cfg.same_omega {
                let w = a.to_first_order(kernel);
                let v = velocities_from_natural(b.positions(), w.natural_velocities(), kernel);
                b = SecondOrderEnsemble::new(b.positions().to_vec(), v)?;
            }
            stability_second_order(&a, &b, kernel, &ps, &integ, &times)?
        }
    };
    let c = &curves.curves[0];
    let mut table = ResultTable::new(json!({
        "experiment": "stability",
        "model": cfg.model,
        "beta": cfg.beta,
        "p": cfg.p,
        "seed": cfg.seed,
        "seed_b": cfg.seed_b(),
        "same_omega": cfg.same_omega,
        "d0": curves.d0,
        "rate": curves.rate,
        "U": c.u,
        "fitted_C": c.fitted_c,
        "bound_violated": c.x_t.iter().zip(&c.bound).any(|(x, b)| x > &(b * 1.02)),
    }))
    .with_column("t", curves.times.clone())?
    .with_column("X_t", c.x_t.clone())?
    .with_column("bound", c.bound.clone())?;
    if let Some(v) = &c.v_t {
        table.push_column("V_t", v.clone())?;
    }
    out.table(&table, "stability")?;
    out.chart(
        "stability.svg",
        "modulated distance and bound",
        &curves.times,
        &[("X_t", &c.x_t), ("bound", &c.bound)],
        true,
    )
}

fn meanfield(cfg: &RunConfig, kernel: &CommunicationKernel, out: &mut Output<'_>) -> AnyResult<()> {
    let base = cfg.init_spec(cfg.seed)?;
    let times = log_spaced_times(cfg.t_end, cfg.sample_times);
    let mode = match cfg.model {
        Model::FirstOrder => Mode::FirstOrder,
        _ => Mode::SecondOrder,
    };
    let phase = cfg
        .ns
        .windows(2)
        .all(|w| lcm(w[0], w[1]) <= DEFAULT_ASSIGNMENT_CAP);
    let distance = if phase {
        MeanfieldDistance::Phase
    } else {
        MeanfieldDistance::PositionMarginal
    };
    let sweep = meanfield_sweep(
        &base,
        &cfg.ns,
        kernel,
        cfg.p,
        &times,
        mode,
        &cfg.integrator_spec(),
        distance,
    )?;
    let table = sweep.to_table(json!({
        "experiment": "meanfield",
        "mode": mode,
        "distance": distance,
        "beta": cfg.beta,
        "p": cfg.p,
        "seed": cfg.seed,
    }))?;
    out.table(&table, "meanfield")?;
    let mut curves =
        ResultTable::new(json!({"experiment": "meanfield_curves", "distance": distance}))
            .with_column("t", times.clone())?;
    let mut names = Vec::new();
    for (w, d) in cfg.ns.windows(2).zip(&sweep.distances) {
        let name = format!("W_{}_{}", w[0], w[1]);
        curves.push_column(name.clone(), d.clone())?;
        names.push(name);
    }
    out.table(&curves, "meanfield_curves")?;
    let series: Vec<(&str, &[f64])> = names
        .iter()
        .zip(&sweep.distances)
        .map(|(n, d)| (n.as_str(), d.as_slice()))
        .collect();
    out.chart(
        "meanfield.svg",
        "distance between consecutive N",
        &times,
        &series,
        true,
    )
}

fn lcm(a: usize, b: usize) -> usize {
    let (mut x, mut y) = (a, b);
    while y != 0 {
        (x, y) = (y, x % y);
    }
    a / x * b
}

/// Uniform omega marginal on `v_range`; `n_eta` sampled positions per node.
fn field_from_config(cfg: &RunConfig, seed: u64) -> AnyResult<PseudoInverseField> {
    let spec = flocklab::harness::InitSpec {
        n: cfg.m_nodes * cfg.n_eta,
        ..cfg.init_spec(seed)?
    };
    let (x, _) = sample_columns(&spec, "omega")?;
    let samples: Vec<Vec<f64>> = x.chunks(cfg.n_eta).map(<[f64]>::to_vec).collect();
    let flat = |_: f64| 1.0;
    Ok(discretize_initial(
        OmegaSpec::Density {
            lo: cfg.v_range.0,
            hi: cfg.v_range.1,
            density: &flat,
        },
        PositionProfile::Samples(samples),
        cfg.m_nodes,
        cfg.n_eta,
    )?)
}

fn kinetic(cfg: &RunConfig, kernel: &CommunicationKernel, out: &mut Output<'_>) -> AnyResult<()> {
    let field = field_from_config(cfg, cfg.seed)?;
    let snaps = evolve_kinetic(&field, kernel, &cfg.integrator_spec(), cfg.record_every)?;
    write_field(&out.path("field_initial.csv"), &field)?;
    write_field(
        &out.path("field_final.csv"),
        &snaps.last().expect("nonempty").field,
    )?;
    let reports: Vec<_> = snaps.iter().map(|s| s.energy).collect();
    write_energy(&out.path("energy.csv"), &reports)?;
    let t: Vec<f64> = reports.iter().map(|r| r.time).collect();
    let e: Vec<f64> = reports.iter().map(|r| r.kinetic_energy_e).collect();
    out.chart("energy.svg", "kinetic energy", &t, &[("E", &e)], true)
}

fn contract(cfg: &RunConfig, kernel: &CommunicationKernel, out: &mut Output<'_>) -> AnyResult<()> {
    let f = field_from_config(cfg, cfg.seed)?;
    let g = field_from_config(cfg, cfg.seed_b())?;
    let g = g.translated(f.mean_position() - g.mean_position());
    let times = log_spaced_times(cfg.t_end, cfg.sample_times);
    let table = contraction_experiment(&f, &g, kernel, cfg.p, &cfg.integrator_spec(), &times)?;
    out.table(&table, "contraction")?;
    let w = table.column("W_t").unwrap_or_default().to_vec();
    let b = table.column("bound").unwrap_or_default().to_vec();
    out.chart(
        "contraction.svg",
        "modified Wasserstein distance",
        &times,
        &[("W_t", &w), ("bound", &b)],
        true,
    )
}

fn run_verify(out: &mut Output<'_>) -> AnyResult<Vec<&'static str>> {
    let checks = verify::run_suite();
    let mut text = String::from("check,passed,detail\n");
    for c in &checks {
        text.push_str(&format!(
            "{},{},\"{}\"\n",
            c.name,
            c.passed,
            c.detail.replace('"', "'")
        ));
        eprintln!(
            "{:<30} {} {}",
            c.name,
            if c.passed { "ok" } else { "FAIL" },
            c.detail
        );
    }
    write_text(&out.path("verify.csv"), &text)?;
    Ok(checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect())
}
