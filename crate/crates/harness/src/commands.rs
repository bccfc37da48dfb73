//! The four CLI verbs. Each writes its files under `out` and returns the
//! process exit code.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use vfm_core::{
    fmt_sig9, measure_orbit, min_slip_frequency, slip_feasible, tilt_force_at, Controller,
    GoalState, ObjectState, Outcome, SimConfig,
};

use crate::bench::{
    self, round9, rounded_comparison, ArmSummary, BenchReport, CONTINUOUS_ARM, DUTY_ARM,
};
use crate::scenario::{self, Loaded, Override};
use crate::{HarnessError, EXIT_CHECK, EXIT_FAULT, EXIT_OK};

/// Flags shared by every verb.
#[derive(Debug, Clone, Default)]
pub struct CommonOptions {
    pub scenario: PathBuf,
    /// Overrides both `sim.seed` and `goals.seed`.
    pub seed: Option<u64>,
    pub out: PathBuf,
    /// `dotted.key=value` overrides, applied in order.
    pub sets: Vec<String>,
}

impl CommonOptions {
    pub fn load(&self) -> Result<Loaded, HarnessError> {
        let mut sets = Vec::new();
        if let Some(s) = self.seed {
            sets.push(format!("sim.seed={s}"));
            sets.push(format!("goals.seed={s}"));
        }
        sets.extend(self.sets.iter().cloned());
        Ok(scenario::load(&self.scenario, &sets)?)
    }
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Output {
        path: dir.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    fs::write(path, bytes).map_err(|source| HarnessError::Output {
        path: path.display().to_string(),
        source,
    })
}

fn to_toml<T: Serialize>(v: &T) -> String {
    toml::to_string(v).expect("summary is representable in TOML")
}

#[derive(Debug, Serialize)]
pub struct EventRecord {
    pub t: f64,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub index: usize,
    pub trajectory: String,
    pub seed: u64,
    pub goal_r_m: f64,
    pub goal_phi_rad: f64,
    pub goal_psi_rad: f64,
    pub outcome: String,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
    pub position_error_mm: f64,
    pub orientation_error_deg: f64,
    pub sim_time_s: f64,
    pub wall_time_s: f64,
    pub events: Vec<EventRecord>,
}

#[derive(Debug, Serialize)]
pub struct SimulateSummary {
    pub scenario: String,
    pub command: String,
    pub all_reached: bool,
    pub wall_time_s: f64,
    pub overrides: Vec<Override>,
    pub runs: Vec<RunRecord>,
}

/// Goals for `simulate`: the explicit list, else `goals.count` samples.
pub fn simulate_goals(loaded: &Loaded) -> Result<Vec<GoalState<f64>>, HarnessError> {
    let s = &loaded.scenario;
    if s.goals.list.is_empty() {
        Ok(s.sample_goals(loaded.resolved.footprint_bound, s.goals.count, s.goals.seed))
    } else {
        Ok(s.listed_goals()?)
    }
}

/// One episode per goal, chained like a bench. Writes
/// `trajectory_NNN.csv` per goal and `summary.toml`.
pub fn simulate(opts: &CommonOptions) -> Result<(u8, SimulateSummary), HarnessError> {
    let loaded = opts.load()?;
    let goals = simulate_goals(&loaded)?;
    let r = &loaded.resolved;
    create_dir(&opts.out)?;
    let started = Instant::now();
    let mut controller = Controller::new(r.controller).expect("validated on load");
    let mut state = r.initial;
    let mut runs = Vec::new();
    for (i, goal) in goals.iter().enumerate() {
        let cfg = SimConfig {
            rng_seed: r.sim.rng_seed.wrapping_add(i as u64),
            ..r.sim
        };
        let mut traj = vfm_core::Trajectory::new(cfg.dt, cfg.r_origin_epsilon);
        let w = Instant::now();
        let trial = bench::run_trial(r, &mut controller, state, goal, &cfg, |s| {
            traj.samples.push(*s)
        });
        let wall = w.elapsed().as_secs_f64();
        let s = trial.summary;
        let name = format!("trajectory_{i:03}.csv");
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).expect("writing to memory");
        write_file(&opts.out.join(&name), &buf)?;
        let (pos, ori) = bench::final_errors(&s.final_state, goal);
        runs.push(RunRecord {
            index: i,
            trajectory: name,
            seed: cfg.rng_seed,
            goal_r_m: round9(goal.r_g),
            goal_phi_rad: round9(goal.phi_g),
            goal_psi_rad: round9(goal.psi_g),
            outcome: s.outcome.label().to_string(),
            detail: match &s.outcome {
                Outcome::Fault(e) => e.to_string(),
                _ => String::new(),
            },
            position_error_mm: round9(pos * 1e3),
            orientation_error_deg: round9(ori.to_degrees()),
            sim_time_s: round9(s.sim_time),
            wall_time_s: round9(wall),
            events: s
                .events
                .iter()
                .map(|e| EventRecord {
                    t: round9(e.t),
                    from: e.from.to_string(),
                    to: e.to.to_string(),
                })
                .collect(),
        });
        state = match s.outcome {
            Outcome::Fault(_) => r.initial,
            _ => ObjectState::at_rest(s.final_state.x, s.final_state.y, s.final_state.psi),
        };
    }
    let all_reached = runs.iter().all(|r| r.outcome == "reached");
    let summary = SimulateSummary {
        scenario: loaded.scenario.name.clone(),
        command: "simulate".into(),
        all_reached,
        wall_time_s: round9(started.elapsed().as_secs_f64()),
        overrides: loaded.overrides.clone(),
        runs,
    };
    write_file(&opts.out.join("summary.toml"), to_toml(&summary).as_bytes())?;
    Ok((if all_reached { EXIT_OK } else { EXIT_FAULT }, summary))
}

#[derive(Debug, Clone, Default)]
pub struct BenchOptions {
    pub common: CommonOptions,
    /// Defaults to `goals.count`.
    pub trials: Option<usize>,
    pub paired: bool,
}

#[derive(Debug, Serialize)]
pub struct BenchSummary {
    pub scenario: String,
    pub command: String,
    pub trials: usize,
    pub seed: u64,
    pub goal_seed: u64,
    pub paired: bool,
    pub wall_time_s: f64,
    pub overrides: Vec<Override>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<bench::PairedComparison>,
    pub arms: Vec<ArmSummary>,
}

/// Chained random-goal trials; `trials.csv` plus `summary.toml`.
pub fn bench(opts: &BenchOptions) -> Result<(u8, BenchReport), HarnessError> {
    let loaded = opts.common.load()?;
    let s = &loaded.scenario;
    let r = &loaded.resolved;
    let n = opts.trials.unwrap_or(s.goals.count);
    if n == 0 {
        return Err(HarnessError::Usage {
            arg: "--trials".into(),
            reason: "must be at least 1".into(),
        });
    }
    create_dir(&opts.common.out)?;
    let goals = s.sample_goals(r.footprint_bound, n, s.goals.seed);
    let started = Instant::now();
    let report = bench::run_bench(r, &goals, r.sim.rng_seed, opts.paired);
    let wall = started.elapsed().as_secs_f64();

    let csv = report.csv_bytes();
    report
        .verify_against_csv(&csv, 1e-12)
        .unwrap_or_else(|e| panic!("bench report disagrees with its CSV: {e}"));
    write_file(&opts.common.out.join("trials.csv"), &csv)?;
    let summary = BenchSummary {
        scenario: s.name.clone(),
        command: "bench".into(),
        trials: n,
        seed: r.sim.rng_seed,
        goal_seed: s.goals.seed,
        paired: opts.paired,
        wall_time_s: round9(wall),
        overrides: loaded.overrides.clone(),
        comparison: report.paired.as_ref().map(rounded_comparison),
        arms: report.arms.iter().map(ArmSummary::of).collect(),
    };
    write_file(
        &opts.common.out.join("summary.toml"),
        to_toml(&summary).as_bytes(),
    )?;

    let code = match &report.paired {
        Some(p) if !p.duty_better => EXIT_CHECK,
        _ => EXIT_OK,
    };
    Ok((code, report))
}

/// Inclusive linear grid `start:stop:count`, or a comma-separated list.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec(pub Vec<f64>);

impl std::str::FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
        if let [a, b, n] = s.split(':').collect::<Vec<_>>()[..] {
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.trim().parse().map_err(|e| format!("`{n}`: {e}"))?;
            return match n {
                0 => Err("grid needs at least one point".into()),
                1 => Ok(GridSpec(vec![a])),
                _ => Ok(GridSpec(
                    (0..n)
                        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                        .collect(),
                )),
            };
        }
        let v = s.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
        if v.is_empty() {
            return Err("empty list".into());
        }
        Ok(GridSpec(v))
    }
}

pub const DEFAULT_SWEEP_HZ: &str = "120:240:13";
pub const SWEEP_REVOLUTIONS: f64 = 5.0;
pub const SWEEP_HEADER: &str =
    "freq_hz,omega_rad_s,feasible,analytic_rate_rad_s,simulated_rate_rad_s,rel_error";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub freq_hz: f64,
    pub omega: f64,
    /// `(analytic, simulated)` orbit rate at `r_c`, or `None` when the
    /// contact cannot slip at this frequency.
    pub rates: Option<(f64, f64)>,
}

/// Orbit rate at the scenario's `r_c` for each drive frequency.
pub fn sweep_rows(loaded: &Loaded, freqs_hz: &[f64]) -> Vec<SweepRow> {
    let r = &loaded.resolved;
    let r_c = r.controller.r_c;
    freqs_hz
        .iter()
        .map(|&f| {
            let omega = f * std::f64::consts::TAU;
            let erm = r.plant.erm.with_frequency(omega);
            let feasible = slip_feasible(&erm, &r.plant.contact, &r.plant.object, r_c).feasible;
            let rates = feasible
                .then(|| measure_orbit(&r.plant, r_c, omega, r.sim.dt, SWEEP_REVOLUTIONS).ok())
                .flatten()
                .map(|m| (m.analytic_rate, m.simulated_rate));
            SweepRow {
                freq_hz: f,
                omega,
                rates,
            }
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        write!(w, "{},{},", fmt_sig9(r.freq_hz), fmt_sig9(r.omega))?;
        match r.rates {
            Some((a, s)) => writeln!(
                w,
                "1,{},{},{}",
                fmt_sig9(a),
                fmt_sig9(s),
                fmt_sig9((s - a) / a)
            )?,
            None => writeln!(w, "0,,,")?,
        }
    }
    Ok(())
}

/// Writes `sweep_freq.csv`.
pub fn sweep_freq(
    opts: &CommonOptions,
    freqs_hz: &GridSpec,
) -> Result<(u8, Vec<SweepRow>), HarnessError> {
    let loaded = opts.load()?;
    if let Some(f) = freqs_hz.0.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
        return Err(HarnessError::Usage {
            arg: "--freqs".into(),
            reason: format!("{f} Hz is not a positive frequency"),
        });
    }
    create_dir(&opts.out)?;
    let rows = sweep_rows(&loaded, &freqs_hz.0);
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf).expect("writing to memory");
    write_file(&opts.out.join("sweep_freq.csv"), &buf)?;
    Ok((EXIT_OK, rows))
}

pub const FEASIBILITY_HEADER: &str =
    "r_m,tilt_force_n,omega_star_rad_s,omega_star_hz,margin_rotate_n,margin_translate_n,feasible_rotate,feasible_translate";

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityRow {
    pub r: f64,
    pub tilt_force: f64,
    pub omega_star: f64,
    pub margin_rotate: f64,
    pub margin_translate: f64,
}

pub fn feasibility_rows(loaded: &Loaded, radii: &[f64]) -> Vec<FeasibilityRow> {
    let p = &loaded.resolved.plant;
    let c = &loaded.resolved.controller;
    let rot = p.erm.with_frequency(c.omega_rotate);
    let tr = p.erm.with_frequency(c.omega_translate);
    radii
        .iter()
        .map(|&r| FeasibilityRow {
            r,
            tilt_force: tilt_force_at(&p.object, &p.contact, r),
            omega_star: min_slip_frequency(&p.erm, &p.contact, &p.object, r),
            margin_rotate: slip_feasible(&rot, &p.contact, &p.object, r).margin,
            margin_translate: slip_feasible(&tr, &p.contact, &p.object, r).margin,
        })
        .collect()
}

pub fn write_feasibility_csv<W: Write>(rows: &[FeasibilityRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{FEASIBILITY_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            fmt_sig9(r.r),
            fmt_sig9(r.tilt_force),
            fmt_sig9(r.omega_star),
            fmt_sig9(r.omega_star / std::f64::consts::TAU),
            fmt_sig9(r.margin_rotate),
            fmt_sig9(r.margin_translate),
            u8::from(r.margin_rotate > 0.0),
            u8::from(r.margin_translate > 0.0),
        )?;
    }
    Ok(())
}

/// Writes `feasibility.csv`; the default grid spans the footprint bound in
/// 21 points.
pub fn feasibility(
    opts: &CommonOptions,
    radii: Option<&GridSpec>,
) -> Result<(u8, Vec<FeasibilityRow>), HarnessError> {
    let loaded = opts.load()?;
    let bound = loaded.resolved.footprint_bound;
    let radii = match radii {
        Some(g) => g.0.clone(),
        None => (0..21).map(|i| bound * i as f64 / 20.0).collect(),
    };
    if let Some(r) = radii.iter().find(|r| !(**r >= 0.0 && **r <= bound)) {
        return Err(HarnessError::Usage {
            arg: "--r-grid".into(),
            reason: format!("{r} m is outside the footprint bound [0, {bound}] m"),
        });
    }
    create_dir(&opts.out)?;
    let rows = feasibility_rows(&loaded, &radii);
    let mut buf = Vec::new();
    write_feasibility_csv(&rows, &mut buf).expect("writing to memory");
    write_file(&opts.out.join("feasibility.csv"), &buf)?;
    Ok((EXIT_OK, rows))
}

/// Human-readable lines printed by the CLI after a bench.
pub fn bench_digest(report: &BenchReport) -> Vec<String> {
    let mut out: Vec<String> = report
        .arms
        .iter()
        .map(|a| {
            let s = &a.stats;
            format!(
                "{:<10} duty {:.2}: pos {:.3} ± {:.3} mm, ori {:.3} ± {:.3} deg (reached); all trials pos {:.3} mm, ori {:.3} deg; reached {}/{}, within tol {}",
                a.label,
                a.duty_fraction,
                s.position_error_mm.mean,
                s.position_error_mm.std,
                s.orientation_error_deg.mean,
                s.orientation_error_deg.std,
                s.all_position_error_mm.mean,
                s.all_orientation_error_deg.mean,
                s.reached,
                s.trials,
                s.within_tolerance
            )
        })
        .collect();
    if let Some(p) = &report.paired {
        out.push(format!(
            "{CONTINUOUS_ARM}/{DUTY_ARM} orientation ratio {:.3}; duty lower drift in {:.0}% of pairs",
            p.orientation_ratio,
            p.drift_pairs_duty_lower * 100.0
        ));
    }
    out
}
