//! Chained Monte-Carlo trials and their report.

use std::io::Write;

use serde::Serialize;
use vfm_core::{
    fmt_sig9, run_observed, wrap_angle, Controller, ControllerParams, GoalState, ObjectState,
    Outcome, Phase, RunSummary, SimConfig,
};

use crate::scenario::Resolved;

/// Rounds to the 9 significant digits written to CSV.
pub fn round9(v: f64) -> f64 {
    if v.is_finite() {
        fmt_sig9(v).parse().expect("fmt_sig9 output parses")
    } else {
        v
    }
}

/// Per-trial CSV header; errors in mm and deg, times in s, goal in m and rad.
pub const TRIAL_HEADER: &str = "arm,trial,seed,goal_r_m,goal_phi_rad,goal_psi_rad,outcome,pos_err_mm,ori_err_deg,\
togoal_drift_deg,within_tol,sim_time_s,t_to_com_s,t_spin_up_radius_s,t_kick_s,t_rotate_s,t_return_to_com_s,\
t_depart_origin_s,t_to_goal_s";

/// Phases with a time column, in CSV order.
pub const TIMED_PHASES: [Phase; 7] = [
    Phase::ToCom,
    Phase::SpinUpRadius,
    Phase::Kick,
    Phase::Rotate,
    Phase::ReturnToCom,
    Phase::DepartOrigin,
    Phase::ToGoal,
];

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub goal: GoalState<f64>,
    pub outcome: String,
    pub pos_err_mm: f64,
    pub ori_err_deg: f64,
    /// Change of the true orientation while in ToGoal.
    pub togoal_drift_deg: f64,
    pub within_tol: bool,
    pub sim_time_s: f64,
    pub phase_time_s: [f64; 7],
}

impl TrialRow {
    pub fn reached(&self) -> bool {
        self.outcome == "reached"
    }

    fn write_csv<W: Write>(&self, arm: &str, w: &mut W) -> std::io::Result<()> {
        let g = &self.goal;
        write!(
            w,
            "{arm},{},{},{},{},{},{},{},{},{},{},{}",
            self.trial,
            self.seed,
            fmt_sig9(g.r_g),
            fmt_sig9(g.phi_g),
            fmt_sig9(g.psi_g),
            self.outcome,
            fmt_sig9(self.pos_err_mm),
            fmt_sig9(self.ori_err_deg),
            fmt_sig9(self.togoal_drift_deg),
            u8::from(self.within_tol),
            fmt_sig9(self.sim_time_s),
        )?;
        for t in self.phase_time_s {
            write!(w, ",{}", fmt_sig9(t))?;
        }
        writeln!(w)
    }
}

/// Outcome of one closed-loop episode plus the ToGoal drift.
pub struct Trial {
    pub summary: RunSummary<f64>,
    pub togoal_drift: f64,
}

/// Runs one goal from `initial`, observing the ToGoal orientation drift.
pub fn run_trial(
    resolved: &Resolved,
    controller: &mut Controller<f64>,
    initial: ObjectState<f64>,
    goal: &GoalState<f64>,
    cfg: &SimConfig<f64>,
    mut observer: impl FnMut(&vfm_core::Sample<f64>),
) -> Trial {
    let mut start: Option<f64> = None;
    let summary = run_observed(controller, initial, goal, &resolved.plant, cfg, |s| {
        if s.phase == Phase::ToGoal && start.is_none() {
            start = Some(s.truth.psi);
        }
        observer(s);
    });
    let togoal_drift = start.map_or(0.0, |a| wrap_angle(summary.final_state.psi - a).abs());
    Trial {
        summary,
        togoal_drift,
    }
}

pub fn final_errors(state: &ObjectState<f64>, goal: &GoalState<f64>) -> (f64, f64) {
    (
        state.distance_to(goal.r_g, goal.phi_g),
        wrap_angle(state.psi - goal.psi_g).abs(),
    )
}

/// Trials chained from each other's end state; a faulted trial sends the
/// next one back to the nominal initial state.
pub fn run_chain(
    resolved: &Resolved,
    params: ControllerParams<f64>,
    goals: &[GoalState<f64>],
    base_seed: u64,
) -> Vec<TrialRow> {
    let mut controller = Controller::new(params).expect("controller parameters validated on load");
    let mut state = resolved.initial;
    let mut rows = Vec::with_capacity(goals.len());
    for (i, goal) in goals.iter().enumerate() {
        let seed = base_seed.wrapping_add(i as u64);
        let cfg = SimConfig {
            rng_seed: seed,
            ..resolved.sim
        };
        let trial = run_trial(resolved, &mut controller, state, goal, &cfg, |_| {});
        let s = &trial.summary;
        let (pos, ori) = final_errors(&s.final_state, goal);
        let mut phase_time_s = [0.0; 7];
        for (k, p) in TIMED_PHASES.iter().enumerate() {
            phase_time_s[k] = round9(s.phase_time[p.index()]);
        }
        let pos_err_mm = round9(pos * 1e3);
        let ori_err_deg = round9(ori.to_degrees());
        rows.push(TrialRow {
            trial: i,
            seed,
            goal: GoalState {
                r_g: round9(goal.r_g),
                phi_g: round9(goal.phi_g),
                psi_g: round9(goal.psi_g),
            },
            outcome: s.outcome.label().to_string(),
            pos_err_mm,
            ori_err_deg,
            togoal_drift_deg: round9(trial.togoal_drift.to_degrees()),
            within_tol: pos <= params.eps_r && ori <= params.eps_psi,
            sim_time_s: round9(s.sim_time),
            phase_time_s,
        });
        state = match s.outcome {
            Outcome::Fault(_) => resolved.initial,
            _ => ObjectState::at_rest(s.final_state.x, s.final_state.y, s.final_state.psi),
        };
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population statistics; a single sample has std 0.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }

    fn rounded(self) -> Self {
        Self {
            mean: round9(self.mean),
            std: round9(self.std),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub to_com: f64,
    pub spin_up_radius: f64,
    pub kick: f64,
    pub rotate: f64,
    pub return_to_com: f64,
    pub depart_origin: f64,
    pub to_goal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmStats {
    pub trials: usize,
    pub reached: usize,
    pub within_tolerance: usize,
    pub timeouts: usize,
    pub faults: usize,
    /// Error statistics over reached trials; a dropped object has no final pose.
    pub position_error_mm: MeanStd,
    pub orientation_error_deg: MeanStd,
    pub togoal_drift_deg: MeanStd,
    /// Same errors over every trial, faults included.
    pub all_position_error_mm: MeanStd,
    pub all_orientation_error_deg: MeanStd,
    pub sim_time_s: MeanStd,
    pub phase_time_mean_s: PhaseTimes,
}

impl ArmStats {
    /// Unrounded statistics of `rows`.
    pub fn exact(rows: &[TrialRow]) -> Self {
        let reached = || rows.iter().filter(|r| r.reached());
        let mean_phase = |k: usize| MeanStd::of(rows.iter().map(|r| r.phase_time_s[k])).mean;
        Self {
            trials: rows.len(),
            reached: rows.iter().filter(|r| r.reached()).count(),
            within_tolerance: rows.iter().filter(|r| r.within_tol).count(),
            timeouts: rows.iter().filter(|r| r.outcome == "timeout").count(),
            faults: rows.iter().filter(|r| r.outcome == "fault").count(),
            position_error_mm: MeanStd::of(reached().map(|r| r.pos_err_mm)),
            orientation_error_deg: MeanStd::of(reached().map(|r| r.ori_err_deg)),
            togoal_drift_deg: MeanStd::of(reached().map(|r| r.togoal_drift_deg)),
            all_position_error_mm: MeanStd::of(rows.iter().map(|r| r.pos_err_mm)),
            all_orientation_error_deg: MeanStd::of(rows.iter().map(|r| r.ori_err_deg)),
            sim_time_s: MeanStd::of(rows.iter().map(|r| r.sim_time_s)),
            phase_time_mean_s: PhaseTimes {
                to_com: mean_phase(0),
                spin_up_radius: mean_phase(1),
                kick: mean_phase(2),
                rotate: mean_phase(3),
                return_to_com: mean_phase(4),
                depart_origin: mean_phase(5),
                to_goal: mean_phase(6),
            },
        }
    }

    fn rounded(&self) -> Self {
        let p = &self.phase_time_mean_s;
        Self {
            position_error_mm: self.position_error_mm.rounded(),
            orientation_error_deg: self.orientation_error_deg.rounded(),
            togoal_drift_deg: self.togoal_drift_deg.rounded(),
            all_position_error_mm: self.all_position_error_mm.rounded(),
            all_orientation_error_deg: self.all_orientation_error_deg.rounded(),
            sim_time_s: self.sim_time_s.rounded(),
            phase_time_mean_s: PhaseTimes {
                to_com: round9(p.to_com),
                spin_up_radius: round9(p.spin_up_radius),
                kick: round9(p.kick),
                rotate: round9(p.rotate),
                return_to_com: round9(p.return_to_com),
                depart_origin: round9(p.depart_origin),
                to_goal: round9(p.to_goal),
            },
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub label: String,
    pub duty_fraction: f64,
    pub rows: Vec<TrialRow>,
    /// Unrounded aggregates of `rows`.
    pub stats: ArmStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedComparison {
    /// Continuous-arm mean orientation error over duty-arm mean.
    pub orientation_ratio: f64,
    pub duty_better: bool,
    /// Among pairs reached in both arms, the fraction whose ToGoal drift is
    /// strictly lower with the duty gate.
    pub drift_pairs_duty_lower: f64,
    pub drift_pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub arms: Vec<Arm>,
    pub paired: Option<PairedComparison>,
}

pub const DUTY_ARM: &str = "duty";
pub const CONTINUOUS_ARM: &str = "continuous";

impl BenchReport {
    pub fn arm(&self, label: &str) -> Option<&Arm> {
        self.arms.iter().find(|a| a.label == label)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRIAL_HEADER}")?;
        for arm in &self.arms {
            for r in &arm.rows {
                r.write_csv(&arm.label, &mut w)?;
            }
        }
        Ok(())
    }

    pub fn csv_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_csv(&mut out).expect("writing to memory");
        out
    }

    /// Recomputes every aggregate from the emitted CSV and compares it to
    /// the report to `tol` (absolute on values whose magnitude is below 1,
    /// relative above).
    pub fn verify_against_csv(&self, csv: &[u8], tol: f64) -> Result<(), String> {
        let mut reader = csv::Reader::from_reader(csv);
        let headers = reader.headers().map_err(|e| e.to_string())?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| format!("column {name} missing"))
        };
        let (c_arm, c_out, c_pos, c_ori, c_drift, c_tol, c_sim) = (
            col("arm")?,
            col("outcome")?,
            col("pos_err_mm")?,
            col("ori_err_deg")?,
            col("togoal_drift_deg")?,
            col("within_tol")?,
            col("sim_time_s")?,
        );
        let c_phase = col("t_to_com_s")?;
        let mut records = Vec::new();
        for rec in reader.records() {
            records.push(rec.map_err(|e| e.to_string())?);
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{s}: {e}"));
        for arm in &self.arms {
            let mut rows = Vec::new();
            for rec in records.iter().filter(|r| &r[c_arm] == arm.label.as_str()) {
                let mut phase_time_s = [0.0; 7];
                for (k, t) in phase_time_s.iter_mut().enumerate() {
                    *t = num(&rec[c_phase + k])?;
                }
                rows.push(TrialRow {
                    trial: 0,
                    seed: 0,
                    goal: GoalState {
                        r_g: 0.0,
                        phi_g: 0.0,
                        psi_g: 0.0,
                    },
                    outcome: rec[c_out].to_string(),
                    pos_err_mm: num(&rec[c_pos])?,
                    ori_err_deg: num(&rec[c_ori])?,
                    togoal_drift_deg: num(&rec[c_drift])?,
                    within_tol: &rec[c_tol] == "1",
                    sim_time_s: num(&rec[c_sim])?,
                    phase_time_s,
                });
            }
            let a = ArmStats::exact(&rows);
            let b = &arm.stats;
            let counts = [
                (a.trials, b.trials, "trials"),
                (a.reached, b.reached, "reached"),
                (a.within_tolerance, b.within_tolerance, "within_tolerance"),
                (a.timeouts, b.timeouts, "timeouts"),
                (a.faults, b.faults, "faults"),
            ];
            for (x, y, name) in counts {
                if x != y {
                    return Err(format!("{}: {name} {x} != {y}", arm.label));
                }
            }
            let (pa, pb) = (&a.phase_time_mean_s, &b.phase_time_mean_s);
            let values = [
                (
                    a.position_error_mm.mean,
                    b.position_error_mm.mean,
                    "position mean",
                ),
                (
                    a.position_error_mm.std,
                    b.position_error_mm.std,
                    "position std",
                ),
                (
                    a.orientation_error_deg.mean,
                    b.orientation_error_deg.mean,
                    "orientation mean",
                ),
                (
                    a.orientation_error_deg.std,
                    b.orientation_error_deg.std,
                    "orientation std",
                ),
                (
                    a.togoal_drift_deg.mean,
                    b.togoal_drift_deg.mean,
                    "drift mean",
                ),
                (a.togoal_drift_deg.std, b.togoal_drift_deg.std, "drift std"),
                (
                    a.all_position_error_mm.mean,
                    b.all_position_error_mm.mean,
                    "all position mean",
                ),
                (
                    a.all_position_error_mm.std,
                    b.all_position_error_mm.std,
                    "all position std",
                ),
                (
                    a.all_orientation_error_deg.mean,
                    b.all_orientation_error_deg.mean,
                    "all orientation mean",
                ),
                (
                    a.all_orientation_error_deg.std,
                    b.all_orientation_error_deg.std,
                    "all orientation std",
                ),
                (a.sim_time_s.std, b.sim_time_s.std, "sim time std"),
                (a.sim_time_s.mean, b.sim_time_s.mean, "sim time mean"),
                (pa.to_com, pb.to_com, "to_com"),
                (pa.spin_up_radius, pb.spin_up_radius, "spin_up_radius"),
                (pa.kick, pb.kick, "kick"),
                (pa.rotate, pb.rotate, "rotate"),
                (pa.return_to_com, pb.return_to_com, "return_to_com"),
                (pa.depart_origin, pb.depart_origin, "depart_origin"),
                (pa.to_goal, pb.to_goal, "to_goal"),
            ];
            for (x, y, name) in values {
                let scale = x.abs().max(y.abs()).max(1.0);
                if !((x - y).abs() <= tol * scale) {
                    return Err(format!("{}: {name} {x} != {y}", arm.label));
                }
            }
        }
        Ok(())
    }
}

/// Runs `goals` once per arm; arms run on separate threads.
pub fn run_bench(
    resolved: &Resolved,
    goals: &[GoalState<f64>],
    base_seed: u64,
    paired: bool,
) -> BenchReport {
    let arms: Vec<(String, f64)> = if paired {
        vec![
            (DUTY_ARM.to_string(), 0.5),
            (CONTINUOUS_ARM.to_string(), 1.0),
        ]
    } else {
        vec![("scenario".to_string(), resolved.controller.duty_fraction)]
    };
    let arms: Vec<Arm> = std::thread::scope(|scope| {
        let handles: Vec<_> = arms
            .into_iter()
            .map(|(label, duty)| {
                scope.spawn(move || {
                    let params = ControllerParams {
                        duty_fraction: duty,
                        ..resolved.controller
                    };
                    let rows = run_chain(resolved, params, goals, base_seed);
                    let stats = ArmStats::exact(&rows);
                    Arm {
                        label,
                        duty_fraction: duty,
                        rows,
                        stats,
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("bench worker panicked"))
            .collect()
    });

    let paired = paired.then(|| {
        let (d, c) = (&arms[0], &arms[1]);
        let (dm, cm) = (
            d.stats.orientation_error_deg.mean,
            c.stats.orientation_error_deg.mean,
        );
        let pairs: Vec<_> = d
            .rows
            .iter()
            .zip(&c.rows)
            .filter(|(a, b)| a.reached() && b.reached())
            .collect();
        let lower = pairs
            .iter()
            .filter(|(a, b)| a.togoal_drift_deg < b.togoal_drift_deg)
            .count();
        PairedComparison {
            orientation_ratio: cm / dm,
            duty_better: dm < cm,
            drift_pairs_duty_lower: lower as f64 / pairs.len().max(1) as f64,
            drift_pairs: pairs.len(),
        }
    });
    BenchReport { arms, paired }
}

#[derive(Debug, Serialize)]
pub struct ArmSummary {
    pub label: String,
    pub duty_fraction: f64,
    #[serde(flatten)]
    pub stats: ArmStats,
}

impl ArmSummary {
    pub fn of(arm: &Arm) -> Self {
        Self {
            label: arm.label.clone(),
            duty_fraction: arm.duty_fraction,
            stats: arm.stats.rounded(),
        }
    }
}

pub fn rounded_comparison(p: &PairedComparison) -> PairedComparison {
    PairedComparison {
        orientation_ratio: round9(p.orientation_ratio),
        drift_pairs_duty_lower: round9(p.drift_pairs_duty_lower),
        ..p.clone()
    }
}
