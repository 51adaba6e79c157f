use std::path::Path;

use glovekit::anthro::{
    builtin_reference_stats, builtin_sample_stats, coverage_summary, coverage_table, load_reference_stats,
    load_sample_stats, write_coverage_csv, REFERENCE_CSV, SAMPLE_CSV,
};
use glovekit::config::Config;
use glovekit::controller::render_profile;
use glovekit::handmodel::{
    attachment_point, builtin_specs, forward_kinematics, load_finger_specs, AttachmentMode, FingerSpec, JointAngles,
    BUILTIN_FINGERS,
};
use glovekit::linksearch::{grid_report, search, select_shortest, SearchOptions};
use glovekit::sim::{
    run_pick_place, run_rng, scripted_pick_place, softness_sessions, Event, GraspSpec, PickPlaceTrajectory,
    ProbeTrajectory, SoftnessRig,
};
use glovekit::stats::{binomial_one_sided, holm_correct, load_p_values, wilcoxon_signed_rank, PairedSample, TestResult, WilcoxonOptions};
use glovekit::transmission::clutch_engage;
use glovekit::{Error, Result};
use serde::Serialize;

use crate::args::*;
use crate::manifest::Run;

pub struct Context<'a> {
    pub cli: &'a Cli,
    pub config: Config,
}

impl<'a> Context<'a> {
    pub fn new(cli: &'a Cli) -> Result<Self> {
        let config = match &cli.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        Ok(Self { cli, config })
    }

    fn run(&self, command: &str, seeded: bool) -> Result<Run> {
        let mut run = Run::new(&self.cli.out, command, self.cli.config.as_deref(), seeded.then_some(self.cli.seed))?;
        if let Some(p) = &self.cli.config {
            run.read_dataset("config", p)?;
        }
        Ok(run)
    }
}

fn csv_bytes<F>(write: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
{
    let mut wtr = csv::Writer::from_writer(Vec::new());
    write(&mut wtr)?;
    wtr.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn to_bytes<F>(write: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn finger_specs(run: &mut Run, dataset: Option<&Path>) -> Result<Vec<FingerSpec<f64>>> {
    match dataset {
        Some(p) => {
            let bytes = run.read_dataset("fingers", p)?;
            load_finger_specs(bytes.as_slice())
        }
        None => {
            run.dataset("fingers", "builtin", BUILTIN_FINGERS.as_bytes());
            Ok(builtin_specs())
        }
    }
}

#[derive(Serialize)]
struct Selection<'a> {
    finger: glovekit::handmodel::Finger,
    options: &'a SearchOptions<f64>,
    selected: Option<glovekit::LinkageConfig>,
    report: &'a glovekit::linksearch::GridReport<f64>,
}

pub fn design(ctx: &Context, args: &DesignArgs) -> Result<()> {
    let mut run = ctx.run("design", false)?;
    let specs = finger_specs(&mut run, args.dataset.as_deref())?;
    let opts = SearchOptions {
        length_min: args.length_min,
        length_max: args.length_max,
        length_step: args.length_step,
        arch_step: args.arch_step,
        arch_max: args.arch_max,
        clearance: args.clearance,
        angle_step: args.angle_step,
        branch: args.branch,
    };
    run.parameters(&opts)?;
    let grid = search(args.finger, &specs, &opts)?;
    let report = grid_report(&grid, &specs)?;
    let selected = select_shortest(&grid);
    let finger = args.finger;
    run.write(&format!("grid_{finger}.csv"), &to_bytes(|b| grid.write_csv(b))?)?;
    run.write_json(
        &format!("selection_{finger}.json"),
        &Selection { finger, options: &opts, selected: selected.as_ref().ok().copied(), report: &report },
    )?;
    let text = format!("{}\n{report}", grid.ascii_table());
    run.write(&format!("report_{finger}.txt"), text.as_bytes())?;
    run.finish()?;
    print!("{report}");
    selected.map(|_| ())
}

pub fn coverage(ctx: &Context, args: &CoverageArgs) -> Result<()> {
    let mut run = ctx.run("coverage", false)?;
    let (samples, references) = match (&args.sample, &args.reference, args.builtin) {
        (_, _, true) => {
            run.dataset("sample", "builtin", SAMPLE_CSV.as_bytes());
            run.dataset("reference", "builtin", REFERENCE_CSV.as_bytes());
            (builtin_sample_stats(), builtin_reference_stats())
        }
        (Some(s), Some(r), false) => {
            let s = run.read_dataset("sample", s)?;
            let r = run.read_dataset("reference", r)?;
            (load_sample_stats(s.as_slice())?, load_reference_stats(r.as_slice())?)
        }
        _ => return Err(Error::usage("coverage needs --sample and --reference, or --builtin")),
    };
    let rows = coverage_table(&samples, &references)?;
    let (mean, sd) = coverage_summary(&rows)?;
    run.write("coverage.csv", &to_bytes(|b| write_coverage_csv(b, &rows))?)?;
    run.finish()?;
    println!("{} measurements, coverage {mean:.2} +/- {sd:.2} %", rows.len());
    Ok(())
}

#[derive(Serialize)]
struct PickPlaceRow {
    trial: u64,
    goal: String,
    tolerance: f64,
    result: String,
    completion_ms: Option<f64>,
    grasp_distance: Option<f64>,
    brake_latency_ms: Option<f64>,
}

pub fn pickplace(ctx: &Context, args: &PickPlaceArgs) -> Result<()> {
    let mut run = ctx.run("simulate pickplace", true)?;
    run.parameters(&serde_json::json!({
        "goal": args.goal,
        "tolerances": args.tolerances,
        "deviation": args.deviation,
        "grasp_distance": args.grasp_distance,
        "dt_ms": args.dt_ms,
        "trials": args.trials,
    }))?;
    let scene = ctx.config.scene;
    let trajectory = match &args.trajectory {
        Some(p) => PickPlaceTrajectory::load_csv(run.read_dataset("trajectory", p)?.as_slice())?,
        None => {
            let t = scripted_pick_place(&scene, args.goal, args.grasp_distance, args.deviation, args.dt_ms);
            run.write("pickplace_trajectory.csv", &to_bytes(|b| t.write_csv(b))?)?;
            t
        }
    };
    let tolerances = if args.tolerances.is_empty() { GraspSpec::STUDY_TOLERANCES.to_vec() } else { args.tolerances.clone() };
    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for trial in 0..args.trials {
        for &tol in &tolerances {
            let grasp = GraspSpec::new(tol)?;
            let mut rng = run_rng(ctx.cli.seed, trial);
            let outcome = run_pick_place(&trajectory, &grasp, args.goal, &scene, &ctx.config.brake, &mut rng)?;
            let brake_latency_ms = outcome.events.iter().find_map(|e| match e {
                Event::BrakeEngaged { latency_ms, .. } => Some(*latency_ms),
                _ => None,
            });
            rows.push(PickPlaceRow {
                trial,
                goal: args.goal.to_string(),
                tolerance: tol,
                result: outcome.result.to_string(),
                completion_ms: outcome.completion_ms,
                grasp_distance: outcome.grasp_distance,
                brake_latency_ms,
            });
            println!("trial {trial} tolerance {tol}: {}", outcome.result);
            outcomes.push(serde_json::json!({ "trial": trial, "tolerance": tol, "outcome": outcome }));
        }
    }
    run.write(
        "pickplace_outcomes.csv",
        &csv_bytes(|w| {
            for r in &rows {
                w.serialize(r)?;
            }
            Ok(())
        })?,
    )?;
    run.write_json("pickplace_events.json", &outcomes)?;
    run.finish()?;
    Ok(())
}

#[derive(Serialize)]
struct SoftnessRow {
    session: u64,
    trial: usize,
    pair: String,
    left: String,
    right: String,
    catch_trial: bool,
    answer: Option<String>,
    left_mean_rendered: f64,
    right_mean_rendered: f64,
    left_theta_clutch: Option<f64>,
    right_theta_clutch: Option<f64>,
}

pub fn softness(ctx: &Context, args: &SoftnessArgs) -> Result<()> {
    let mut run = ctx.run("simulate softness", true)?;
    run.parameters(&serde_json::json!({
        "levels": ctx.config.softness,
        "reps": args.reps,
        "sessions": args.sessions,
        "depth": args.depth,
        "approach_ms": args.approach_ms,
        "press_ms": args.press_ms,
        "dt_ms": args.dt_ms,
    }))?;
    let probe = match &args.probe {
        Some(p) => ProbeTrajectory::load_csv(run.read_dataset("probe", p)?.as_slice())?,
        None => ProbeTrajectory::press(args.depth, args.approach_ms, args.press_ms, args.dt_ms),
    };
    let rig = SoftnessRig { clutch: ctx.config.clutch, servo: ctx.config.servo, ..SoftnessRig::default() };
    let sessions = softness_sessions(&rig, &ctx.config.softness, &probe, args.reps, ctx.cli.seed, args.sessions)?;
    let mut rows = Vec::new();
    for s in &sessions {
        for t in &s.trials {
            let (l, r) = (&t.trial.left, &t.trial.right);
            rows.push(SoftnessRow {
                session: s.run,
                trial: t.index,
                pair: format!("{}{}", t.pair[0], t.pair[1]),
                left: l.level.label.to_string(),
                right: r.level.label.to_string(),
                catch_trial: t.trial.catch_trial,
                answer: t.trial.answer.map(|a| format!("{a:?}").to_lowercase()),
                left_mean_rendered: l.mean_rendered(),
                right_mean_rendered: r.mean_rendered(),
                left_theta_clutch: l.engagement.map(|e| e.clutch.theta_clutch),
                right_theta_clutch: r.engagement.map(|e| e.clutch.theta_clutch),
            });
        }
        run.write(&format!("softness_traces_{}.csv", s.run), &to_bytes(|b| s.write_traces_csv(b))?)?;
        match s.correct_rate() {
            Some(rate) => println!("session {}: {} trials, correct {:.2}", s.run, s.trials.len(), rate),
            None => println!("session {}: {} trials, no answers", s.run, s.trials.len()),
        }
    }
    run.write(
        "softness_trials.csv",
        &csv_bytes(|w| {
            for r in &rows {
                w.serialize(r)?;
            }
            Ok(())
        })?,
    )?;
    run.finish()?;
    Ok(())
}

pub fn clutch_sweep(ctx: &Context, args: &SweepArgs) -> Result<()> {
    if args.resolution.is_nan() || args.resolution <= 0.0 {
        return Err(Error::usage("--resolution must be positive"));
    }
    let mut run = ctx.run("clutch sweep", true)?;
    run.parameters(&serde_json::json!({ "resolution": args.resolution, "clutch": ctx.config.clutch }))?;
    let model = &ctx.config.clutch;
    let count = (model.ratchet_step() / args.resolution).round().max(1.0) as usize;
    let mut rng = run_rng(ctx.cli.seed, 0);
    let rows: Vec<_> = (0..count).map(|i| clutch_engage(model, i as f64 * args.resolution, &mut rng)).collect();
    let bytes = csv_bytes(|w| {
        w.write_record(["phase_deg", "theta_align_deg", "theta_clutch_deg", "latency_ms"])?;
        for e in &rows {
            w.write_record([e.phase, e.theta_align, e.theta_clutch, e.latency_ms].map(|v| v.to_string()))?;
        }
        Ok(())
    })?;
    run.write("clutch_sweep.csv", &bytes)?;
    run.finish()?;
    let n = rows.len() as f64;
    println!(
        "{} phases: mean clutching angle {:.3} deg, mean latency {:.2} ms",
        rows.len(),
        rows.iter().map(|e| e.theta_clutch).sum::<f64>() / n,
        rows.iter().map(|e| e.latency_ms).sum::<f64>() / n
    );
    Ok(())
}

pub fn render(ctx: &Context, args: &RenderArgs) -> Result<()> {
    let mut run = ctx.run("render", false)?;
    let level = ctx.config.softness.level(args.level);
    run.parameters(&serde_json::json!({ "level": level, "theta_eq": args.theta_eq, "servo": ctx.config.servo }))?;
    let probe = ProbeTrajectory::load_csv(run.read_dataset("trajectory", &args.trajectory)?.as_slice())?;
    let commands = render_profile(&level, args.theta_eq, &probe.s)?;
    let bytes = csv_bytes(|w| {
        w.write_record(["t_ms", "s", "command", "saturated"])?;
        for ((t, s), u) in probe.t_ms.iter().zip(&probe.s).zip(&commands) {
            let out = ctx.config.servo.apply(*u);
            w.write_record([t.to_string(), s.to_string(), out.angle.to_string(), out.saturated.to_string()])?;
        }
        Ok(())
    })?;
    run.write(&format!("render_{}.csv", args.level), &bytes)?;
    run.finish()?;
    Ok(())
}

fn write_results(run: &mut Run, stem: &str, results: &[TestResult]) -> Result<()> {
    run.write(
        &format!("{stem}.csv"),
        &csv_bytes(|w| {
            for r in results {
                w.serialize(r)?;
            }
            Ok(())
        })?,
    )?;
    run.write_json(&format!("{stem}.json"), &results)?;
    Ok(())
}

pub fn wilcoxon(ctx: &Context, args: &WilcoxonArgs) -> Result<()> {
    let mut run = ctx.run("stats wilcoxon", false)?;
    let opts = WilcoxonOptions {
        continuity_correction: !args.no_continuity_correction,
        tie_correction: !args.no_tie_correction,
        exact_max_n: args.exact_max_n,
    };
    run.parameters(&serde_json::json!({ "side": args.side, "options": opts }))?;
    let sample = PairedSample::load_csv(run.read_dataset("input", &args.input)?.as_slice())?;
    let r = wilcoxon_signed_rank(&sample, args.side, &opts)?;
    write_results(&mut run, "wilcoxon", &[r])?;
    run.finish()?;
    println!("W = {}, z = {:.3}, p = {:.3e}, r = {:.3}, n = {}", r.statistic, r.z, r.p_raw, r.effect, r.n_effective);
    Ok(())
}

pub fn binomial(ctx: &Context, args: &BinomialArgs) -> Result<()> {
    let mut run = ctx.run("stats binomial", false)?;
    run.parameters(&serde_json::json!({ "k": args.k, "n": args.n, "p0": args.p0 }))?;
    let r = binomial_one_sided(args.k, args.n, args.p0)?;
    write_results(&mut run, "binomial", &[r])?;
    run.finish()?;
    println!("proportion = {:.2}, p = {:.3e}, h = {:.2}", r.proportion.unwrap_or(f64::NAN), r.p_raw, r.effect);
    Ok(())
}

pub fn holm(ctx: &Context, args: &HolmArgs) -> Result<()> {
    let mut run = ctx.run("stats holm", false)?;
    let labelled = load_p_values(run.read_dataset("input", &args.input)?.as_slice())?;
    let raw: Vec<f64> = labelled.iter().map(|(_, p)| *p).collect();
    let adjusted = holm_correct(&raw)?;
    let bytes = csv_bytes(|w| {
        w.write_record(["label", "p_raw", "p_adjusted"])?;
        for ((label, p), a) in labelled.iter().zip(&adjusted) {
            w.write_record([label.clone(), p.to_string(), a.to_string()])?;
        }
        Ok(())
    })?;
    run.write("holm.csv", &bytes)?;
    run.finish()?;
    for ((label, p), a) in labelled.iter().zip(&adjusted) {
        println!("{label}: {p} -> {a}");
    }
    Ok(())
}

pub fn fk(ctx: &Context, args: &FkArgs) -> Result<()> {
    let mut run = ctx.run("fk", false)?;
    run.parameters(&serde_json::json!({
        "finger": args.finger,
        "size": args.size,
        "angles": args.angles,
        "angle_step": args.angle_step,
    }))?;
    let specs = finger_specs(&mut run, args.dataset.as_deref())?;
    let spec = specs
        .iter()
        .find(|s| s.finger == args.finger && s.size == args.size)
        .ok_or_else(|| Error::data(format!("dataset has no {} {} finger", args.size, args.finger)))?;
    let poses = match &args.angles {
        Some(q) if q.len() == 3 => vec![JointAngles::new(q[0], q[1], q[2])],
        Some(q) => return Err(Error::usage(format!("--angles needs three values, got {}", q.len()))),
        None => spec.angle_grid(args.angle_step),
    };
    let bytes = csv_bytes(|w| {
        w.write_record(["q1_deg", "q2_deg", "q3_deg", "point", "x_mm", "y_mm"])?;
        for q in &poses {
            let pose = forward_kinematics(spec, q)?;
            let mut points: Vec<(String, _)> =
                ["joint1", "joint2", "joint3", "tip"].iter().zip(pose.joints).map(|(n, p)| (n.to_string(), p)).collect();
            for mode in AttachmentMode::ALL {
                points.push((format!("attach_{mode}"), attachment_point(&pose, mode).point));
            }
            for (name, p) in points {
                w.write_record([q.q1.to_string(), q.q2.to_string(), q.q3.to_string(), name, p.x.to_string(), p.y.to_string()])?;
            }
        }
        Ok(())
    })?;
    run.write(&format!("fk_{}_{}.csv", args.finger, args.size), &bytes)?;
    run.finish()?;
    Ok(())
}
