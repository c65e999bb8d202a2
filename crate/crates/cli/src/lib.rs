//! Library side of the `clonelab` binary: argument parsing, experiment
//! dispatch and report writing. Integration tests drive [`execute`] directly.

pub mod args;
pub mod error;
pub mod experiments;
pub mod report;

use std::ffi::OsString;
use std::time::Instant;

use clap::Parser;
use clonelab_core::copy_protect::{cp_pke_dec, cp_pke_enc, cp_pke_qkeygen, cp_pke_setup};
use clonelab_core::games::{check_trace, AntiPiracyConfig, GameTrace, MoeConfig};
use clonelab_core::gf2::{sample_subspace, sample_vector, CosetParams, CosetTriple};
use clonelab_core::pke::Plaintext;
use clonelab_core::rng::substream;
use clonelab_core::statevec::{hadamard_all, prepare_coset_state};
use clonelab_measure::{lemma_suite_with, measurement_lab, Api, DensityMatrix, LabConfig, MeasureParams, ProjectiveMixture};
use serde::Serialize;

use args::{
    AntiPiracyArgs, BenchArgs, CheckTraceArgs, Cli, Command, CorrectnessArgs, LabArgs, LemmasArgs, MoeArgs, OutputArgs,
    Scheme,
};
use error::{CliError, Result, EXIT_FAILED};
use experiments::games::cp_params;
use experiments::*;
use report::{Report, SummaryRow};

/// Environment variable capping the worker threads.
pub const WORKERS_ENV: &str = "CLONELAB_WORKERS";

/// Parses `args` (program name first), runs the command, writes its outputs
/// and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run_cli(cli) {
        Ok(true) => 0,
        Ok(false) => EXIT_FAILED,
        Err(e) => {
            eprintln!("clonelab: {e}");
            e.exit_code()
        }
    }
}

fn run_cli(cli: Cli) -> Result<bool> {
    let out = output_args(&cli.command).clone();
    let pool = worker_pool()?;
    let start = Instant::now();
    let mut report = pool.install(|| execute(&cli.command))?;
    if out.timing {
        report.wall_clock_ms = Some(start.elapsed().as_millis() as u64);
    }
    let json = report.to_json()?;
    match &out.output {
        Some(path) => std::fs::write(path, &json).map_err(|e| CliError::io(path, e))?,
        None => print!("{json}"),
    }
    if let Some(path) = &out.csv {
        report.write_csv(path)?;
    }
    Ok(report.pass)
}

fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| CliError::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Experiment(e.to_string()))
}

fn output_args(c: &Command) -> &OutputArgs {
    match c {
        Command::Correctness(a) => &a.out,
        Command::Moe(a) => &a.out,
        Command::Antipiracy(a) => &a.out,
        Command::Lemmas(a) => &a.out,
        Command::Lab(a) => &a.out,
        Command::Bench(a) => &a.out,
        Command::CheckTrace(a) => &a.out,
    }
}

/// Runs a parsed command and builds its report, without writing anything.
pub fn execute(command: &Command) -> Result<Report> {
    match command {
        Command::Correctness(a) => correctness(a),
        Command::Moe(a) => moe_cmd(a),
        Command::Antipiracy(a) => antipiracy_cmd(a),
        Command::Lemmas(a) => lemmas(a),
        Command::Lab(a) => lab(a),
        Command::Bench(a) => bench(a),
        Command::CheckTrace(a) => check_trace_cmd(a),
    }
}

/// Parses `args` (program name first) and runs [`execute`].
pub fn execute_args<I, T>(args: I) -> Result<Report>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Config(e.to_string()))?;
    execute(&cli.command)
}

fn positive(name: &str, v: u64) -> Result<()> {
    if v == 0 {
        return Err(CliError::Config(format!("{name} must be at least 1")));
    }
    Ok(())
}

#[derive(Default, Serialize)]
struct CorrectnessResults {
    #[serde(skip_serializing_if = "Option::is_none")]
    duality: Option<DualityResult>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    round_trips: Vec<RoundTripResult>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    punctured: Vec<PuncturedResult>,
}

fn correctness(a: &CorrectnessArgs) -> Result<Report> {
    positive("trials", a.trials as u64)?;
    let wants = |s: Scheme| a.scheme == s || a.scheme == Scheme::All;
    let mut res = CorrectnessResults::default();
    let mut summary = Vec::new();
    if wants(Scheme::Duality) {
        let d = coset_duality(a.seed, a.trials, &a.dims)?;
        summary.push(SummaryRow::new("duality_matches", d.matches as f64, Some(d.trials as f64), d.pass()));
        res.duality = Some(d);
    }
    let needs_cp = wants(Scheme::CpPke) || wants(Scheme::CpFe);
    let params = if needs_cp { Some(cp_params(a.id_len, a.n, a.d, a.c)?) } else { None };
    for (scheme, run) in [
        (Scheme::CpPke, cp_pke_round_trips as fn(_, _, _) -> _),
        (Scheme::CpFe, cp_fe_round_trips),
    ] {
        if wants(scheme) {
            let r: RoundTripResult = run(a.seed, params.clone().expect("built above"), a.trials)?;
            summary.push(SummaryRow::new(format!("{}_correct", r.scheme), r.correct as f64, Some(r.trials as f64), r.pass()));
            res.round_trips.push(r);
        }
    }
    if wants(Scheme::Prf) {
        res.punctured.push(prf_punctured(a.seed, a.input_len, a.trials)?);
    }
    if wants(Scheme::Ibe) {
        res.punctured.push(ibe_punctured(a.seed, a.input_len, a.trials)?);
    }
    if wants(Scheme::Fe) {
        res.punctured.push(fe_punctured(a.seed, a.trials)?);
    }
    for p in &res.punctured {
        summary.push(SummaryRow::new(format!("{}_disagreements", p.scheme), p.disagreements as f64, Some(0.0), p.pass()));
    }
    Report::new("correctness", a, &res, summary)
}

fn game_summary(o: &GameOutcome) -> Vec<SummaryRow> {
    let mut rows = vec![SummaryRow::new("voided", o.report.voided as f64, Some(0.0), o.report.voided == 0)];
    rows.extend(o.expectations.iter().map(|e| SummaryRow::new("win_rate", o.report.win_rate, Some(e.probability), e.contained)));
    rows
}

fn moe_cmd(a: &MoeArgs) -> Result<Report> {
    positive("trials", a.trials)?;
    let mut cfg = MoeConfig::new(a.variant, CosetParams::new(a.n, a.d, a.c)?, a.trials, a.seed);
    cfg.id_len = a.id_len;
    cfg.keep_trace = a.trace;
    cfg.test_only_leak = a.test_only_leak;
    let o = moe(&cfg, a.strategy, &a.expect)?;
    Report::new("moe", a, &o, game_summary(&o))
}

fn antipiracy_cmd(a: &AntiPiracyArgs) -> Result<Report> {
    positive("trials", a.trials)?;
    let mut cfg = AntiPiracyConfig::new(cp_params(a.id_len, a.n, a.d, a.c)?, a.trials, a.seed);
    cfg.keep_trace = a.trace;
    cfg.duplicate_keys = a.duplicate_keys;
    cfg.non_interactive = a.non_interactive;
    cfg.test_only_leak = a.test_only_leak;
    let o = antipiracy(a.scheme.into(), &cfg, a.strategy, a.k, &a.expect)?;
    Report::new("antipiracy", a, &o, game_summary(&o))
}

fn lemmas(a: &LemmasArgs) -> Result<Report> {
    let rep = lemma_suite_with(a.seed, a.dims, a.trials, MeasureParams::new(a.epsilon, a.delta, a.eta)?)?;
    let summary = rep
        .results
        .iter()
        .map(|r| SummaryRow::new(&r.lemma_id, r.worst_slack, Some(clonelab_measure::lemmas::SLACK_FLOOR), r.pass))
        .collect();
    Report::new("lemmas", a, &rep, summary)
}

fn lab(a: &LabArgs) -> Result<Report> {
    let cfg = LabConfig {
        params: MeasureParams::new(a.epsilon, a.delta, 0.5)?,
        pi_instances: a.pi_instances,
        sandwich_instances: a.sandwich_instances,
        api_instances: a.api_instances,
        api_trials: a.api_trials,
        max_dim: a.max_dim,
    };
    let rep = measurement_lab(a.seed, &cfg)?;
    let summary = rep.checks.iter().map(|c| SummaryRow::new(&c.check_id, c.observed, Some(c.bound), c.pass)).collect();
    Report::new("lab", a, &rep, summary)
}

#[derive(Serialize)]
struct BenchRow {
    op: String,
    reps: usize,
    median_us: f64,
}

fn bench(a: &BenchArgs) -> Result<Report> {
    positive("reps", a.reps as u64)?;
    let params = cp_params(32, a.n, a.d, a.c)?;
    let mut rng = substream(a.seed, "bench", 0);
    let inst = cp_pke_setup(params, &mut rng)?;
    let key = cp_pke_qkeygen(&inst, &mut rng)?;
    let ct = cp_pke_enc(&inst.pk, &Plaintext::Message(vec![7; 16]), &mut rng)?;
    let triple = CosetTriple::new(sample_subspace(a.n, a.d, &mut rng)?, sample_vector(a.n, &mut rng), sample_vector(a.n, &mut rng))?;
    let mixture = ProjectiveMixture::new(vec![(clonelab_measure::linalg::identity(4), 1.0)])?;
    let api = Api::new(&mixture, &MeasureParams::new(0.05, 0.05, 0.5)?)?;
    let rho = DensityMatrix::maximally_mixed(4);

    let mut rows = Vec::new();
    let mut time = |op: &str, f: &mut dyn FnMut() -> Result<()>| -> Result<()> {
        let mut us = Vec::with_capacity(a.reps);
        for _ in 0..a.reps {
            let t = Instant::now();
            f()?;
            us.push(t.elapsed().as_secs_f64() * 1e6);
        }
        us.sort_by(f64::total_cmp);
        rows.push(BenchRow { op: op.into(), reps: a.reps, median_us: us[us.len() / 2] });
        Ok(())
    };
    time("coset_prepare_hadamard", &mut || Ok(drop(hadamard_all(&prepare_coset_state(&triple)?))))?;
    time("cp_pke_qkeygen", &mut || Ok(drop(cp_pke_qkeygen(&inst, &mut rng)?)))?;
    time("cp_pke_enc", &mut || Ok(drop(cp_pke_enc(&inst.pk, &Plaintext::Top, &mut rng)?)))?;
    time("cp_pke_dec", &mut || Ok(drop(cp_pke_dec(&key, &ct, &mut rng)?)))?;
    time("api_measure_dim4", &mut || Ok(drop(api.measure(&rho, &mut rng)?)))?;
    let summary = rows.iter().map(|r| SummaryRow::new(&r.op, r.median_us, None, true)).collect();
    Report::new("bench", a, &rows, summary)
}

fn check_trace_cmd(a: &CheckTraceArgs) -> Result<Report> {
    let text = std::fs::read_to_string(&a.input).map_err(|e| CliError::io(&a.input, e))?;
    let report: Report = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("not a report: {e}")))?;
    let trace = report
        .results
        .pointer("/report/trace")
        .ok_or_else(|| CliError::Config("report has no trace; rerun the game with --trace".into()))?;
    let trace: GameTrace = serde_json::from_value(trace.clone()).map_err(|e| CliError::Config(format!("malformed trace: {e}")))?;
    let chk = check_trace(&trace)?;
    let summary = vec![SummaryRow::new("mismatches", chk.mismatches.len() as f64, Some(0.0), chk.ok())];
    Report::new("check-trace", a, &chk, summary)
}

