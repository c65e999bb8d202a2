//! Acceptance suite: one pass/fail line per criterion, non-zero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use clonelab_cli::experiments::{
    coset_duality, cp_fe_round_trips, cp_pke_round_trips, fe_punctured, ibe_punctured, prf_punctured,
};
use clonelab_core::copy_protect::CpParams;
use clonelab_core::games::{
    basis_guesser_win_probability, moe_adversary, pke_pirate, run_moe, run_pke_antipiracy, AntiPiracyConfig, MoeConfig,
    MoeVariant, StrategyKind,
};
use clonelab_core::gf2::CosetParams;
use clonelab_measure::lemmas::SLACK_FLOOR;
use clonelab_measure::{lemma_suite, measurement_lab, LabConfig};

const SEED: u64 = 1;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn dbg<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn duality() -> Outcome {
    let r = coset_duality(SEED, 500, &[2, 4, 6, 8]).map_err(dbg)?;
    ensure(r.pass(), || format!("{r:?}"))?;
    Ok(format!(
        "500/500 within 1e-9 (worst {:.1e}); {} match with no sign correction",
        r.worst_amplitude_diff, r.literal_matches
    ))
}

fn round_trips() -> Outcome {
    let params = CpParams::new(32, 4, 2, 3).map_err(dbg)?;
    let pke = cp_pke_round_trips(SEED, params.clone(), 100).map_err(dbg)?;
    let fe = cp_fe_round_trips(SEED, params, 100).map_err(dbg)?;
    ensure(pke.pass() && fe.pass(), || format!("{pke:?} {fe:?}"))?;
    Ok(format!(
        "cp-pke {}/100, cp-fe {}/100, worst key change {:.1e}",
        pke.correct,
        fe.correct,
        pke.worst_state_change.max(fe.worst_state_change)
    ))
}

fn punctured() -> Outcome {
    let prf = prf_punctured(SEED, 8, 20).map_err(dbg)?;
    let ibe = ibe_punctured(SEED, 8, 20).map_err(dbg)?;
    let fe = fe_punctured(SEED, 20).map_err(dbg)?;
    for r in [&prf, &ibe, &fe] {
        ensure(r.pass(), || format!("{r:?}"))?;
    }
    ensure(prf.agreements_checked + prf.refusals_expected == 20 * 256, || format!("prf coverage {prf:?}"))?;
    ensure(ibe.agreements_checked + ibe.refusals_expected == 20 * 256, || format!("ibe coverage {ibe:?}"))?;
    ensure(fe.agreements_checked + fe.refusals_expected == 20 * 8, || format!("fe coverage {fe:?}"))?;
    Ok(format!(
        "prf {} points, ibe {} identities, fe {} refusals of {} separating functions",
        prf.agreements_checked, ibe.agreements_checked, fe.refusals_observed, fe.refusals_expected
    ))
}

fn lab() -> Outcome {
    let cfg = LabConfig::default();
    ensure(
        cfg.pi_instances == 200 && cfg.sandwich_instances == 100 && cfg.api_trials == 10_000,
        || format!("{cfg:?}"),
    )?;
    ensure(cfg.params.epsilon == 0.05 && cfg.params.delta == 0.05, || format!("{cfg:?}"))?;
    let rep = measurement_lab(SEED, &cfg).map_err(dbg)?;
    let failed: Vec<_> = rep.checks.iter().filter(|c| !c.pass).collect();
    ensure(failed.is_empty(), || format!("{failed:?}"))?;
    let get = |id: &str| rep.get(id).map(|c| c.observed).unwrap_or(f64::NAN);
    Ok(format!(
        "PI err {:.1e}, repeat {:.9}, API close {:.4}, shift {:.4}, sandwich slack {:.4}/{:.4}",
        get("pi_closed_form"),
        get("pi_projective"),
        get("api_almost_projective"),
        get("api_shift_to_pi"),
        get("ti_sandwich_lower"),
        get("ti_sandwich_upper")
    ))
}

fn lemmas() -> Outcome {
    let rep = lemma_suite(SEED, 4, 500).map_err(dbg)?;
    let mut parts = Vec::new();
    for id in ["quantum_union_bound", "gentle_measurement", "implementation_independence", "simultaneous_projection"] {
        let r = rep.get(id).ok_or_else(|| format!("{id} missing"))?;
        ensure(r.instances == 500 && r.worst_slack >= SLACK_FLOOR && r.pass, || format!("{r:?}"))?;
        parts.push(format!("{id} {:.1e}", r.worst_slack));
    }
    ensure(rep.all_pass(), || format!("{:?}", rep.results.iter().filter(|r| !r.pass).collect::<Vec<_>>()))?;
    Ok(format!("worst slack: {}", parts.join(", ")))
}

fn baselines() -> Outcome {
    let params = CpParams::new(32, 4, 2, 3).map_err(dbg)?;
    let pke = |kind, k, dup| {
        let mut cfg = AntiPiracyConfig::new(params.clone(), 2000, SEED);
        cfg.duplicate_keys = dup;
        run_pke_antipiracy(&cfg, pke_pirate(kind, k).map_err(dbg)?.as_ref()).map_err(dbg)
    };
    let mut lines = Vec::new();

    let honest = pke(StrategyKind::HonestForwarder, 1, false)?;
    ensure(honest.voided == 0 && honest.contains(0.5), || format!("{honest:?}"))?;
    lines.push(format!("forwarder {:.4}", honest.win_rate));

    let guess = pke(StrategyKind::AllGuess, 2, false)?;
    ensure(guess.voided == 0 && guess.contains(0.125), || format!("{guess:?}"))?;
    lines.push(format!("all-guess {:.4}", guess.win_rate));

    for c in 1..=3 {
        let cfg = MoeConfig::new(MoeVariant::Multi, CosetParams::new(14, 7, c).map_err(dbg)?, 2000, SEED);
        let adv = moe_adversary(StrategyKind::BasisGuesser, MoeVariant::Multi).map_err(dbg)?;
        let r = run_moe(&cfg, adv.as_ref()).map_err(dbg)?;
        let target = 0.25f64.powi(c as i32);
        let exact = basis_guesser_win_probability(14, 7, c);
        ensure(r.voided == 0 && r.contains(target), || format!("c={c}: {r:?}"))?;
        let z = (r.win_rate - exact) / (exact * (1.0 - exact) / r.trials as f64).sqrt();
        lines.push(format!("basis-guesser c={c} {:.4} (4^-c {target:.4}, exact {exact:.4}, z {z:+.2})", r.win_rate));
    }

    let cloner = pke(StrategyKind::TwoCopyCloner, 1, true)?;
    ensure(cloner.voided == 0 && cloner.wins == 2000, || format!("{cloner:?}"))?;
    lines.push(format!("cloner {:.1}", cloner.win_rate));

    let mut cfg = MoeConfig::new(MoeVariant::Coll, CosetParams::new(4, 2, 2).map_err(dbg)?, 100, SEED);
    cfg.keep_trace = true;
    let adv = moe_adversary(StrategyKind::TwoCopyCloner, MoeVariant::Coll).map_err(dbg)?;
    let coll = run_moe(&cfg, adv.as_ref()).map_err(dbg)?;
    let trace = coll.trace.as_ref().ok_or("no trace")?;
    ensure(coll.wins == 0 && coll.voided == 0 && coll.trials == 100, || format!("{coll:?}"))?;
    ensure(
        trace.trials.iter().all(|t| t.verdict.reason.contains("appears 2 times")),
        || "a collusion loss came from a failed check, not the repeated identity".into(),
    )?;
    lines.push("coll 0/100 by the repeat rule".into());
    Ok(lines.join(", "))
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_clonelab");
    let dir = tempfile::tempdir().map_err(dbg)?;
    let runs: &[&[&str]] = &[
        &["correctness", "--scheme", "all", "--trials", "20", "--seed", "7"],
        &["moe", "--variant", "coll", "--strategy", "two-copy-cloner", "--c", "2", "--trials", "30", "--seed", "7", "--trace"],
        &["antipiracy", "--scheme", "cp-fe", "--strategy", "phase2-cheater", "--trials", "30", "--seed", "7", "--trace"],
        &["antipiracy", "--strategy", "honest-forwarder", "--k", "2", "--trials", "60", "--seed", "7"],
        &["lemmas", "--dims", "3", "--trials", "40", "--seed", "7"],
        &["lab", "--seed", "7", "--api-trials", "500", "--pi-instances", "40", "--sandwich-instances", "40"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for (j, workers) in ["1", "3", "1"].iter().enumerate() {
            let path = dir.path().join(format!("r{i}_{j}.json"));
            let status = Command::new(bin)
                .args(*args)
                .arg("--output")
                .arg(&path)
                .env("CLONELAB_WORKERS", workers)
                .status()
                .map_err(dbg)?;
            ensure(status.code() == Some(0), || format!("{args:?} exited with {status}"))?;
            outputs.push(std::fs::read(&path).map_err(dbg)?);
        }
        ensure(outputs.windows(2).all(|w| w[0] == w[1]), || format!("{args:?} reports differ"))?;
    }
    Ok(format!("{} experiments byte-identical across reruns and worker counts", runs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 7] = [
        ("coset duality", duality, Duration::from_secs(10)),
        ("copy-protected round trips", round_trips, Duration::from_secs(30)),
        ("punctured correctness", punctured, Duration::from_secs(20)),
        ("measurement lab", lab, Duration::from_secs(300)),
        ("lemma suite", lemmas, Duration::from_secs(120)),
        ("game baselines", baselines, Duration::from_secs(300)),
        ("determinism", determinism, Duration::from_secs(600)),
    ];
    let mut failures = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let took = start.elapsed();
        let outcome = outcome.and_then(|d| {
            if took <= *budget {
                Ok(d)
            } else {
                Err(format!("{d}; took {took:.1?}, budget {budget:?}"))
            }
        });
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS in {took:.2?} ({detail})", i + 1),
            Err(why) => {
                failures += 1;
                println!("criterion {} {name}: FAIL in {took:.2?} ({why})", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
