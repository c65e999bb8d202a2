//! Recomputes game verdicts from traces alone.
//!
//! Nothing here calls back into the challengers: coset membership is
//! re-derived from the logged triples, guesses from the logged bits, and FE
//! admissibility by re-evaluating the logged functions.

use serde::{Deserialize, Serialize};

use super::antipiracy::separates;
use super::{Answer, Challenge, GameTrace, KeyKind, Message, Query, TrialTrace};
use crate::bits::BitString;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceCheck {
    pub checked: u64,
    pub voided: u64,
    /// Indices whose logged verdict disagrees with the recomputed one.
    pub mismatches: Vec<u64>,
}

impl TraceCheck {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

pub fn check_trace(trace: &GameTrace) -> Result<TraceCheck> {
    let rule: fn(&TrialTrace) -> Result<bool> = match trace.game.as_str() {
        "moe-single" | "moe-multi" => |t| moe_win(t, false),
        "moe-coll" => |t| moe_win(t, true),
        "antipiracy-cp-pke" => |t| Ok(guesses_right(t)),
        "antipiracy-cp-fe" | "antipiracy-cp-fe-ni" => fe_win,
        other => return Err(Error::Parameter(format!("no checker for game {other:?}"))),
    };
    let mut out = TraceCheck::default();
    for t in &trace.trials {
        if t.verdict.voided {
            out.voided += 1;
            if t.verdict.reason.is_empty() || t.verdict.win {
                out.mismatches.push(t.index);
            }
            continue;
        }
        out.checked += 1;
        // A trace too malformed to evaluate counts as a mismatch.
        if rule(t).map_or(true, |win| win != t.verdict.win) {
            out.mismatches.push(t.index);
        }
    }
    Ok(out)
}

fn moe_win(t: &TrialTrace, coll: bool) -> Result<bool> {
    let malformed = || Error::Decode("trace lacks the challenge records".into());
    let (id, triples) = t
        .challenges
        .iter()
        .find_map(|c| match c {
            Challenge::Cosets { id, triples } => Some((id, triples)),
            _ => None,
        })
        .ok_or_else(malformed)?;
    let r = t
        .challenges
        .iter()
        .find_map(|c| match c {
            Challenge::Strings { r } => Some(r),
            _ => None,
        })
        .ok_or_else(malformed)?;
    let mut answered = 0;
    for a in &t.answers {
        let Answer::Vectors { freeloader, v } = a else { continue };
        answered += 1;
        let r = r.get(*freeloader).ok_or_else(malformed)?;
        if v.len() != triples.len() || r.len() != triples.len() {
            return Err(malformed());
        }
        for (i, (tr, v)) in triples.iter().zip(v).enumerate() {
            if !tr.accepts(r.get(i), v)? {
                return Ok(false);
            }
        }
    }
    if answered != 2 {
        return Err(malformed());
    }
    if coll {
        let star = id.as_ref().ok_or_else(malformed)?;
        let repeats = t
            .queries
            .iter()
            .filter(|q| matches!(q, Query::Identity { phase: 1, id, .. } if id == star))
            .count();
        return Ok(repeats <= 1);
    }
    Ok(true)
}

fn guesses_right(t: &TrialTrace) -> bool {
    let challenges: Vec<(usize, bool)> = t
        .challenges
        .iter()
        .filter_map(|c| match c {
            Challenge::Messages { freeloader, b, .. } => Some((*freeloader, *b)),
            _ => None,
        })
        .collect();
    !challenges.is_empty()
        && challenges.iter().all(|(l, b)| {
            t.answers.iter().any(|a| matches!(a, Answer::Guess { freeloader, b: g } if freeloader == l && g == b))
        })
}

fn fe_win(t: &TrialTrace) -> Result<bool> {
    let (m0, m1) = t
        .challenges
        .iter()
        .find_map(|c| match c {
            Challenge::Pair { m0: Message::Bits(a), m1: Message::Bits(b) } => Some((a, b)),
            _ => None,
        })
        .ok_or_else(|| Error::Decode("trace lacks the challenge pair".into()))?;
    let bad = |f: &crate::circuit::FunctionDesc, m0: &BitString, m1: &BitString| separates(f, m0, m1);
    for q in &t.queries {
        match q {
            Query::Key { kind: KeyKind::Classical, f: Some(f), .. } if bad(f, m0, m1) => return Ok(false),
            Query::PostChallenge { f, issued: true, .. } if bad(f, m0, m1) => return Ok(false),
            _ => {}
        }
    }
    Ok(guesses_right(t))
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::copy_protect::CpParams;
    use crate::gf2::CosetParams;

    #[test]
    fn recomputed_verdicts_match_and_tampering_is_caught() {
        let mut cfg = MoeConfig::new(MoeVariant::Multi, CosetParams::new(4, 2, 2).unwrap(), 40, 9);
        cfg.keep_trace = true;
        let adv = moe_adversary(StrategyKind::BasisGuesser, MoeVariant::Multi).unwrap();
        let mut trace = run_moe(&cfg, adv.as_ref()).unwrap().trace.unwrap();
        assert!(check_trace(&trace).unwrap().ok());
        let flip = &mut trace.trials[7].verdict;
        flip.win = !flip.win;
        assert_eq!(check_trace(&trace).unwrap().mismatches, vec![7]);
    }

    #[test]
    fn collusion_and_fe_traces_check_out() {
        let mut cfg = MoeConfig::new(MoeVariant::Coll, CosetParams::new(4, 2, 2).unwrap(), 10, 1);
        cfg.keep_trace = true;
        let adv = moe_adversary(StrategyKind::TwoCopyCloner, MoeVariant::Coll).unwrap();
        let trace = run_moe(&cfg, adv.as_ref()).unwrap().trace.unwrap();
        assert!(check_trace(&trace).unwrap().ok());

        let mut ap = AntiPiracyConfig::new(CpParams::new(8, 4, 2, 2).unwrap(), 6, 2);
        ap.keep_trace = true;
        for kind in [StrategyKind::ClassicalViolator, StrategyKind::Phase2Cheater, StrategyKind::HonestForwarder] {
            let trace = run_fe_antipiracy(&ap, fe_pirate(kind, 1).unwrap().as_ref()).unwrap().trace.unwrap();
            let chk = check_trace(&trace).unwrap();
            assert!(chk.ok() && chk.checked == 6, "{kind:?}");
        }
    }

    #[test]
    fn unknown_games_are_rejected() {
        let trace = GameTrace {
            game: "nope".into(),
            seed: 0,
            params: GameParams {
                strategy: String::new(),
                ambient_dim: 0,
                subspace_dim: 0,
                count: 0,
                id_len: 0,
                duplicate_keys: false,
                non_interactive: false,
                test_only_leak: false,
            },
            trials: Vec::new(),
        };
        assert!(check_trace(&trace).is_err());
    }
}
