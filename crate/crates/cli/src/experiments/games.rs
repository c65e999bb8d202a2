//! Game runs with an optional expected win probability.

use clonelab_core::copy_protect::CpParams;
use clonelab_core::games::{
    basis_guesser_win_probability, fe_pirate, moe_adversary, pke_pirate, run_fe_antipiracy, run_moe, run_pke_antipiracy,
    AntiPiracyConfig, GameReport, MoeConfig, MoeVariant, StrategyKind,
};
use clonelab_core::gf2::CosetParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub probability: f64,
    /// Whether the exact 95% interval around the win rate contains it.
    pub contained: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub report: GameReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub expectations: Vec<Expectation>,
}

impl GameOutcome {
    fn new(report: GameReport, closed_form: Option<f64>, expect: &[f64]) -> Result<Self> {
        if let Some(p) = expect.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(CliError::Config(format!("expected probability {p} outside [0, 1]")));
        }
        let expectations = expect.iter().map(|&p| Expectation { probability: p, contained: report.contains(p) }).collect();
        Ok(Self { report, closed_form, expectations })
    }

    /// Every stated expectation holds and no trial was voided.
    pub fn pass(&self) -> bool {
        self.report.voided == 0 && self.expectations.iter().all(|e| e.contained)
    }
}

pub fn moe(cfg: &MoeConfig, strategy: StrategyKind, expect: &[f64]) -> Result<GameOutcome> {
    let adv = moe_adversary(strategy, cfg.variant)?;
    let report = run_moe(cfg, adv.as_ref())?;
    let closed = (strategy == StrategyKind::BasisGuesser && cfg.variant != MoeVariant::Coll).then(|| {
        let CosetParams { ambient_dim, subspace_dim, count, .. } = cfg.coset;
        basis_guesser_win_probability(ambient_dim, subspace_dim, count)
    });
    GameOutcome::new(report, closed, expect)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AntiPiracyScheme {
    CpPke,
    CpFe,
}

pub fn antipiracy(
    scheme: AntiPiracyScheme,
    cfg: &AntiPiracyConfig,
    strategy: StrategyKind,
    k: usize,
    expect: &[f64],
) -> Result<GameOutcome> {
    let report = match scheme {
        AntiPiracyScheme::CpPke => run_pke_antipiracy(cfg, pke_pirate(strategy, k)?.as_ref())?,
        AntiPiracyScheme::CpFe => run_fe_antipiracy(cfg, fe_pirate(strategy, k)?.as_ref())?,
    };
    GameOutcome::new(report, None, expect)
}

/// Parameters for the copy-protection games with the given coset shape.
pub fn cp_params(id_len: usize, n: usize, d: usize, c: usize) -> Result<CpParams> {
    Ok(CpParams::new(id_len, n, d, c)?)
}
