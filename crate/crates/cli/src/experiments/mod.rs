//! Experiment drivers shared by the binary and the acceptance suite.

pub mod correctness;
pub mod games;

pub use correctness::{
    coset_duality, cp_fe_round_trips, cp_pke_round_trips, fe_punctured, ibe_punctured, prf_punctured, DualityResult,
    PuncturedResult, RoundTripResult,
};
pub use games::{antipiracy, moe, Expectation, GameOutcome};
