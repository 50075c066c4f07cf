//! Black-box membership and attribute inference attacks.

mod attribute;
mod membership;

pub use attribute::{
    ai_advantage, make_binning, salem_ai_guess, salem_ai_guesses, yeom_ai_guess, yeom_ai_guesses, AiReport,
    AiSummary, AttributeBinning, MAX_BINS,
};
pub use membership::{
    calibrate_salem_threshold, ensure_disjoint, salem_mi, salem_mi_from_confidences, yeom_mi, MiThreshold,
};
