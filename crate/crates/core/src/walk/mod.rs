//! Step laws, reproducible streams, path simulation and survival estimators.

pub mod estimate;
pub mod lattice;
pub mod law;
pub mod parallel;
pub mod rng;
pub mod simulate;
pub mod splitting;
pub mod survival;

pub use estimate::{CompensatedSum, Estimate, Moments};
pub use law::{StepKind, StepLaw};
pub use rng::{RngStream, StreamRng};
pub use simulate::{
    simulate_until, simulate_with, LawSteps, ScriptedSteps, StepSource, Stop, StoppingRecord,
};
pub use splitting::{survival_prob_splitting, SplittingConfig, SplittingResult};
pub use survival::{survival_prob_direct, survival_profile_direct};
