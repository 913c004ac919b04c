//! Checks of the class conditions, smoothness surrogates and iteration-count
//! identities.

mod complexity;
mod membership;
mod smoothness;

pub use complexity::{
    fit_complexity_slope, matching_setup, verify_against, verify_lower_bound_run, verify_lower_bound_run_with,
    LowerBoundReport, MatchOptions, MatchedRun, SlopeFit,
};
pub use membership::{
    check_crs_membership, check_malpha_membership, measured_kappa_bar, ClassTrace, Condition, ConditionVerdict,
    CrsParams, IterationVerdict, KappaLambda, MAlphaParams, MembershipReport, StepRecord,
};
pub use smoothness::{estimate_smoothness, Sampling, SmoothnessReport};
