//! Scoring and downstream analysis: adjusted Rand index, community
//! profiles, per-sample community fractions, and logistic stage models.

mod ari;
mod logistic;
mod profile;

pub use ari::{ari, AriReport};
pub use logistic::{
    log_likelihood, logistic_curve, logistic_fit, score, write_curves_csv, CurvePoint, LogisticFit,
    LogisticOptions, Separation,
};
pub use profile::{
    community_profiles, sample_fractions, CommunityProfile, FractionRow, ProfileFlags,
    SampleFractionTable,
};
