//! Community detection pipelines: DCD-TMHC and successive 2-means (STM).

mod assignment;
mod stm;
mod tmhc;

pub use assignment::{CommunityAssignment, Manifest};
pub use stm::{stm, StmConfig};
pub use tmhc::{
    auto_radius, dcd_tmhc, median_occupancy, tmhc, FinalNodes, TmhcConfig, TmhcOutcome, TmhcTrace,
    SIM_OCCUPANCY,
};
