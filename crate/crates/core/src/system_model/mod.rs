//! Region-level coarse-graining, the region encoder and its losses, the
//! system score, and change-point detection.

mod detect;
mod losses;
mod net;
mod region;
mod score;
mod train;

pub use detect::detect_change_points;
pub use losses::{sample_regions, system_losses, system_representation, SystemLosses};
pub use net::{SystemHyper, SystemModel, SystemNet};
pub use region::{coarse_grain, RegionSeries};
pub use score::{score_system, system_score};
pub use train::train_system;
