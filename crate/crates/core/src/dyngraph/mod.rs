//! Agent traces, radius-based interaction graphs, sliding windows and the
//! region grid used for coarse graining.

mod neighbors;
mod region;
mod trace;
mod window;

pub use neighbors::{build_neighborhoods, DynamicGraph};
pub use region::{assign_region, build_region_grid, RegionGrid};
pub use trace::{downsample, AgentTrace, Bounds, Dataset, Phase, PhaseInterval, State, TraceHeader};
pub use window::WindowView;
