//! Tool layer turning world ground truth into the facts a policy consumes.

pub mod localization;
pub mod memory;
pub mod perception;

use serde::{Deserialize, Serialize};

pub use localization::{localize, Localization};
pub use memory::{classify_style, CommandEntry, DrivingStyle, Memory};
pub use perception::{lane_view, perceive, LaneView, Neighbor, Perception};

/// In-cabin monitor. A constant stub unless a scenario overrides it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CabinStatus {
    pub driver_attentive: bool,
    pub seatbelt_fastened: bool,
}

impl Default for CabinStatus {
    fn default() -> Self {
        Self {
            driver_attentive: true,
            seatbelt_fastened: true,
        }
    }
}

/// Everything handed to a policy at one decision tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationBundle {
    pub time: f64,
    pub perception: Perception,
    pub localization: Localization,
    pub cabin: CabinStatus,
    /// Rendered text form of the three structured parts plus memory.
    pub text: String,
}
