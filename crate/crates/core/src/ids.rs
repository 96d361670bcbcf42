//! Identifier newtypes shared across the engine.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident($inner:ty)) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }

        impl From<$inner> for $name {
            fn from(v: $inner) -> Self {
                Self(v)
            }
        }
    };
}

id_type!(
    /// A location (intersection or waypoint) of the road network.
    NodeId(u64)
);
id_type!(
    /// A taxi of the simulated fleet. Taxis are numbered `0..n_taxis`.
    TaxiId(u32)
);
id_type!(
    /// A passenger request.
    RequestId(u64)
);
id_type!(
    /// A zone of the partition used by zonal metrics.
    ZoneId(u32)
);

/// Whole seconds. All travel times and event timestamps use this unit.
pub type Seconds = u64;

/// Index of a decision epoch, starting at 0.
pub type Epoch = u32;
