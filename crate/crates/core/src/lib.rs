//! Ride-sharing batch dispatch simulation with fairness analytics.
//!
//! The pipeline is: load a [`network::RoadNetwork`] and a
//! [`zones::ZonePartition`], load or generate a [`demand::RequestStream`],
//! drive it through [`simulator::run`] with a [`matching::MatchingPolicy`],
//! and compute [`metrics`] from the resulting [`runlog::RunLog`].

pub mod demand;
pub mod ids;
pub mod matching;
pub mod metrics;
pub mod network;
pub mod runlog;
pub mod simulator;
mod table;
#[cfg(feature = "testkit")]
pub mod testkit;
pub mod zones;

pub use ids::{Epoch, NodeId, RequestId, Seconds, TaxiId, ZoneId};
