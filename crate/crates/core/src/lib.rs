//! Deterministic vehicular network simulator: microscopic road traffic
//! coupled to an 802.11 ad-hoc wireless stack with AODV routing.

pub mod aodv;
pub mod app;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod mac;
pub mod metrics;
pub mod mobility;
pub mod phy;
pub mod rng;
pub mod road_network;
pub mod scenario;
pub mod trace;
