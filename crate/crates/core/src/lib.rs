//! Core logic for location-anchored dish chat personas ("interactive points
//! of interest").
//!
//! Dishes are authored by restaurateurs, announce themselves to nearby users
//! through geofences, answer free-text questions through a rule-based intent
//! matcher, and are surfaced through an explore feed and a top-3 exploit
//! recommendation. Every chat turn lands in an append-only inquiry log from
//! which the dashboard KPIs are computed.
//!
//! All functions here are pure over immutable snapshots; persistence and
//! transport live in the gateway crate.

pub mod analytics;
pub mod catalog;
pub mod chat;
pub mod error;
pub mod exec;
pub mod geo;
pub mod geofence;
pub mod hours;
pub mod model;
pub mod recommender;

pub use catalog::Catalog;
pub use error::{CoreError, Result};
pub use exec::Exec;
pub use geo::{haversine_m, GeoPoint};
pub use hours::{Interval, OpeningHours, Weekday};
pub use model::*;
