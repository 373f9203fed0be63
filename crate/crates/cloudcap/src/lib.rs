//! Cloud-side analysis service and the capture agent that feeds it.

pub mod agent;
pub mod service;
