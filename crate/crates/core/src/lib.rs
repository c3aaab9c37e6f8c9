//! Simulation of a redundant real-time service on a virtualized multicore
//! platform: RTDS hypervisor scheduling, guest real-time scheduling, a 2oo2
//! replicated application, and the measurement campaign around it.

pub mod app;
pub mod config;
pub mod doe;
pub mod guest;
pub mod platform;
pub mod report;
pub mod rtds;
pub mod stats;
pub mod system;
pub mod sim;
pub mod time;
