//! Single-antenna GNSS spoofing detection: tests whether carrier phase
//! motion agrees with IMU motion projected onto each satellite's line of
//! sight, or with one common line of sight shared by all channels.

// `!(x > y)` comparisons are intentional: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carrier;
pub mod config;
pub mod detector;
pub mod geo;
pub mod imu;
pub mod ingest;
pub mod qr;
pub mod synth;
