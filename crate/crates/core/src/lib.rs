//! Privacy-preserving context authentication.
//!
//! Numeric location-sensitive readings (position, barometric altitude, noise,
//! magnetic field) are reduced to a Super-Bit LSH code on the device, and
//! categorical readings (Wi-Fi, cellular, Bluetooth identifiers) to keyed
//! HMAC digests. A server learns per-user behavioural clusters from those
//! protected values alone and scores new samples against them.

pub mod authmodel;
pub mod evalsuite;
pub mod geo;
pub mod protect;
pub mod sblsh;
pub mod simgen;
