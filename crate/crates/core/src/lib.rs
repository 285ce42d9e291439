//! Simulation of a BRAM-backed fixed-point MLP accelerator running with an
//! underscaled BRAM supply voltage.

pub mod ecc;
pub mod faults;
pub mod fxp;
pub mod memmap;
pub mod mnist;
pub mod model;
pub mod power;
pub mod sweep;
