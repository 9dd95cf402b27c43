//! Behavioral simulator for in-flash bulk bitwise operations on MLC NAND.

pub mod bits;
pub mod cell_physics;
pub mod config;
pub mod device;
pub mod engine;
pub mod error;
pub mod lab;
pub mod num;
pub mod report;
pub mod ssd;
pub mod workloads;

pub use bits::BitPage;
pub use cell_physics::{CellState, WearState};
pub use config::Config;
pub use engine::{OpCode, OpKind};
pub use error::{Error, Result};
pub use num::Scalar;

pub type CellPhysics = cell_physics::CellPhysics<f64>;
pub type CellPhysicsF32 = cell_physics::CellPhysics<f32>;
pub type NandDevice = device::NandDevice<f64>;
pub type NandDeviceF32 = device::NandDevice<f32>;
