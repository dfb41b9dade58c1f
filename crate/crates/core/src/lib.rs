//! Simulation, decoding and localization of modulated LED markers seen by a
//! moving event camera, with contrast-maximization motion compensation.

pub mod bench;
pub mod camera;
pub mod cmax;
pub mod event;
pub mod pipeline;
pub mod protocol;
pub mod sim;
pub mod so3;
pub mod timemap;

pub use camera::{project, CameraIntrinsics, GeometryError, Pose};
pub use event::{Event, EventStream, Micros, Polarity};
pub use timemap::TimeMap;
