//! Two-parameter qubit rotation sensing: probe model, precision bounds,
//! collective measurements, circuit synthesis, noisy simulation and estimation.

pub mod linalg;
pub mod probe;
pub mod sdp;
pub mod bounds;
pub mod povm;
pub mod synth;
pub mod sim;
pub mod infer;
