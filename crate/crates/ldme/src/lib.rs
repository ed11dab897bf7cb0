pub mod checks;
pub mod cli;
pub mod cost;
pub mod estimator;
pub mod fantope;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod planted;
pub mod rng;
pub mod sketch;
pub mod spectral;
pub mod sdp;
