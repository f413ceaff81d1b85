pub mod entanglement;
pub mod harness;
pub mod model;
pub mod closed;
pub mod open;
pub mod params;
