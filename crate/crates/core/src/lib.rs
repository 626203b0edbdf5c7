pub mod flowdata;
pub mod rng;
pub mod eda;
pub mod sampling;
pub mod learners;
pub mod metrics;
pub mod pipeline;
