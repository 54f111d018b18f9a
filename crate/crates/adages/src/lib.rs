pub mod aggregation;
pub mod datagen;
pub mod harness;
pub mod knockoff;
pub mod metrics;
pub mod seed;
pub mod selection;
pub mod service;
