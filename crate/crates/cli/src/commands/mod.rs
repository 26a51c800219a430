pub mod evaluate;
pub mod optimize;
pub mod sample;
pub mod sweeps;
pub mod validate;
