pub mod bs;
pub mod compare;
pub mod evaluate;
pub mod grid;
pub mod prepare;
pub mod synth;
pub mod train;
