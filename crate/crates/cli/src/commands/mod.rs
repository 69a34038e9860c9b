pub mod audit;
pub mod embed;
pub mod morph;
pub mod split;
pub mod synth;
