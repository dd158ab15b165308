pub mod backends;
pub mod eval;
pub mod obfuscate;
pub mod pipeline;
pub mod prompt;
pub mod raster;
pub mod risk;
