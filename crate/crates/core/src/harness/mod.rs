pub mod audit;
pub mod coupling;
pub mod experiment;
pub mod regret;
pub mod runner;
pub mod svg;
