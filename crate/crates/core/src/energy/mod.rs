pub mod chart;
pub mod fit;
pub mod identities;
pub mod phi;
