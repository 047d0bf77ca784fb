pub mod model;
pub mod warped;
