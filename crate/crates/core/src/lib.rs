pub mod generate;
pub mod geometry;
pub mod grouping;
pub mod reconstruct;
pub mod refinement;
pub mod search;
