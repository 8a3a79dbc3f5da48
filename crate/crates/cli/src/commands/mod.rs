pub mod census;
pub mod geometry;
pub mod pivots;
pub mod reproduce;
pub mod schottky;
pub mod walk;
