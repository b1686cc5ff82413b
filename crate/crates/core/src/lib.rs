//! Slicing-assisted automated program repair for a small imperative language.
//!
//! The pipeline slices a faulty program with observation-based slicing,
//! localizes the fault with Ochiai, drops tests that exercise nothing the
//! slice kept, and searches template patches in rank order.

pub mod bench;
pub mod fl;
pub mod lang;
pub mod pipeline;
pub mod project;
pub mod reduce;
pub mod repair;
pub mod slicer;
pub mod suite;
