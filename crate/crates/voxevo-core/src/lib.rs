//! Core library for evolving soft voxel robots.
//!
//! The crate covers the full loop from genotype to statistics:
//!
//! * [`cppn`]: compositional pattern-producing networks and their mutation
//!   operators.
//! * [`phenotype`]: sampling a network over a voxel lattice to get a body
//!   and its open-loop controller.
//! * [`physics`]: a mass-spring simulator for those bodies, with sinusoidal
//!   muscle actuation and ground contact.
//! * [`evolution`]: a generational loop with Pareto-based survivor selection
//!   over fitness and genealogical age.
//! * [`runlog`]: per-generation records of everything a run produced.
//! * [`analytics`]: lineage statistics and the significance tests used to
//!   compare treatments.
//!
//! Everything here is deterministic given a seed: two runs with the same
//! configuration produce bit-identical logs on the same platform. The crate
//! is `no_std`-compatible (with `alloc`); the `std` feature (on by default)
//! only switches float intrinsics and enables dependencies' std paths.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analytics;
pub mod cppn;
pub mod evolution;
mod math;
pub mod phenotype;
pub mod physics;

pub use analytics::{GenerationRecord, RunLog, RunSummary};
pub use cppn::{ActivationKind, Coords, CppnGenome, GenomeKind};
pub use evolution::{evolve, EvoConfig, Individual, Run, Treatment};
pub use phenotype::{ControllerMap, Material, MorphologyId, VoxelGrid};
pub use physics::{simulate, FitnessResult, SimConfig, Simulation};
