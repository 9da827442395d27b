//! Finite-horizon laboratory for shadowing of finitely generated free
//! semigroup actions.
//!
//! A [`System`] couples a [`GeneratorFamily`] on a compact [`MetricSpace`]
//! with an infinite [`Word`]. On top of it the crate classifies pseudo-orbits,
//! repairs ergodic pseudo-orbits into average pseudo-orbits, extracts
//! density-zero exceptional sets from Cesàro-null sequences, concatenates
//! pseudo-orbit blocks, and searches ε-nets for shadowing points.
//!
//! Every limit quantity is estimated on a finite horizon `H`; `limsup` and
//! `liminf` become extrema over the tail window `[⌈tail_fraction·H⌉, H]`.

pub mod cesaro;
pub mod concat;
pub mod density;
pub mod disk_example;
pub mod error;
pub mod io;
pub mod maps;
pub mod pseudo_orbit;
pub mod shadow;
pub mod space;
pub mod surgery;
pub mod system;
pub mod verdict;
pub mod word;

pub use density::IndexSet;
pub use error::{Error, Result};
pub use maps::{GeneratorFamily, GeneratorMap};
pub use pseudo_orbit::PseudoOrbit;
pub use space::{MetricSpace, Point};
pub use system::System;
pub use verdict::{Property, Verdict, Witness};
pub use word::{Word, WordRule};
