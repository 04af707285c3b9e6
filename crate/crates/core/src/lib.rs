//! Bounded context-switching reachability for valence systems over graph monoids.

pub mod bcs;
pub mod generators;
pub mod instance;
pub mod monoid;
pub mod nfa;
pub mod polytime;
pub mod saturation;
pub mod system;

pub use monoid::{Op, OpSet, Polarity, StorageGraph, Sym, Word};
pub use system::{Configuration, Label, StateId, Transition, ValenceSystem};
