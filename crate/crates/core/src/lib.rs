//! Obfuscated GF(2^m) polynomial-basis multipliers: structure generation,
//! key-controlled modulus switching, gate-level lowering, simulation and
//! attack evaluation.

pub mod attack;
pub mod entry;
pub mod lanes;
pub mod netlist;
pub mod obfuscate;
pub mod optimize;
pub mod orders;
pub mod poly;
pub mod sim;
pub mod structure;
pub mod trend;

pub use obfuscate::{obfuscate_chain, obfuscate_pair, KeySpec, ObfMatrix};
pub use optimize::optimize;
pub use orders::{explore_orders, OrderMode, OrderOptions, OrderStudy};
pub use poly::{FieldSpec, Poly};
pub use structure::{gen_structure, MultStructure};
