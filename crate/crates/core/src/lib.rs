// Protocol messages carry fixed-size ciphertexts and keys inline; boxing
// them would only add allocations on every hop.
#![allow(clippy::large_enum_variant)]

pub mod actors;
pub mod aka;
pub mod bench;
pub mod cli;
pub mod identity;
pub mod prims;
pub mod sim;
pub mod vectors;
pub mod wire;
pub mod xwing;
