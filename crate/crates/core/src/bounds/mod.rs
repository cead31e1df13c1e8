//! Combinatorial counts, packings, binary codes and the separated function
//! families behind the lower bounds, with numeric checks of each inequality.

pub mod codes;
pub mod combinatorics;
pub mod families;
pub mod packing;
pub mod verify;
