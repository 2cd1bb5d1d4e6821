//! Truncated Witt vectors, group cohomology over `Z/p^r` and Kummer-type
//! lifting algorithms for finite groups acting on finite algebras.

pub mod linalg;
pub mod witt;
pub mod algebra;
pub mod cohomology;
pub mod extensions;
pub mod kummer;
pub mod corpus;
