//! Geometrically finite Fuchsian groups with cusps: Möbius geometry, the
//! countable coding, linear algebra on `SL(d, R)` and roof functions of
//! symmetric-power representations.

pub mod coding;
pub mod linalg;
pub mod mobius;
pub mod roof;

pub use coding::{build_coding, omega_endpoint, CodingLetter, CodingRule, CodingTable};
pub use linalg::{
    cartan_projection, iwasawa_cocycle, jordan_projection, sym_power, veronese_flag, CartanVector, Flag, Functional,
    Matrix,
};
pub use mobius::{companion_group, default_group, CircleArc, Generator, GroupPresentation, MobiusKind, MobiusMap};
pub use roof::{
    difference_bound, parabolic_growth, periodic_check, roof, PeriodicCheck, Representation, RepresentationKind, RoofPotential,
};
