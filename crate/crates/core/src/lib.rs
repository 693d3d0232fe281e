//! Numerical laboratory for mirror-volume geometry of Hermitian line bundles
//! over flat tori with G2, Spin(7) and SU(m) structures.

pub mod calibration;
pub mod error;
pub mod exec;
pub mod forms;
pub mod holonomy;
pub mod identity;
pub mod special;
pub mod torus;

pub use error::{Error, Result};
pub use exec::Exec;
pub use forms::{ComplexKForm, Endo, KForm, MultiIndexTable};
pub use holonomy::{make_structure, HolonomyStructure, StructureKind};
