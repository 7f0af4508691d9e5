//! Quantum random walks on a toy Fock space and the Evans-Hudson flows they approximate.

pub mod flow;
pub mod fock;
pub mod gksl;
pub mod linalg;
pub mod testfn;
pub mod walk;

pub use gksl::{BlockOperator, GkslModel, ModelError, StepUnitary};
pub use flow::{FlowOracle, FlowValue, WeakFunctional};
pub use fock::{IntervalSpace, IntervalVector, Process};
pub use linalg::{c64, CMatrix, CVector, LinalgError};
pub use testfn::TestFunction;
pub use walk::{slot_averages, SlotAverages, ToyState, Walk, WalkError};
pub use num_complex::Complex64 as C64;
