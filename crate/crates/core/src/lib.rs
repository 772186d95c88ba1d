//! Numerical geometry of the resolved conifold and its Ricci-flat Calabi
//! family.
//!
//! - [`chart`]: coordinates on `E = O(-1) ⊕ O(-1) → P¹`, the flop, and the
//!   contraction onto the quadric cone.
//! - [`profile`]: the radial profile `u'`, `u''` of the Ricci-flat family.
//! - [`forms`]: the (1,1)-forms as Hermitian matrices, fibre restrictions and
//!   comparisons.
//! - [`curvature`]: finite-difference complex Hessians and Ricci forms.
//! - [`metricgeom`]: radial lengths, zero-section scaling, graph distances and
//!   Gromov-Hausdorff upper bounds.
//! - [`experiment`]: the sweep runner behind the `conifold-lab` CLI.

pub mod chart;
pub mod curvature;
pub mod error;
pub mod experiment;
pub mod forms;
pub mod metricgeom;
pub mod profile;
mod sampling;

pub use chart::{ConePoint, DomainSpec, FibreCoord, FlopPoint, LogRadius, ResolvedPoint, Summand};
pub use error::{Error, Result};
pub use forms::{FibreForm, FormKind, HermitianForm, VectorField};
pub use metricgeom::{GHEstimate, MetricCloud};
pub use profile::{ProfileEval, ProfileParams};
