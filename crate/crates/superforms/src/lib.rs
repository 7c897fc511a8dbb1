//! Exact symbolic engine for the super Cartan-de Rham calculus of stable forms.
//!
//! The crate is organized bottom-up:
//!
//! * [`grassmann`] — exact arithmetic in a finite Grassmann algebra over the
//!   rationals, the scalar type for everything else;
//! * [`supermatrix`] — parity-typed matrices over supernumbers, with
//!   multiplication, block Schur inversion and the Berezinian;
//! * [`autodiff`] — exact left derivatives of evaluators with respect to
//!   matrix entries, realized by nilpotent probe generators;
//! * [`forms`] — straight, dual and mixed form values, the Berezinian
//!   generating class, and checkers for the defining equations;
//! * [`operators`] — the stability isomorphisms sigma and tau, the
//!   exterior/contraction operators e(alpha), e(u), e_alpha, i_u, and the
//!   graded anticommutator harness;
//! * [`manifold`] — coordinate patches, polynomial functions, vector fields,
//!   naive differential forms, the differential d-bar, the module action and
//!   the Lie derivative;
//! * [`sample`] — deterministic samplers for desk-scale test instances;
//! * [`recipe`] — serializable descriptions of generating-class forms, so
//!   failing instances can be stored and replayed.
//!
//! All arithmetic is exact; every identity checked by the test suites is an
//! equality of rational numbers, never a float comparison.

pub mod autodiff;
pub mod error;
pub mod forms;
pub mod grassmann;
pub mod manifold;
pub mod operators;
pub mod recipe;
pub mod sample;
pub mod supermatrix;

pub use error::EvalError;
pub use grassmann::{Context, GenArena, GrassmannError, Monomial, Parity, Supernumber};
pub use supermatrix::{MatrixError, ParitySignature, SuperMatrix};
