//! Orthonormal group dilations of Parseval wavelet frames over ascending HNN
//! extensions `G(α, Γ₀) = ⟨u, Γ₀ : uγu⁻¹ = α(γ)⟩`, computed on finite windows
//! of the pseudo-lattice `Γ = {uʲγ}`.
//!
//! The crate is organised bottom-up:
//!
//! - [`group`]: exact arithmetic in `Γ₀`, the monomorphism `α`, lattice points
//!   and reduced words of `G`.
//! - [`frame`]: Gram matrices `⟨π(j,γ)ψ, π(j',γ')ψ⟩` for minimally supported
//!   frequency wavelets, explicit vector systems and sampled 2D systems.
//! - [`roots`]: `α`-roots of finite-dimensional unitary representations.
//! - [`dilation`]: complement kernel, Kolmogorov factorization and the
//!   assembly of the dilating representation `τ` with its dilation vector.
//! - [`pipeline`]: the end-to-end run from a frame system to a report.
//! - [`report`]: residual certification and the JSON report.
//! - [`cli`]: configuration documents and the command-line pipeline.

pub mod cli;
pub mod dilation;
pub mod error;
pub mod frame;
pub mod group;
pub mod linalg;
pub mod matrix_io;
pub mod pipeline;
pub mod report;
pub mod roots;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
