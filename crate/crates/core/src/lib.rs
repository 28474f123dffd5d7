//! Speed-gradient adaptive control under bounded disturbances.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: plants `ẋ = F(x, θ, t) + f(t)`, goal functions `Q(x)`, bounded
//!   disturbances and the speed `w = ∇Q(x)ᵀF(x, θ, t)` with its θ-gradient.
//! - [`speedgrad`]: the adaptation laws (basic, σ-modified, combined, deadzone),
//!   the parametric feedback `ζ(θ)` variants and their coercivity constants.
//! - [`sim`]: fixed-step RK4 integration of the closed loop, trajectory
//!   records, tail-supremum estimation and the Lyapunov decay certificate.
//! - [`plants`]: the scalar tightness example and the linear passification
//!   example, with Lyapunov-equation and stability-degree support.
//! - [`bounds`]: closed-form optimum estimate, gain threshold, corollary bound,
//!   linear error bound, and the per-scenario [`bounds::BoundReport`].

pub mod bounds;
pub mod certificate;
pub mod error;
pub mod model;
pub mod plants;
pub mod sampling;
pub mod sim;
pub mod speedgrad;

pub use certificate::Certificate;
pub use error::{Error, Result};

pub use nalgebra::{DMatrix, DVector};
