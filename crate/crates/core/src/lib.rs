//! Solvers for the two large-population limits of symmetric stochastic
//! differential games: the mean field game equilibrium and the optimal
//! control of McKean–Vlasov dynamics.

pub mod emissions;
pub mod error;
pub mod interp;
pub mod lqmodel;
pub mod mfg_pde_oracle;
pub mod mfg_lq;
pub mod mkv_lq;
pub mod normal;
pub mod nplayer_sim;
pub mod policy;
pub mod riccati;
pub mod rng;
pub mod scalar_examples;

pub use error::{ModelError, SolveError};
