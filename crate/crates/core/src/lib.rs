//! Information-theoretic polynomial commitment with OT-based setup.
//!
//! A degree-`d` polynomial is held as an `s x s` matrix `A` (`d = s^2`). The
//! verifier obtains `Gamma = Lambda (A + B)` and `Omega = B Theta^T` through
//! secure two-party computation over oblivious transfer, keeping its
//! Vandermonde-structured keys hidden. Each evaluation round then costs the
//! verifier `O(s)` field operations.
//!
//! Layers, bottom up: [`field`] and [`polymat`] for arithmetic, [`ot`] and
//! [`s2pc`] for the commitment phase, [`protocol`] for the scheme itself,
//! [`wire`], [`transport`] and [`session`] for running it between processes,
//! and [`audit`] for exact and Monte-Carlo checks of its claims.

pub mod audit;
pub mod codec;
pub mod config;
pub mod efficiency;
pub mod exec;
pub mod field;
pub mod ot;
pub mod persist;
pub mod polymat;
pub mod protocol;
pub mod rng;
pub mod s2pc;
pub mod session;
pub mod transport;
pub mod wire;
