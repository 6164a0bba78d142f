//! Boolean matrix factorization of binary evidence for lifted inference.
//!
//! Conditioning a relational model on a binary relation `p(X,Y)` breaks the
//! symmetries lifted inference relies on. If the evidence matrix factors as a
//! Boolean product `P = Q R^T` of rank `n`, the same conditioning can be
//! expressed with `n` pairs of unary predicates plus one hard formula:
//!
//! ```text
//! p(X,Y) <=> (q1(X) ^ r1(Y)) v ... v (qn(X) ^ rn(Y))
//! ```
//!
//! Low-rank approximations trade evidence fidelity for symmetry.
//!
//! Modules:
//! - [`boolmat`]: Boolean matrices, products and error counts.
//! - [`factorize`]: exact Boolean rank and the greedy association heuristic.
//! - [`reduction`]: binary evidence to extended model plus unary evidence.
//! - [`mln`]: Markov logic parsing, grounding and exact inference.
//! - [`sampler`]: Gibbs sampling with symmetry-based orbital moves.
//! - [`experiment`]: synthetic data and the rank/error/KLD sweeps.

pub mod boolmat;
pub mod factorize;
pub mod mln;
pub mod reduction;
pub mod sampler;
pub mod experiment;
