//! Spectral numerics for ergodic Schrödinger operators on the Bethe lattice.
//!
//! The Bethe lattice 𝔹 with connectivity κ is the infinite regular tree in
//! which every vertex has κ + 1 neighbors (κ = 1 degenerates to the chain ℤ).
//! This crate provides, at desk scale:
//!
//! - **[`lattice`]** — exact integer geometry: vertex labels, the tree metric,
//!   the automorphisms τ₁ (level translation) and τ₂ (rotation), generator
//!   words, generalized shifts τ_x with two independent implementations, balls
//!   and spine paths.
//! - **[`ergodic`]** — i.i.d. disorder realizations ω as pure seeded functions
//!   of vertex labels, shift actions T_x on realizations, and the potential
//!   V_ω(x).
//! - **[`operator`]** — finite-volume Hamiltonians H = Δ + V with Dirichlet
//!   restriction, vertex deletion, and dense spectral utilities.
//! - **[`green`]** — four Green-function engines: direct solve, truncated
//!   random-walk (Neumann) expansion with its analytic error bound, the
//!   self-avoiding-walk factorization (a single product on trees), and the
//!   rooted Weyl m-function recursion, plus the free-lattice closed form.
//! - **[`spectral`]** — density-of-states estimators (resolvent smoothing and
//!   exact diagonalization), the Kesten–McKay density of the free Laplacian,
//!   and the log-energy (Thouless) integral with its closed-form derivative.
//! - **[`thouless`]** — Lyapunov-exponent estimators, the finite-volume
//!   remainder R_L, and closed-form free-Laplacian remainder checks: the
//!   decomposition 𝓛(z) = ∫ log|z−E| dn(E) + R(z) with R ≡ 0 at κ = 1 and
//!   nonconstant R for κ ≥ 2.
//! - **[`cli`]** — a reproducible experiment driver behind the `bethe` binary
//!   (subcommands `verify`, `dos`, `lyapunov`, `remainder`, `green`).
//!
//! Runnable walkthroughs live in `examples/`; start with
//! `cargo run --release -p bethe --example lattice_shifts`.

pub mod cli;
pub mod ergodic;
pub mod green;
pub mod lattice;
pub mod numerics;
pub mod operator;
pub mod spectral;
pub mod thouless;

pub use ergodic::{DisorderRealization, DisorderSpec, Distribution};
pub use lattice::{GeneratorWord, LatticeContext, RootPath, VertexLabel};
pub use operator::{FiniteOperator, Region};
pub use spectral::DosEstimate;
pub use thouless::{LyapunovEstimate, RemainderEstimate};
