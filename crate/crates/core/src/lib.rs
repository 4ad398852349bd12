//! Computable realization of the Fox–Artin wild arc and of the dynamical
//! systems that have it (or the boundary of its tube) as an invariant set.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`] — the self-similarity scaling `h`, the covering of the
//!   punctured space over `S^{n-1} × S^1`, and stereographic charts.
//! * [`predicates`] — exact orientation/intersection predicates with a
//!   deterministic symbolic perturbation fallback.
//! * [`arc`] — construction and certification of the three-arc generator
//!   `a, b, c`, the assembled wild arc, the Mazur-style closed knot image,
//!   and the straight control arc.
//! * [`flow`] — the model flow on the solid cylinder, its time-one map and
//!   equilibria.
//! * [`tube`] — tubular-neighborhood coordinates (straight-ray and
//!   frame-based) exactly conjugating the scaling to a unit translation,
//!   and the model diffeomorphism glued from the flow and the scaling.
//! * [`sphere`] — chart-tagged points on `S^n`, the suspension of the model
//!   diffeomorphism to the sphere, collar selection, and the dimension-3
//!   Pixton diffeomorphism.
//! * [`analysis`] — numerical fixed-point classification, separatrix
//!   tracing, heteroclinic certification, basin sampling.
//! * [`surgery`] — the two glued 4-sphere diffeomorphisms (wild-arc
//!   heteroclinic variant and tube-boundary cylinder variant).
//! * [`export`] — deterministic CSV/OBJ/JSON writers.

pub mod analysis;
pub mod arc;
pub mod export;
pub mod flow;
pub mod geometry;
pub mod predicates;
pub mod sphere;
pub mod surgery;
pub mod tube;

use thiserror::Error;

/// Crate-wide error type. Variant names are part of the public contract.
#[derive(Debug, Error)]
pub enum Error {
    /// An operation that needs a direction or a logarithmic radius was
    /// handed the origin (or a vector too close to it to normalize).
    #[error("zero point: {0}")]
    ZeroPoint(String),
    /// A chart evaluation was requested at its removed pole.
    #[error("pole singularity: {0}")]
    PoleSingularity(String),
    /// A geometric construction could not satisfy its stated invariants.
    #[error("construction failed: {0}")]
    ConstructionFailed(String),
    /// Consecutive pieces of a chain do not share endpoints.
    #[error("chain broken: {0}")]
    ChainBroken(String),
    /// An intersection test stayed degenerate even after the deterministic
    /// symbolic perturbation.
    #[error("degenerate after perturbation: {0}")]
    DegenerateAfterPerturbation(String),
    /// A point handed to the cylinder-side dynamics lies outside the solid
    /// cylinder.
    #[error("outside cylinder: {0}")]
    OutsideCylinder(String),
    /// A point handed to a tube chart lies outside the tube.
    #[error("outside tube: {0}")]
    OutsideTube(String),
    /// A search exhausted its budget without finding an admissible answer.
    #[error("not found: {0}")]
    NotFound(String),
    /// The two pieces of a glued map disagree beyond tolerance, or a
    /// requested gluing is inconsistent.
    #[error("gluing failed: {0}")]
    GluingFailed(String),
    /// A point does not belong to the domain of the glued manifold piece
    /// it was presented in.
    #[error("outside domain: {0}")]
    OutsideDomain(String),
    /// A numerical evaluation inside an estimator stencil failed.
    #[error("evaluation failed: {0}")]
    EvaluationFailed(String),
    /// A point submitted for fixed-point classification does not satisfy
    /// the fixed-point residual bound.
    #[error("not fixed: {0}")]
    NotFixed(String),
    /// An orbit being traced left the numerically trustworthy chart region.
    #[error("diverged off chart: {0}")]
    DivergedOffChart(String),
    /// Underlying I/O failure while writing an artifact.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// 3-vector used throughout the arc construction.
pub type V3 = nalgebra::Vector3<f64>;
/// 4-vector used by the 4-sphere surgeries.
pub type V4 = nalgebra::Vector4<f64>;
