use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A point outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Energy outside the open interval of the period annulus.
    #[error("energy {h} outside the open interval ({lo}, {hi})")]
    EnergyRange { h: f64, lo: f64, hi: f64 },

    /// Energy within the guard band of an interval endpoint; the oval has
    /// degenerated to the center point or the saddle loop.
    #[error("degenerate oval at h = {h} (within {guard} of an interval endpoint)")]
    DegenerateOval { h: f64, guard: f64 },

    /// Adaptive quadrature hit the node cap before reaching the tolerance.
    /// Carries the best estimate and the last observed update.
    #[error("quadrature did not converge: estimate {estimate}, last update {last_update}")]
    Accuracy { estimate: f64, last_update: f64 },

    /// Root finder failed to converge inside its bracket.
    #[error("root finding failed: {0}")]
    RootFind(String),

    /// Integral index outside the range the recurrences can reach.
    #[error("unsupported integral index ({i},{j}) for {sys}")]
    UnsupportedIndex { sys: &'static str, i: i64, j: i64 },

    /// Caller violated an operation precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The library reached a state the underlying theory rules out.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    /// Evaluation too close to a singular locus of a differential relation.
    #[error("h = {h} is within {standoff} of the singular locus {locus}")]
    NearSingularLocus { h: f64, locus: &'static str, standoff: f64 },

    /// A ratio of integrals whose denominator is numerically zero.
    #[error("ratio denominator {name} is near zero at h = {h} (value {value})")]
    RatioDenominatorNearZero { name: &'static str, h: f64, value: f64 },

    /// Simulator step size underflowed.
    #[error("step size underflow at t = {t} (h = {step})")]
    StepUnderflow { t: f64, step: f64 },

    /// Simulator exceeded the allowed number of section crossings.
    #[error("event cap of {cap} crossings exceeded")]
    EventCap { cap: usize },

    /// Trajectory left the configured bounding region.
    #[error("trajectory escaped the bounding region at ({x}, {y})")]
    Escape { x: f64, y: f64 },

    /// Trajectory meets the switching line tangentially.
    #[error("tangential section crossing at x = {x} (|dy/dt| = {ydot})")]
    Tangency { x: f64, ydot: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
