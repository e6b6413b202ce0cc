use thiserror::Error;

pub type Result<T> = std::result::Result<T, CsfError>;

#[derive(Debug, Error)]
pub enum CsfError {
    #[error("grid size {0} is not a power of two >= 16")]
    InvalidGrid(usize),

    #[error("profile has a non-finite sample at index {0}")]
    NonFinite(usize),

    #[error("grid sizes differ: {0} vs {1}")]
    GridMismatch(usize, usize),

    #[error("chart height {0} outside the chart domain |z| < 1")]
    ChartDomain(f64),

    #[error("curve left the chart tube at t = {time}: sup|h| = {sup} > {limit}")]
    ChartBreach { time: f64, sup: f64, limit: f64 },

    #[error("numerical instability detected at t = {time}")]
    Instability { time: f64 },

    #[error("derivative order {order} too large for grid size {n}")]
    OrderTooLarge { order: usize, n: usize },

    #[error("ratio undefined: curvature derivative energy {0:e} is numerically zero")]
    UndefinedRatio(f64),

    #[error("profile is not area-bisecting: |defect| = {0:e}")]
    NotAreaBisecting(f64),

    #[error("function is numerically zero (sup = {0:e})")]
    NumericallyZero(f64),

    #[error("hypotheses not met: {0}")]
    HypothesisNotMet(String),

    #[error("fit window [{lo}, {hi}] contains {count} usable snapshots")]
    EmptyWindow { lo: f64, hi: f64, count: usize },

    #[error("coefficient log is empty")]
    EmptyLog,

    #[error("index ({0}, {1}) is not interior to the family grid")]
    BoundaryIndex(usize, usize),

    #[error("family members {0:?} and {1:?} coincide")]
    IdenticalProfiles((usize, usize), (usize, usize)),

    #[error("family members {a:?} and {b:?} have {count} intersections on the lift (expected 2)")]
    ExtraIntersections {
        a: (usize, usize),
        b: (usize, usize),
        count: usize,
    },

    #[error("family member {index:?} failed: {source}")]
    Member {
        index: (usize, usize),
        #[source]
        source: Box<CsfError>,
    },

    #[error("trajectory has not converged: final residual {0:e}")]
    Unconverged(f64),

    #[error("distance samples must vanish at s = 1 (got {0:e})")]
    DistanceNotVanishing(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CsfError {
    /// True for failures of the numerics themselves (as opposed to bad input).
    pub fn is_numeric_abort(&self) -> bool {
        match self {
            CsfError::ChartBreach { .. } | CsfError::Instability { .. } => true,
            CsfError::Member { source, .. } => source.is_numeric_abort(),
            _ => false,
        }
    }
}
