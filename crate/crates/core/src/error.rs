use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("unsupported geometry in feature {id}: {kind}")]
    NonPolygonal { id: String, kind: String },

    #[error("duplicate region id {0}")]
    DuplicateId(String),

    #[error("non-positive statistic for region {id}: {value}")]
    NonPositiveStatistic { id: String, value: f64 },

    #[error("missing statistic for region {0}")]
    MissingStatistic(String),

    #[error("invalid ring in region {id}: {reason}")]
    InvalidRing { id: String, reason: String },

    #[error("unknown region id {0} in statistics")]
    UnknownRegion(String),

    #[error("region {id} has no value for time step {time}")]
    MissingTimeStep { id: String, time: String },

    #[error("non-numeric cell at row {row}, column {column}: {value:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("degenerate bounding box: map has zero extent")]
    DegenerateBounds,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero-pixel region(s) at this resolution: {0:?}")]
    ZeroPixelRegion(Vec<String>),

    #[error("region {id} collapsed at iteration {iteration}")]
    RegionCollapsed { id: String, iteration: usize },

    #[error("invalid density: total mass is {0}")]
    InvalidDensity(f64),

    #[error("size mismatch: expected {expected} pixels per side, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("vertex count mismatch between frames {a} and {b}")]
    VertexCountMismatch { a: usize, b: usize },

    #[error("empty rasterization of region {0}")]
    EmptyRaster(String),

    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by malformed or invalid user input, as
    /// opposed to failures of the numerical pipeline.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Malformed(_)
                | Error::NonPolygonal { .. }
                | Error::DuplicateId(_)
                | Error::NonPositiveStatistic { .. }
                | Error::MissingStatistic(_)
                | Error::InvalidRing { .. }
                | Error::UnknownRegion(_)
                | Error::MissingTimeStep { .. }
                | Error::NonNumeric { .. }
                | Error::DegenerateBounds
                | Error::InvalidParameter(_)
                | Error::Read { .. }
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
