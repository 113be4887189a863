use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input has no data rows")]
    EmptyInput,

    #[error("column for role `{role}` is not mapped or not present in the header")]
    MissingColumn { role: String },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("duplicate cell id `{0}`")]
    DuplicateCellId(String),

    #[error("spatial scope contains no cells")]
    EmptyScope,

    #[error("every disk was excluded; check the radius, boundary margin and minimum occupancy")]
    NoRowsRetained,

    #[error("scope `{scope}` has {cells} cells but k = {k} neighbors were requested")]
    ScopeTooSmall {
        scope: String,
        cells: usize,
        k: usize,
    },

    #[error("per-FOV scope requested but cell `{0}` has no FOV")]
    MissingFov(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("composition row {0} has no positive entries")]
    AllZeroRow(usize),

    #[error("k = {k} exceeds the number of rows ({rows})")]
    KTooLarge { k: usize, rows: usize },

    #[error("data are degenerate: {0}")]
    DegenerateData(String),

    #[error("at least {needed} rows are required, got {got}")]
    InsufficientRows { needed: usize, got: usize },

    #[error("work budget exceeded: {0}")]
    ResourceExceeded(String),

    #[error("rejection sampling stalled for community {community} (acceptance rate {rate:.2e})")]
    RejectionStall { community: usize, rate: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("cell type `{0}` is not in the registry")]
    UnknownCellType(String),

    #[error("predictor is constant")]
    DegenerateDesign,

    #[error("response contains a single class")]
    SingleClass,

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyInput => "EmptyInput",
            Error::MissingColumn { .. } => "MissingColumn",
            Error::Parse { .. } => "ParseError",
            Error::DuplicateCellId(_) => "DuplicateCellId",
            Error::EmptyScope => "EmptyScope",
            Error::NoRowsRetained => "NoRowsRetained",
            Error::ScopeTooSmall { .. } => "ScopeTooSmall",
            Error::MissingFov(_) => "MissingFov",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::AllZeroRow(_) => "AllZeroRow",
            Error::KTooLarge { .. } => "KTooLarge",
            Error::DegenerateData(_) => "DegenerateData",
            Error::InsufficientRows { .. } => "InsufficientRows",
            Error::ResourceExceeded(_) => "ResourceExceeded",
            Error::RejectionStall { .. } => "RejectionStall",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::UnknownCellType(_) => "UnknownCellType",
            Error::DegenerateDesign => "DegenerateDesign",
            Error::SingleClass => "SingleClass",
            Error::Csv(_) => "Csv",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}
