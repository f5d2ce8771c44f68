use thiserror::Error;

/// Error type shared by all solver and pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("rejected input: {0}")]
    InvalidInput(String),

    #[error("degenerate neighborhood for particle {particle}: {reason}")]
    DegenerateNeighborhood { particle: usize, reason: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("mesh parse error at byte {offset}: {reason}")]
    MeshParse { offset: usize, reason: String },

    #[error("degenerate normal at particle {0}")]
    DegenerateNormal(usize),

    #[error("inverted element at solid particle {0} (det F <= 0)")]
    InvertedElement(usize),

    #[error("inverted shell at particle {0} (singular local deformation gradient)")]
    InvertedShell(usize),

    #[error("frame error: {0}")]
    Frame(String),

    #[error("curvature overrun at shell particle {particle}, layer {layer}: projected area factor {factor} <= 0")]
    CurvatureOverrun {
        particle: usize,
        layer: usize,
        factor: f64,
    },

    #[error("scheduling error: {0}")]
    Scheduling(String),

    #[error("stability error: {0}")]
    Stability(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("scenario validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),

    #[error("non-finite state in stage `{stage}` at t = {time}: {detail}")]
    NonFiniteState {
        stage: String,
        time: f64,
        detail: String,
    },

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("diagnostic error: {0}")]
    Diagnostic(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{context}: {source}")]
    Stage {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps an error with step/stage context while keeping the source chain.
    pub fn in_stage(self, context: impl Into<String>) -> Self {
        Error::Stage {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
