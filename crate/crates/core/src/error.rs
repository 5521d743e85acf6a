use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("degenerate metric at {point:?}: smallest eigenvalue {min_eigenvalue:e}")]
    Degenerate {
        point: Vec<f64>,
        min_eigenvalue: f64,
    },
    #[error("point {point:?} is closer than {margin:e} to the chart boundary")]
    Margin { point: Vec<f64>, margin: f64 },
    #[error("tensor shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("geodesic integration failed at t = {t}: last valid state x = {x:?}")]
    Integration { t: f64, x: Vec<f64> },
    #[error("geodesic left the chart at t = {t} (requested {t_end})")]
    BoundaryExit { t: f64, t_end: f64 },
    #[error("radius {radius} exceeds the injectivity estimate {estimate}")]
    Injectivity { radius: f64, estimate: f64 },
    #[error("two-point shooting failed: {0}")]
    Shooting(String),
    #[error("leafwise continuation failed: {0}")]
    Continuation(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("partial sample: reached radius {achieved} of requested {requested}")]
    PartialSample { achieved: f64, requested: f64 },
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input rather than numerical trouble.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Domain(_)
            | Error::InvalidInput(_)
            | Error::Refused(_)
            | Error::ShapeMismatch(_)
            | Error::Unsupported(_)
            | Error::Io(_)
            | Error::Json(_) => true,
            Error::Context { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}
