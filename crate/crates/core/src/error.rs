use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("class {class} not present in mask")]
    ClassNotPresent { class: u8 },

    #[error("shift of class {class} ({op}, radius {radius}) changed no pixels")]
    DegenerateShift { class: u8, op: &'static str, radius: usize },

    #[error("infeasible corruption plan: {0}")]
    InfeasiblePlan(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("report and error log do not join; missing ids: {}", .missing.join(", "))]
    Join { missing: Vec<String> },

    #[error("image {image_id}: {source}")]
    Image {
        image_id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_image(self, image_id: &str) -> Self {
        match self {
            e @ Error::Image { .. } => e,
            e => Error::Image {
                image_id: image_id.to_string(),
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with any per-image context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Image { source, .. } => source.root(),
            e => e,
        }
    }

    /// Process exit code for command-line front ends: 2 validation, 3 IO, 4 infeasible plan.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Io { .. } => 3,
            Error::InfeasiblePlan(_) => 4,
            _ => 2,
        }
    }
}
