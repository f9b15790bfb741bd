//! Error types shared across the pipeline.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("OBJ parse error at line {line}: {msg}")]
    ObjParse { line: usize, msg: String },

    #[error("face index {index} out of range at line {line} (mesh has {vertices} vertices)")]
    FaceIndexOutOfRange {
        line: usize,
        index: usize,
        vertices: usize,
    },

    #[error("degenerate face at line {line}: indices must be three distinct vertices")]
    DegenerateFace { line: usize },

    #[error("mesh has no vertices")]
    EmptyMesh,

    #[error("crop removed every vertex (radius {radius})")]
    EmptyCrop { radius: f64 },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("antipodal SRVF pair: geodesic is not unique")]
    AntipodalPair,

    #[error("{requested} pyramid levels requested but the grid supports at most {max}")]
    TooManyPyramidLevels { requested: usize, max: usize },

    #[error("pooling grid {pool_angles}x{pool_radii} exceeds DSF grid {angles}x{radii}")]
    PoolTooLarge {
        pool_angles: usize,
        pool_radii: usize,
        angles: usize,
        radii: usize,
    },

    #[error("training set contains a single class; at least two are required")]
    SingleClass,

    #[error("sequence is empty")]
    EmptySequence,

    #[error("stratification failed: {msg}")]
    Stratification { msg: String },

    #[error("invalid configuration: {msg}")]
    Config { msg: String },

    #[error("invalid file format: {msg}")]
    Format { msg: String },

    #[error("numerical failure: {msg}")]
    Numerical { msg: String },

    #[error("frame {index}: {source}")]
    Frame {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("stage {stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config { msg: msg.into() }
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format { msg: msg.into() }
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical { msg: msg.into() }
    }

    pub fn dimension(context: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
        }
    }

    pub fn at_frame(self, index: usize) -> Self {
        Error::Frame {
            index,
            source: Box::new(self),
        }
    }

    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code class: 2 for data/parse problems, 3 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::AntipodalPair | Error::Numerical { .. } => 3,
            Error::Frame { source, .. } | Error::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
