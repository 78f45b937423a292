use thiserror::Error;

/// Errors surfaced while loading or validating simulation inputs.
#[derive(Debug, Error)]
pub enum InputError {
    #[error("{file}:{line}: malformed XML: {msg}")]
    Xml { file: String, line: u32, msg: String },
    #[error("{file}:{line}: duplicate id \"{id}\"")]
    DuplicateId { file: String, line: u32, id: String },
    #[error("{file}:{line}: reference to unknown {kind} \"{id}\"")]
    UnknownRef {
        file: String,
        line: u32,
        kind: &'static str,
        id: String,
    },
    #[error("{file}:{line}: {msg}")]
    Invalid { file: String, line: u32, msg: String },
    #[error("config key \"{key}\": {msg}")]
    ConfigKey { key: String, msg: String },
    #[error("unknown config key \"{key}\"")]
    UnknownConfigKey { key: String },
    #[error("scenario validation: {0}")]
    Scenario(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl InputError {
    pub fn invalid(file: &str, line: u32, msg: impl Into<String>) -> Self {
        InputError::Invalid {
            file: file.to_string(),
            line,
            msg: msg.into(),
        }
    }
}

/// Errors from metric computation over finished traces.
#[derive(Debug, Error)]
pub enum MetricError {
    #[error("trace line {line}: {msg}")]
    MalformedTrace { line: usize, msg: String },
    #[error("no runs supplied")]
    NoRuns,
    #[error("run {run} has zero packets sent")]
    ZeroSent { run: usize },
    #[error("mean packets sent is zero")]
    ZeroMeanSent,
}
