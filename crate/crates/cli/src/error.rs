use reachmac::groundtruth::GroundTruthError;
use reachmac::ingest::IngestError;
use reachmac::predict::ReportError;
use reachmac::stats::StatsError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{stage}: missing input {path} (run `{needs}` first)")]
    MissingStageInput { stage: &'static str, path: String, needs: &'static str },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    GroundTruth(#[from] GroundTruthError),
    #[error("{context}: {source}")]
    Stats { context: String, source: StatsError },
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: u64, message: String },
    #[error("io error on {path}: {error}")]
    Io { path: String, error: std::io::Error },
}

impl CliError {
    pub fn stats(context: impl Into<String>) -> impl FnOnce(StatsError) -> CliError {
        let context = context.into();
        move |source| CliError::Stats { context, source }
    }

    pub fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |error| CliError::Io { path: path.display().to_string(), error }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::MissingStageInput { .. } => "MissingStageInput",
            CliError::Config(_) => "ConfigError",
            CliError::Ingest(e) => e.kind(),
            CliError::GroundTruth(e) => match e {
                GroundTruthError::FileNotFound(_) => "FileNotFound",
                GroundTruthError::ParseError { .. } => "ParseError",
                GroundTruthError::Io { .. } => "IoError",
                GroundTruthError::UnknownCountry(_) => "UnknownCountry",
            },
            CliError::Stats { source, .. } => match source {
                StatsError::NonFiniteInput => "NonFiniteInput",
                StatsError::LengthMismatch(..) => "LengthMismatch",
                StatsError::DegenerateInput => "DegenerateInput",
                StatsError::TooFewPoints { .. } => "TooFewPoints",
                StatsError::DegenerateDesign => "DegenerateDesign",
                StatsError::ZeroTruth(_) => "ZeroTruth",
                StatsError::EmptyInput => "EmptyInput",
                StatsError::Domain(_) => "DomainError",
            },
            CliError::Report(e) => match e {
                ReportError::UnfittedModel => "UnfittedModel",
                ReportError::EmptyInput => "EmptyInput",
                ReportError::Stats(_) => "StatsError",
                ReportError::Io { .. } => "IoError",
            },
            CliError::Parse { .. } => "ParseError",
            CliError::Io { .. } => "IoError",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    /// One-line JSON report for stderr.
    pub fn report(&self) -> String {
        json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}
