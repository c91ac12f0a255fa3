use stark::analysis::AnalysisError;
use stark::evolve::EvolveError;
use stark::model::ModelError;
use stark::mpnum::MpError;
use stark::oracle::OracleError;
use stark::poles::PoleError;
use stark::spectral::SpectralError;

/// Failure classes of the command line, one per exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical certification failed: {0}")]
    Certification(String),
    #[error("oracle disagreement: relative L2 {l2:e} exceeds {threshold:e}")]
    Disagreement { l2: f64, threshold: f64 },
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Certification(_) => 3,
            CliError::Disagreement { .. } => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> CliError {
        CliError::Io { path: path.display().to_string(), source }
    }
}

impl From<MpError> for CliError {
    fn from(e: MpError) -> Self {
        match e {
            MpError::PrecisionTooLow(_) | MpError::NonFinite => CliError::Config(e.to_string()),
            MpError::PrecisionExhausted { .. } => CliError::Certification(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Mp(m) => m.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<PoleError> for CliError {
    fn from(e: PoleError) -> Self {
        match e {
            PoleError::Model(m) => m.into(),
            PoleError::Format(_) => CliError::Config(e.to_string()),
            other => CliError::Certification(other.to_string()),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::Model(m) => m.into(),
            SpectralError::Mp(m) => m.into(),
            other => CliError::Certification(other.to_string()),
        }
    }
}

impl From<EvolveError> for CliError {
    fn from(e: EvolveError) -> Self {
        match e {
            EvolveError::Config(s) => CliError::Config(s),
            EvolveError::Amplitude { .. } => CliError::Certification(e.to_string()),
            EvolveError::Spectral(s) => s.into(),
            EvolveError::Pole(p) => p.into(),
            EvolveError::Model(m) => m.into(),
            EvolveError::Mp(m) => m.into(),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Evolve(v) => v.into(),
            AnalysisError::Coverage(_) | AnalysisError::NoPulse(_) => CliError::Certification(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Config(s) => CliError::Config(s),
            other => CliError::Certification(other.to_string()),
        }
    }
}
