use std::fmt;

use comma_core::concept_kb::KbError;
use comma_core::corpus::CorpusError;
use comma_core::generation::GenerationError;
use comma_core::metrics::MetricsError;
use comma_core::prompting::PromptError;
use comma_core::understanding::UnderstandingError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Data,
    Runtime,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Config => 2,
            Kind::Data => 3,
            Kind::Runtime => 4,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Kind::Config => "config",
            Kind::Data => "data",
            Kind::Runtime => "runtime",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { kind: Kind::Config, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { kind: Kind::Data, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self { kind: Kind::Runtime, message: message.into() }
    }

    /// One line of JSON for stderr.
    pub fn to_json_line(&self) -> String {
        let one_line = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        serde_json::json!({ "error": self.kind.name(), "message": one_line }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.kind.name(), self.message)
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Config(_) => CliError::config(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<KbError> for CliError {
    fn from(e: KbError) -> Self {
        match e {
            KbError::Config(_) | KbError::EmptyVocabulary(_) => CliError::config(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<UnderstandingError> for CliError {
    fn from(e: UnderstandingError) -> Self {
        match e {
            UnderstandingError::Contract(_) => CliError::config(e.to_string()),
            UnderstandingError::Incompatible(_) | UnderstandingError::Format(_) | UnderstandingError::Io(_) => {
                CliError::data(e.to_string())
            }
            _ => CliError::runtime(e.to_string()),
        }
    }
}

impl From<GenerationError> for CliError {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::Contract(_) => CliError::config(e.to_string()),
            GenerationError::Incompatible(_)
            | GenerationError::Format(_)
            | GenerationError::Io(_)
            | GenerationError::EmptyMask => CliError::data(e.to_string()),
            _ => CliError::runtime(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Undefined(_) => CliError::runtime(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        CliError::data(e.to_string())
    }
}
