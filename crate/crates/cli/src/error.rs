use std::path::PathBuf;

use ricci_core::asymptotics::AsymptoticsError;
use ricci_core::barriers::BarrierError;
use ricci_core::bryant::BryantError;
use ricci_core::flow::FlowError;
use ricci_core::geometry::GeometryError;
use ricci_core::spectral::SpectralError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("run failed: {0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl From<BryantError> for CliError {
    fn from(e: BryantError) -> Self {
        match e {
            BryantError::InvalidParameter { .. } | BryantError::OutOfRange { .. } => CliError::Config(e.to_string()),
            _ => CliError::Run(e.to_string()),
        }
    }
}

impl From<BarrierError> for CliError {
    fn from(e: BarrierError) -> Self {
        match e {
            BarrierError::Bryant(b) => b.into(),
            BarrierError::InvalidParameter { .. } | BarrierError::BryantTooShort { .. } | BarrierError::Domain { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Run(e.to_string()),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::UnknownFixture(_) | GeometryError::InvalidParameter { .. } => CliError::Config(e.to_string()),
            _ => CliError::Run(e.to_string()),
        }
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::Geometry(g) => g.into(),
            FlowError::InvalidParameter { .. } => CliError::Config(e.to_string()),
            _ => CliError::Run(e.to_string()),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::InvalidParameter { .. } => CliError::Config(e.to_string()),
            _ => CliError::Run(e.to_string()),
        }
    }
}

impl From<AsymptoticsError> for CliError {
    fn from(e: AsymptoticsError) -> Self {
        match e {
            AsymptoticsError::Bryant(b) => b.into(),
            AsymptoticsError::Flow(f) => f.into(),
            AsymptoticsError::Spectral(s) => s.into(),
            AsymptoticsError::InvalidParameter { .. }
            | AsymptoticsError::OutOfDomain(_)
            | AsymptoticsError::BryantTooShort { .. } => CliError::Config(e.to_string()),
            AsymptoticsError::SeamJump { .. } => CliError::Run(e.to_string()),
        }
    }
}
