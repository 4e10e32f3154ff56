use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Game(#[from] ddz_core::Error),
    #[error(transparent)]
    Model(#[from] ddz_model::ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("no game records")]
    EmptyRecords,
    #[error("checkpoint is missing the {0} network")]
    MissingNetwork(ddz_model::Position),
}

pub type Result<T> = std::result::Result<T, TrainError>;
