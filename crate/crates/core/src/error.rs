use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid card notation: {0}")]
    CardParse(String),
    #[error("invalid action notation: {0}")]
    ActionParse(String),
    #[error("illegal bid {bid}; valid bids are {valid:?}")]
    IllegalBid { bid: u8, valid: Vec<u8> },
    #[error("illegal move {0}")]
    IllegalMove(String),
    #[error("auction already finished")]
    AuctionFinished,
    #[error("drawn games carry no score")]
    DrawHasNoScore,
    #[error("no candidate actions to encode")]
    EmptyCandidates,
    #[error("no estimates to select from")]
    EmptyEstimates,
    #[error("malformed game record: {0}")]
    Record(String),
}

pub type Result<T> = std::result::Result<T, Error>;
