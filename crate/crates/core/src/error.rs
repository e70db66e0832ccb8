use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("alphabet size must be at least 2, got {0}")]
    InvalidAlphabet(usize),

    #[error("symbol {symbol} outside alphabet of size {size}")]
    SymbolOutOfRange { symbol: usize, size: usize },

    #[error("undefined conditional for `{label}` after a zero-probability prefix of length {position}")]
    UndefinedConditional { label: String, position: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("mixture annihilated: every component has zero probability after {position} symbols")]
    MixtureAnnihilated { position: usize },

    #[error("enumeration of {cells} cells exceeds the cap of {cap}")]
    EnumerationTooLarge { cells: u128, cap: u128 },

    #[error("class of {size} measures exceeds the cap of {cap}")]
    ClassTooLarge { size: u128, cap: u128 },

    #[error("method not applicable: {0}")]
    MethodInapplicable(String),

    #[error("chain path reaches state {required}, but the output map only covers states up to {available}; raise J_max or extend the map")]
    ChainHorizonExceeded { required: usize, available: usize },

    #[error("class is empty")]
    EmptyClass,

    #[error("horizon {0} was not materialized")]
    UncertifiedHorizon(usize),

    #[error("process is not stationary: {0}")]
    NotStationary(String),

    #[error("regret undefined: {0}")]
    UndefinedRegret(String),
}

pub type Result<T> = std::result::Result<T, Error>;
