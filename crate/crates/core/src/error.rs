use crate::grid::StateId;
use crate::tree::OrKey;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("a {width}x{height} maze cannot host two distinct empty cells")]
    MazeTooSmall { width: usize, height: usize },
    #[error("density {0} is outside [0, 1]")]
    InvalidDensity(f64),
    #[error("maze has {0} empty cells, at least two are required")]
    TooFewEmptyCells(usize),
    #[error("cell {0} is outside the {1}x{2} grid")]
    OutOfBounds(StateId, usize, usize),
    #[error("cell {0} is a wall")]
    WallCell(StateId),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("malformed plan: {0}")]
    MalformedPlan(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("search budget exhausted")]
    BudgetExhausted,
    #[error("node {0} is already expanded")]
    AlreadyExpanded(OrKey),
    #[error("node {0} is not expanded")]
    NotExpanded(OrKey),
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("instance has {0} empty cells, above the exact-oracle limit of {1}; use sampled evaluation")]
    InstanceTooLarge(usize, usize),
    #[error("non-finite loss ({0})")]
    NonFiniteLoss(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
