use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("line {line}: malformed header: {msg}")]
    MalformedHeader { line: usize, msg: String },
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("line {line}: invalid token {token:?}")]
    InvalidToken { line: usize, token: String },
    #[error("line {line}: literal {literal} out of range for {n_vars} variables")]
    LiteralOutOfRange {
        line: usize,
        literal: i64,
        n_vars: usize,
    },
    #[error("line {line}: clause has {len} literals, expected 3")]
    ClauseLength { line: usize, len: usize },
    #[error("line {line}: variable {var} appears more than once in a clause")]
    DuplicateVariable { line: usize, var: u32 },
    #[error("header declares {declared} clauses but {found} were read")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error("invalid generator arguments: {0}")]
    InvalidGenerator(String),
    #[error("assignment has {found} values, formula has {expected} variables")]
    LengthMismatch { expected: usize, found: usize },
    #[error("brute force limited to {max} variables, formula has {n_vars}")]
    TooManyVariables { n_vars: usize, max: usize },
    #[error("variable {var} does not occur in the clause")]
    VariableNotInClause { var: u32 },
    #[error("empty input")]
    EmptyInput,
    #[error("state does not match formula: {0}")]
    SizeMismatch(String),
    #[error("non-finite derivative at step {step}")]
    NonFinite { step: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("input out of range: {0}")]
    OutOfRange(String),
    #[error("graph line {line}: {msg}")]
    Graph { line: usize, msg: String },
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
