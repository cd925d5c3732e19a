use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown operator '{op}' at {line}:{col}")]
    UnknownOperator { line: usize, col: usize, op: String },
    #[error("non-linear term at {line}:{col}: only multiplication by an integer literal is allowed")]
    NonLinearTerm { line: usize, col: usize },
    #[error("predicate {pred} used with arity {found}, expected {expected}")]
    Arity { pred: String, expected: usize, found: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("input program already contains annotated predicate {0}")]
    AnnotatedInput(String),
    #[error("the dimension transform expects false-headed clauses as the query")]
    UnsupportedQuery,
    #[error("unknown clause id {0}")]
    UnknownClause(String),
    #[error("clause {0} has more than one body atom")]
    NonLinearClause(String),
    #[error("stack bound must be at least 1, got {0}")]
    BadIndex(usize),
    #[error("path is not a connected derivation: {0}")]
    Disconnected(String),
    #[error("trace tree does not match the program: {0}")]
    Structure(String),
    #[error("model-fact clause {0} cannot be mapped back to the original program")]
    ModelFactInTrace(String),
    #[error("time limit reached")]
    Timeout,
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
