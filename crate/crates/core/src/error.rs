use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid realization: {0}")]
    InvalidRealization(String),

    #[error("unknown named type `{0}`")]
    UnknownType(String),

    #[error("Demazure surjectivity fails in characteristic {0} for this realization")]
    NotSurjective(u64),

    #[error("enumeration budget exceeded: more than {0} elements")]
    BudgetExceeded(usize),

    #[error("cannot parse word `{0}`")]
    ParseWord(String),

    #[error("nil Hecke formula not applicable: {0}")]
    NotApplicable(String),

    #[error("no 2m-valent vertex for generators {0} and {1} (m = infinity)")]
    InfiniteBraid(String, String),

    #[error("homogeneity violated: {0}")]
    Homogeneity(String),

    #[error("non-polynomial pairing entry: {0}")]
    NonPolynomial(String),

    #[error("negative coefficient: {0}")]
    NegativeCoefficient(String),

    #[error("relation failed: {0}")]
    RelationFailed(String),

    #[error("evaluation point hits a pole")]
    DegeneratePoint,

    #[error("integer overflow in {0}")]
    Overflow(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
