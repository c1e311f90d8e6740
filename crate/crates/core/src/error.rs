use thiserror::Error;

/// Errors raised by the lab's operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabError {
    #[error("{0} is not an odd prime")]
    NotPrime(u64),
    #[error("zero has no inverse")]
    ZeroInverse,
    #[error("prime {0} is not congruent to 3 mod 4")]
    BadPrime(u64),
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("matrix lies in the Borel subgroup (lower-left entry is zero)")]
    BorelElement,
    #[error("eps = {0} is a quadratic residue")]
    BadEps(u64),
    #[error("scaling parameter lambda must be nonzero")]
    ZeroLambda,
    #[error("Gaussian parameter has absolute value below 2")]
    ParamTooSmall,
    #[error("no word within the search bound has this column")]
    NotFound,
    #[error("generator set contains the identity")]
    IdentityGenerator,
    #[error("generator set does not generate the group ({reached} of {total} vertices reached)")]
    NotConnected { reached: usize, total: usize },
    #[error("generator set has repeated elements (is 2N < p?)")]
    DuplicateGenerators,
    #[error("blocks of the union-structured family overlap")]
    OverlappingBlocks,
    #[error("estimated work {estimate} exceeds the budget {budget}")]
    BudgetExceeded { estimate: u128, budget: u128 },
    #[error("subgroup order {0} does not divide p - 1")]
    BadOrder(u64),
    #[error("first shift does not sit at the pole of the map")]
    PoleMismatch,
    #[error("shift {0} coincides with the pole; its image would be infinite")]
    DegenerateShift(u64),
    #[error("shift {0} is not in the subgroup")]
    ShiftNotInSubgroup(u64),
    #[error("shifts are not pairwise distinct")]
    DuplicateShifts,
    #[error("shift must be nonzero")]
    ZeroShift,
    #[error("starting intersection is empty")]
    EmptyIntersection,
    #[error("subgroup does not contain -1")]
    SymmetryRequired,
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
