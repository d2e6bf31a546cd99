use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("families are defined over different sample spaces")]
    SpaceMismatch,

    #[error("invalid sample space: {0}")]
    InvalidSpace(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("basis is not orthonormal (max deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },

    #[error("subspaces intersect numerically: atom {index} has relative residual {relative_norm:.3e}")]
    SubspacesIntersect { index: usize, relative_norm: f64 },

    #[error("atom {index} of the signal family is numerically zero")]
    DegenerateAtom { index: usize },

    #[error("degenerate subspace: the cross Gram matrix has rank zero")]
    DegenerateSubspace,

    #[error("no admissible atom left: further forward steps are numerically unstable")]
    StabilityStop,

    #[error("atom {0} is not in the current selection")]
    NotSelected(usize),

    #[error("atom {0} is already selected")]
    AlreadySelected(usize),

    #[error("selection is empty")]
    EmptySelection,

    #[error("requested {requested} terms, projector has rank {rank}")]
    TruncationOutOfRange { requested: usize, rank: usize },

    #[error("candidate {0} has a zero residual atom")]
    ZeroResidual(usize),
}
