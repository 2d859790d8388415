use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported affine type: {0}")]
    UnsupportedType(String),
    #[error("zero polynomial has no order of vanishing")]
    ZeroPolynomial,
    #[error("linear system has no solution")]
    NoSolution,
    #[error("difference equation not solvable: {0}")]
    NotSolvable(String),
    #[error("ray phase {psi} is within {gap:e} of a kernel pole direction")]
    RayTooCloseToKernelPoles { psi: f64, gap: f64 },
    #[error("s = {re}+{im}i lies outside the guaranteed half-plane (margin {margin:e})")]
    DomainViolation { re: f64, im: f64, margin: f64 },
    #[error("quadrature failed: achieved error {achieved:e}")]
    QuadratureFailure { achieved: f64 },
    #[error("continuation exceeded {0} functional-equation steps")]
    ContinuationDepth(usize),
    #[error("pole of the right-hand side encountered at s = {re}+{im}i")]
    PoleEncountered { re: f64, im: f64 },
    #[error("log argument within {0:e} of its branch cut")]
    BranchCutProximity(f64),
    #[error("regularization mismatch: |coefficient| = {0:e}")]
    RegularizationMismatch(f64),
    #[error("invalid module data: {0}")]
    InvalidData(String),
    #[error("rational fit failed at degree {degree}: residual {residual:e}")]
    FitDegreeExceeded { degree: usize, residual: f64 },
    #[error("singular pencil on block {0}")]
    SingularPencil(String),
    #[error("missing root block for {0}")]
    MissingRootBlock(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
