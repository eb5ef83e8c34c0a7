use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("instance {0} has zero total weight")]
    EmptyInstance(usize),
    #[error("instance {instance}: normalized weight {weight:e} is below the floor {floor:e}")]
    WeightBelowFloor { instance: usize, weight: f64, floor: f64 },
    #[error("malformed instance: {0}")]
    MalformedInstance(String),
    #[error("instance {0} has no active mass")]
    NoActiveMass(usize),
    #[error("n = {n} exceeds the brute-force cap {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("index sets overlap")]
    OverlappingSets,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no vertex of instance {instance} reaches the degree witness ({best:e} < {needed:e})")]
    NoHighDegreeVertex { instance: usize, best: f64, needed: f64 },
    #[error("conditioning event has probability {0:e}")]
    ZeroProbabilityEvent(f64),
    #[error("level exhausted: need {needed}, have {available}")]
    LevelExhausted { needed: usize, available: usize },
    #[error("solver hit its iteration limit (best slack {slack:e})")]
    MaxItersExceeded { slack: f64 },
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("relaxation is infeasible (best slack {slack:e})")]
    Infeasible { slack: f64 },
    #[error("Gram matrix is not PSD (min eigenvalue {0:e})")]
    GramNotPsd(f64),
    #[error("no eligible special vertex for instance {0}")]
    NoEligibleSpecial(usize),
    #[error("every fixing of S* is infeasible")]
    AllFixingsInfeasible,
    #[error("perturbation lost too much value on instance {instance}: {after} < {bound}")]
    PerturbGuarantee { instance: usize, after: f64, bound: f64 },
    #[error("prover budget exhausted after {boxes} boxes with {frontier} undecided")]
    BudgetExhausted { boxes: usize, frontier: usize },
    #[error("prover found {0} counterexample configurations")]
    Counterexample(usize),
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
