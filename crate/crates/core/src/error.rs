use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("lattice extent must be at least 1")]
    ZeroExtent,
    #[error("lambda1 = {0} is outside [1/2, 1]")]
    InvalidLambda(f64),
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("argument {value} is outside the domain [{lo}, {hi}]")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },
    #[error("no lattice node at offset ({0}, {1})")]
    NoNodeAt(i64, i64),
    #[error("graph has {copies} bond copies, enumeration cap is {cap}")]
    TooManyCopies { copies: usize, cap: usize },
    #[error("edge multiplicity {0} is not supported (1..=4)")]
    BadMultiplicity(u8),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid flow problem: {0}")]
    InvalidProblem(String),
    #[error("terminal node {node} is within {distance} hops of the patch rim (need {required})")]
    TooCloseToRim {
        node: usize,
        distance: usize,
        required: usize,
    },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("trials must be positive")]
    NoTrials,
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),
    #[error("fit did not converge after {iterations} iterations (rms {residual_rms})")]
    FitDiverged {
        iterations: usize,
        residual_rms: f64,
    },
    #[error("pairing expectation overflow guard: b*k = {0} exceeds {1}")]
    PairingOverflow(usize, usize),
    #[error("transform {transform} expects a {expected} lattice, got {found}")]
    KindMismatch {
        transform: &'static str,
        expected: &'static str,
        found: &'static str,
    },
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}
