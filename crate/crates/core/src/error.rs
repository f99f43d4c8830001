use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the function.
    Domain {
        what: &'static str,
        value: f64,
    },
    /// A configuration value violates its invariant; `field` names it.
    InvalidConfig {
        field: &'static str,
        reason: &'static str,
    },
    /// The series hit `k_max` before the truncation rule fired.
    NonConvergence {
        partial_sum: f64,
        last_term: f64,
        terms: usize,
    },
    EmptyDataset,
    EmptySamples,
    /// Fewer than the minimum number of pilot candidates had a finite weight.
    DegeneratePilot {
        finite: usize,
        pilot_size: usize,
    },
    /// The adaptive proposal did not reach its effective sample size target within the round limit.
    PilotStalled {
        rounds: usize,
        ess: f64,
    },
    /// Every candidate weight is zero.
    TotalDegeneracy {
        candidates: usize,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what} out of domain: {value}"),
            Error::InvalidConfig { field, reason } => write!(f, "invalid `{field}`: {reason}"),
            Error::NonConvergence { partial_sum, last_term, terms } => {
                write!(f, "series did not converge after {terms} terms (partial sum {partial_sum:e}, last term {last_term:e})")
            }
            Error::EmptyDataset => f.write_str("empty dataset"),
            Error::EmptySamples => f.write_str("empty sample set"),
            Error::DegeneratePilot { finite, pilot_size } => write!(
                f,
                "degenerate pilot: only {finite} of {pilot_size} candidates have finite weight; \
                 widen the prior or use a uniform box proposal"
            ),
            Error::PilotStalled { rounds, ess } => write!(
                f,
                "adaptive proposal stalled after {rounds} rounds at effective sample size {ess:.1}; \
                 use a uniform box proposal"
            ),
            Error::TotalDegeneracy { candidates } => {
                write!(f, "all {candidates} candidate weights are zero")
            }
        }
    }
}

impl core::error::Error for Error {}
