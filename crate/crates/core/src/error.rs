use thiserror::Error;

use crate::params::Population;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("scaling parameter epsilon = {0} is outside (0, 1]")]
    EpsilonOutOfRange(f64),

    #[error("{what} must be nonnegative, got {value}")]
    Negative { what: &'static str, value: f64 },

    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },

    #[error("therapy efficacy nu = {0} exceeds 1 and would break positivity of the recruitment rule")]
    ControlTooLarge(f64),

    #[error("interaction produced a negative density {0}")]
    NegativeOutcome(f64),

    #[error(
        "noise law admits negative post-interaction densities for population {population}: \
         positivity margin {margin:.4} < 0"
    )]
    NoisePositivity { population: Population, margin: f64 },

    #[error("variance equilibrium undefined: sigma^2 >= 2 beta for population {0}")]
    InfiniteVariance(Population),

    #[error("time step {dt} violates dt * kappa_bound <= 1 (kappa_bound = {kappa_bound})")]
    StepTooLarge { dt: f64, kappa_bound: f64 },

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("mean of population {population} became nonpositive ({value}); reduce the time step")]
    NonPositiveMean { population: Population, value: f64 },

    #[error("singular tridiagonal system at row {0}")]
    SingularSystem(usize),

    #[error("density of population {population} became negative ({value:e}) at cell {cell}")]
    NegativeDensity { population: Population, cell: usize, value: f64 },

    #[error("energy-distance exponent p = {0} is outside (1/2, 1)")]
    ExponentOutOfRange(f64),

    #[error("grids differ: {0}")]
    GridMismatch(String),

    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
