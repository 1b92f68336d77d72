use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("phase {theta} lies on a kink of the phase-detector characteristic")]
    Breakpoint { theta: f64 },

    #[error("coefficient invariant violated in {case} case: {detail}")]
    InvalidCase { case: &'static str, detail: String },

    #[error("separatrix did not reach theta = {target} within t = {max_time}")]
    NoCrossing { target: f64, max_time: f64 },

    #[error("time limit {max_time} reached before any stop condition")]
    TimeLimit { max_time: f64 },

    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("invalid integrator options: {0}")]
    InvalidOptions(String),

    #[error("invalid sweep specification: {0}")]
    InvalidSweep(String),
}
