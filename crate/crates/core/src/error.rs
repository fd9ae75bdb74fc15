use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("unknown face id {0}")]
    UnknownFace(usize),

    #[error("element {element} is not adjacent to face {face}")]
    NotAdjacent { face: usize, element: usize },

    #[error("negative polynomial degree {0}")]
    NegativeDegree(i32),

    #[error("non-finite value {value} at ({x}, {y})")]
    NonFinite { value: f64, x: f64, y: f64 },

    #[error("NaN in {0}")]
    NaN(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("penalty is undefined on transmission face {0}")]
    PenaltyOnTransmission(usize),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    LinearSolver { iterations: usize, residual: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    Newton { iterations: usize, residual: f64 },

    #[error("non-finite state at t = {time} s")]
    Blowup { time: f64 },

    #[error("step failed at t = {time} s: {source}")]
    Step {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("time step {dt} s exceeds the explicit stability bound {bound:.3e} s")]
    Cfl { dt: f64, bound: f64 },

    #[error("ODE integration unstable at t = {time} s")]
    Unstable { time: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status: 2 for bad configuration, 3 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::LinearSolver { .. }
            | Error::Newton { .. }
            | Error::Blowup { .. }
            | Error::Step { .. }
            | Error::Cfl { .. }
            | Error::Unstable { .. } => 3,
            _ => 1,
        }
    }
}
