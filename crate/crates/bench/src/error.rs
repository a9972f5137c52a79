#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{method} failed at iteration {iteration}: {source}")]
    Solver {
        method: String,
        iteration: usize,
        #[source]
        source: spacetime_dd::Error,
    },
    #[error(transparent)]
    Core(#[from] spacetime_dd::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;
