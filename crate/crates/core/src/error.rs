use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("transmitter {tx} and receiver {rx} are co-located")]
    CoincidentPositions { tx: usize, rx: usize },

    #[error("scenario has no node positions")]
    MissingPositions,

    #[error("infeasible stream allocation: d({users},{tx},{rx}) = {dof} streams for {users} users")]
    InfeasibleStreams {
        users: usize,
        tx: usize,
        rx: usize,
        dof: usize,
    },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("time allocation is singular: group {group} has rate {rate}")]
    SingularTimeAllocation { group: usize, rate: f64 },

    #[error("{users} users is too many to enumerate (limit {limit}); use a greedy partitioner")]
    EnumerationTooLarge { users: usize, limit: usize },

    #[error("no feasible training length for group {group}: slot budget is {budget} symbols")]
    EmptyTrainingGrid { group: usize, budget: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
