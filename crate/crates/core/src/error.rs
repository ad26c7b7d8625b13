use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("depth too shallow: need more than {needed} levels, tower at depth {depth} has {available}")]
    DepthTooShallow {
        needed: u128,
        available: u128,
        depth: usize,
    },

    #[error("construction is an odometer: the eigenvalue group is infinite and no finite order exists")]
    OdometerCase,

    #[error("construction is not bounded on the horizon (r_sup = {r_sup}, s_sup = {s_sup}, bound = {bound})")]
    NotBounded { r_sup: u64, s_sup: u64, bound: u64 },

    #[error("cyclic factor inconsistency: {0}")]
    ConsistencyFailure(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
