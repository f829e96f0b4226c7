//! Path processes `(W_n, 𝕎_n)`, endpoint ensembles and the estimators of
//! `Σ` and `E`.

mod ensemble;
mod path;
mod sigma;

pub use ensemble::{
    endpoint_of, run_ensemble, Endpoint, EndpointAccumulator, Ensemble, EnsembleSpec,
};
pub use path::{iterated_path, wip_path, PathPair};
pub use sigma::{
    degeneracy_check, drift_matrix, sigma_direct, sigma_green_kubo, sigma_martingale, Agreement,
    Degeneracy, Estimate, LagSum, SigmaReport, DEFAULT_DEGENERACY_TOL,
};
