//! In-process simulation of the federated minimax training loop: clients
//! take local steps on tilted stochastic gradients, the server averages the
//! local iterates under the mixture weights and ascends the mixture.

mod client;
mod projection;
mod reference;
mod training;

pub use client::{client_round, ClientState, ClientUpdate, DorflEstimator, LocalEstimator};
pub(crate) use projection::project_scaled_simplex;
pub use projection::{project_ball, project_simplex, MixtureWeights};
pub use reference::{minimax_reference, MinimaxReference};
pub use training::{
    duality_gap_surrogate, run_training, run_training_with, server_aggregate,
    worst_client_objective, RoundRecord, TrainingTrace,
};
