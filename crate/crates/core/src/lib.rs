pub mod config;
pub mod error;
pub mod linalg;
pub mod algebra;
pub mod channel;
pub mod gns;
pub mod corpus;
pub mod decomposition;
pub mod structure;
pub mod asymptotics;
pub mod cli;
