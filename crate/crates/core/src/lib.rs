pub mod cli;
pub mod connections;
pub mod derivation;
pub mod dual;
pub mod error;
pub mod functionals;
pub mod linalg;
pub mod lindblad;
pub mod optimize;
pub mod oracle;
pub mod primal;
pub mod quadrature;
pub mod sampling;
