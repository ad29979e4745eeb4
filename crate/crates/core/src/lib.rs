pub mod channel;
pub mod error;
pub mod geometry;
pub mod instance;
pub mod objective;
pub mod oracle;
pub mod quadrature;
pub mod dca;
pub mod lda;
pub mod ca;
pub mod experiments;
pub mod cli;
