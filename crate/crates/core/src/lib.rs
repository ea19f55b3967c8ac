pub mod analytic;
pub mod born;
pub mod error;
pub mod interactions;
pub mod multilayer;
pub mod nonlocal;
pub mod oracle;
pub mod quadrature;
pub mod scene;
pub mod types;
pub mod validation;
