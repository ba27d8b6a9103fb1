pub mod counts;
pub mod numeric;
pub mod pade;
pub mod estimator;
pub mod baselines;
pub mod methods;
pub mod uncertainty;
pub mod simlab;
pub mod cli;
