pub mod acceptance;
pub mod config;
pub mod hyperbolic;
pub mod io;
pub mod run;
pub mod sweep;
