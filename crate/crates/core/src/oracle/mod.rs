//! Verification paths that do not go through the closed forms.

pub mod ersak;
pub mod grid;
pub mod subexp;

pub use ersak::ersak_memory_term;
pub use grid::{grid_evolve_master_equation, grid_survival, GridConfig, GridEvolution, GridState};
pub use subexp::{subexponential_check, SubexpReport};
