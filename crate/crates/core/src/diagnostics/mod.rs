//! Norms, energy functionals, identity residuals, decay fits and estimate
//! probes evaluated on computed trajectories.

mod energy;
mod fit;
mod norms;
mod probes;
mod strichartz;

pub use energy::*;
pub use fit::*;
pub use norms::*;
pub use probes::*;
pub use strichartz::*;
