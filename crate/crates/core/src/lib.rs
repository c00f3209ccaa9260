pub mod cube;
pub mod dimension;
pub mod error;
pub mod generate;
pub mod grid;
pub mod io;
pub mod modulus;
pub mod scaffold;
pub mod transform;

pub use cube::{AxisBox, ConsecutivePair, DyadicCube, PairLattice};
pub use error::{Error, Result};
pub use generate::{fixture, generate_martingale_set, Fixture, IncrementRule, MartingaleSchedule};
pub use grid::MassGrid;
pub use modulus::{estimate_modulus, ModulusProfile, PairMode};
pub use scaffold::{build_generations, lemma1_bound, stop_family, Scaffold, ScheduleParams, StoppedFamily};
pub use dimension::{box_count, scaffold_box_dim, BoxCountFit, CountMode};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/grids.md")]
    mod grids {}
    #[doc = include_str!("../../../book/src/generation.md")]
    mod generation {}
    #[doc = include_str!("../../../book/src/modulus.md")]
    mod modulus {}
    #[doc = include_str!("../../../book/src/stopping.md")]
    mod stopping {}
    #[doc = include_str!("../../../book/src/transforms.md")]
    mod transforms {}
    #[doc = include_str!("../../../book/src/dimension.md")]
    mod dimension {}
}
