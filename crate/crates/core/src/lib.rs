//! Scalar spatiotemporal blue noise masks.
//!
//! A generalized void-and-cluster generator ([`generator`]) produces rank
//! masks whose axis groups are each blue noise: `{x, y}` and `{t}` gives
//! textures that are blue in every frame and blue over time at every
//! pixel. The remaining modules measure those properties ([`analysis`]),
//! provide the baseline noises they are compared with ([`noise_zoo`]),
//! threshold masks into point sets ([`pointset`]) and drive small
//! rendering experiments ([`apps`]).
//!
//! ```
//! use stbn::{finalize, generate, Finalize, MaskSpec};
//!
//! let spec = MaskSpec::spatiotemporal(16, 16, 4).unwrap().with_seed(1);
//! let ranks = generate(&spec).unwrap();
//! let mask = finalize(&ranks, Finalize::Float).unwrap();
//! assert_eq!(mask.len(), 16 * 16 * 4);
//! ```

pub mod analysis;
pub mod apps;
pub mod energy;
pub mod error;
pub mod generator;
pub mod grid;
pub mod noise_zoo;
pub mod pnm;
pub mod pointset;

pub use energy::{pair_energy, EnergyField, EnergyOptions, Sign};
pub use error::{Error, Result};
pub use generator::{
    finalize, generate, generate_with, initial_pattern, redistribute, BinaryPattern, Finalize,
    GenerateOptions, Mask, MaskPayload, Observer, Ordering, Phase, Progress, RankMask, Step,
    StepLog,
};
pub use grid::{AxisGroup, Coord, MaskSpec};
pub use noise_zoo::{
    blue_cube, golden_ratio_animate, hb_retarget, independent_2d_stack, r2_offsets, white_cube,
    NoiseCube, Provenance,
};
pub use pointset::{threshold_mask, threshold_points, PointSet};
