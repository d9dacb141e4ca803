//! Desk-scale video quality enhancement toolkit.
//!
//! * [`media`]: frames, clips, `.cube` LUTs, score files and manifests.
//! * [`nn`]: conv-net substrate with explicit backward passes and MAC counting.
//! * [`lut`]: 3D LUTs, bank fusion and lattice gradients.
//! * [`degrade`]: seeded blur / noise / resize / JPEG degradations.
//! * [`enhance`]: the two-stage LUT + restoration pipeline and its training loops.
//! * [`eval`]: RMSE, the objective score, MOS and Bradley–Terry ranking.

pub mod degrade;
pub mod enhance;
pub mod eval;
pub mod lut;
pub mod media;
pub mod nn;
pub mod rng;
