//! Library behind the `cei` binary: run manifests, the retarget and augment
//! drivers, dataset validation, geometry dumps and fixture generation.

pub mod fixture;
pub mod inspect;
pub mod manifest;
pub mod report;
pub mod retarget;
pub mod validate;

pub use manifest::RunManifest;
pub use retarget::{cmd_augment, cmd_retarget};
pub use validate::cmd_validate;
