//! Independent oracles shared by the integration tests and the acceptance
//! target. Nothing here calls into the code paths it checks.
#![allow(dead_code)]

pub mod chisq;
pub mod fd;
pub mod oracle;
