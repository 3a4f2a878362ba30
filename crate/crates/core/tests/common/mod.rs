//! Shared fixtures for the integration and acceptance suites.

#![allow(dead_code)]

pub mod archives;
pub mod asm;
pub mod corpus;
pub mod elf;
pub mod squash;
