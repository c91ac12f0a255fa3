#![allow(dead_code)]
pub mod oracle_ode;
pub mod gl;
pub mod oracle_overlap;
