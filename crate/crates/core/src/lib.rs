//! Weighted context-free grammar constraints.
//!
//! The crate provides a monolithic chart propagator ([`wcyk`]), an
//! equivalent decomposition into primitive arithmetic constraints over an
//! AND/OR graph ([`decomposition`]), soft grammar constraints under Hamming
//! and edit distance ([`soft`]), a small copy-based branch-and-bound kernel
//! ([`cp`]) and a shift-scheduling model builder ([`schedule`]). The
//! [`oracle`] module holds brute-force reference implementations.

pub mod cli;
pub mod cp;
pub mod decomposition;
pub mod domain;
pub mod grammar;
pub mod oracle;
pub mod schedule;
pub mod soft;
pub mod wcyk;

pub use domain::{DomainStore, TermSet};
pub use grammar::{NonTerminal, Production, Rhs, Terminal, WeightedGrammar};
pub use wcyk::{Bound, Propagation};
