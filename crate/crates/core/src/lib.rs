//! Two paper personas debate their contributions over a tree of topics;
//! a moderator grows the tree and synthesizes a comparative summary.

pub mod cli;
pub mod corpus;
pub mod gateway;
pub mod mock;
pub mod moderator;
pub mod persona;
pub mod pipeline;
pub mod provider;
pub mod retrieval;
pub mod transcript;
pub mod tree;
