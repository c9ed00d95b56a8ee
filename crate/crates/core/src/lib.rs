//! Spectral topology augmentation and dual-aggregation contrastive learning
//! for heterogeneous graphs.
//!
//! The pipeline: build meta-path views of a [`hetgraph::HeteroGraph`], learn a
//! spectrum-raising and a spectrum-lowering augmentation of every view
//! ([`augment`]), train the contrastive encoder on the two augmented view sets
//! ([`encoder`]), and score frozen embeddings with a linear probe
//! ([`evalsuite`]).

pub mod augment;
pub mod encoder;
pub mod evalsuite;
pub mod hetgraph;
pub mod spectral;
pub mod synthgen;
pub mod tensor;
