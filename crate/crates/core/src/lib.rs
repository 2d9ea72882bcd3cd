//! Contrastive pretraining of polymer-SMILES sequence encoders.
//!
//! The crate covers the whole pipeline: polymer-SMILES parsing and view
//! augmentation ([`smiles`], [`augment`]), a compact transformer encoder with
//! hand-written backpropagation ([`encoder`]), NT-Xent pretraining
//! ([`pretrain`]), alignment/uniformity metrics ([`metrics`]), and frozen-encoder
//! transfer evaluation ([`transfer`]). [`config`], [`io`], and [`commands`] back
//! the `polycl` command-line tool.

pub mod augment;
pub mod commands;
pub mod config;
pub mod corpus;
pub mod encoder;
pub mod io;
pub mod metrics;
pub mod optim;
pub mod pretrain;
pub mod seed;
pub mod smiles;
pub mod transfer;
