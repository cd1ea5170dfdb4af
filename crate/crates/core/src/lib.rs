//! Visual-fatigue detection from VR eye-tracking time series.
//!
//! The pipeline mirrors a fatigue-classification study on the GazeBaseVR
//! corpus: parse per-task gaze recordings and participant metadata, convert
//! 3D gaze directions to angles, repair short tracking dropouts, cut
//! fixed-duration windows, train six 1D-CNN classifiers over the full
//! task × model × window-length grid, and run the gaze-variance and
//! subjective-ratings test batteries.
//!
//! Modules:
//! - [`ingest`] — CSV recording/metadata parsing and session indexing
//! - [`preprocess`] — gaze-angle math, gap repair, windowing, normalization
//! - [`nn`] — minimal tensor ops, computation graph, the six architectures
//! - [`train`] — loss, optimizers, user-level splits, evaluation, grid runner
//! - [`stats`] — Student-t machinery, variance and subjective-ratings batteries
//! - [`synth`] — synthetic two-class gaze generator for tests and demos
//! - [`config`] — TOML run configuration and config hashing
//! - [`report`] — accuracy tables and plot-data emitters
//! - [`commands`] — CLI entry points (also usable as a library API)

pub mod commands;
pub mod config;
pub mod ingest;
pub mod nn;
pub mod preprocess;
pub mod report;
pub mod stats;
pub mod synth;
pub mod train;
