#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bands;
pub mod config;
pub mod dd;
pub mod disorder;
pub mod ensemble;
pub mod error;
pub mod expansion;
pub mod grid;
pub mod linalg;
pub mod lower;
pub mod optim;
pub mod pipeline;
pub mod report;
pub mod scalar;
pub mod verify;

pub use dd::Dd;
pub use error::{Error, Result};
pub use scalar::Real;

pub type BandData64 = bands::BandData<f64>;
pub type BandDataDd = bands::BandData<Dd>;
pub type EdgeExpansion64 = expansion::EdgeExpansion<f64>;
pub type EdgeExpansionDd = expansion::EdgeExpansion<Dd>;
pub type HatCellProblem64 = lower::HatCellProblem<f64>;
pub type HatCellProblemDd = lower::HatCellProblem<Dd>;
pub type SupercellSpectrum64 = ensemble::SupercellSpectrum<f64>;
pub type SupercellSpectrumDd = ensemble::SupercellSpectrum<Dd>;
pub type GridFunction64 = grid::GridFunction<f64>;
pub type CMatrix64 = linalg::CMatrix<f64>;
