//! Self-normalized confidence intervals and non-correlation tests for
//! stationary time series.
//!
//! Statistics are computed recursively on the prefixes `X_1..X_t`; the
//! spread of those recursive estimates studentizes the full-sample estimate
//! without a bandwidth or a long-run variance estimate. The pivot's limit
//! `U_q` is simulated by [`critvals`].

pub mod bootstrap;
pub mod critvals;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod montecarlo;
pub mod noncorr;
pub mod rng;
pub mod scalar;
pub mod selfnorm;
pub mod series;
pub mod stats;

pub use error::{Error, Result};
pub use estimators::{Divisor, EstimatorSpec, FourierCoeffs, PhiSpec};
pub use linalg::{inv_quadratic_form, solve_spd, SquareMatrix};
pub use rng::RngStream;
pub use scalar::Scalar;
pub use selfnorm::{sn_interval, sn_pivot, sn_region, wn_matrix, Region, SelfNormResult};
pub use series::{read_series, validate_series, EstimateSequence, TimeSeries};

pub type TimeSeries64 = TimeSeries<f64>;
pub type TimeSeries32 = TimeSeries<f32>;
pub type EstimateSequence64 = EstimateSequence<f64>;
pub type EstimateSequence32 = EstimateSequence<f32>;
pub type SquareMatrix64 = SquareMatrix<f64>;
pub type SquareMatrix32 = SquareMatrix<f32>;
pub type SelfNormResult64 = SelfNormResult<f64>;
pub type SelfNormResult32 = SelfNormResult<f32>;
