//! Output-space metrics, straight-line pullback length/energy, and the
//! discrete geodesic oracle used to validate them.
//!
//! For a straight latent segment sampled at `γ_j`, `j = 0..N`, with decoded
//! points `y_j` and per-segment output distances `s_j = d(y_j, y_{j−1})`:
//!
//! - length `L = Σ s_j`
//! - energy `E = (N/2) Σ s_j²`
//!
//! These are the finite-difference forms of `∫‖γ̇‖_G dt` and `½∫‖γ̇‖²_G dt`
//! with `Δt = 1/N`, so `L² ≤ 2E` holds exactly for the sums.

mod curve;
mod metric;
mod oracle;

pub use curve::{
    measure_curve, measure_outputs, straight_line_measure, straight_line_quantity, CurveMeasure, CurveQuantity,
    CurveSpec, DiscreteCurve, DEFAULT_STEPS,
};
pub use metric::{segment_output_distance, MetricSpec, DEFAULT_FISHER_EPS};
pub use oracle::{check_bounds, geodesic_oracle, BoundCheck, GeodesicEstimate, OracleConfig};
