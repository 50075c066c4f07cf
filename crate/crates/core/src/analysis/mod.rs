//! Aggregation of trial records into ε curves, inflection points and
//! budget recommendations.

mod curves;
mod plot;
mod recommend;

pub use curves::{aggregate, find_inflection, CurvePoint, Inflection, Metric, MetricCurve, FLAT_DELTA};
pub use plot::{emit_plot_data, read_plot_data, STAGE_SUMMARY_FILE};
pub use recommend::{interpolate, recommend_for_acl, recommend_for_eps, Recommendation};
