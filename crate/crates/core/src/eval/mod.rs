//! Accuracy metrics, confusion matrices, evaluation drivers and SVG plots.

mod metrics;
mod pipeline;
mod plot;

pub use metrics::{
    accuracy_per_snr, confusion, macro_accuracy, mean_accuracy, ClassRow, Confusion, EvalReport, SnrRow, SnrTable,
};
pub use pipeline::{
    evaluate_close, evaluate_open, export_features, features_to_csv, fit_open_set, forward_file, FeaturePoint,
    OpenMode, Predictions, UNKNOWN_NAME,
};
pub use plot::{accuracy_curve_svg, comparison_bars_svg, feature_scatter_svg, write_svg};
