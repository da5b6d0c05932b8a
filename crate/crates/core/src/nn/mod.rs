//! Multicolumn multi-resolution convolutional regressor.

pub mod adam;
pub mod layers;
pub mod model;
pub mod train;

pub use adam::AdamState;
pub use layers::{Activation, DenseLayer, Matrix2D, MrConvLayer};
pub use model::{ColumnSpec, ConvSpec, Init, McMrConvModel, Mode, ModelSpec, Orientation};
pub use train::{check_gradients, train, Dataset, GradCheckReport, TrainConfig, TrainOutcome};
