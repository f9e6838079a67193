mod arch;
mod coords;
mod network;
mod train;
mod weights;

pub use arch::{SalNetArchitecture, ShapeStep};
pub use coords::{scale_phi, scale_theta, CoordChannels};
pub use network::{build_network, BaseObjective, FullObjective, SalNet, PRETRAINED_LAYERS};
pub use train::{train_stage1, train_stage2, LogRecord, TrainConfig, TrainLog, TrainSample};
pub use weights::{load_weights, save_weights, MANIFEST_FILE};
