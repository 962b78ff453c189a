//! The completion network: EdgeConv encoder at three resolutions, pyramid
//! decoder, discriminator, training and block-wise inference.

mod blocks;
mod config;
mod infer;
mod layers;
mod loss;
mod network;
mod train;
mod verify;
mod weights;

pub use blocks::{block_frames, block_index, block_samples, split_into_blocks, Blocks, Normalization, NORMALIZATION_RULE};
pub use config::{BlockGrid, DiscriminatorConfig, NetworkConfig, TrainConfig};
pub use infer::{block_inputs, complete_cloud, merge_prediction, predict_blocks, BlockInput};
pub use layers::{batch_knn, dgcfe_layer, edge_features, linear, pool_clouds, BnMode};
pub use loss::{
    chamfer_on_tape, completion_loss_on_tape, discriminator_loss_on_tape, generator_adversarial_on_tape,
    mean_log_prob, nearest_indices,
};
pub use network::{
    apply_bn_updates, parent_rows, points_tensor, tensor_points, BnUpdate, Decoded, Discriminator, Generator, Mode,
    Pass,
};
pub use train::{
    discriminator_objective, generator_objective, log_row, make_batch, prepare_example, train, validation_cd, Batch,
    EpochLog, GeneratorStep, TrainOutcome, TrainingExample, LOG_HEADER,
};
pub use verify::{generator_graph_check, GRAPH_TOLERANCE};
pub use weights::Weights;
