//! MoodNet architecture: configuration, tower/head assembly and checkpoints.

mod checkpoint;
mod config;
mod network;

pub use checkpoint::{tensor_path, Checkpoint, CheckpointMeta, TensorEntry};
pub use config::{
    Modality, ModelConfig, TextGrid, AUDIO_BLOCKS, HEAD_WIDTHS, MIN_TEXT_EXTENT, NUM_CLASSES, TEXT_BLOCKS,
    TOWER_OUTPUT,
};
pub use network::{
    build_audio_tower, build_fusion_head, build_text_tower, ForwardPass, Inputs, Layer, LayerEntry, Network,
    ParamSpec, RunMode, Stack,
};
