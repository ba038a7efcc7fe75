//! Attentive fusion of two-modality feature vectors.
//!
//! The crate fuses paired feature vectors (an appearance stream and a pose
//! stream, say) through modal-wise and channel-wise
//! expansion-squeeze-excitation attention, classifies with three heads, and
//! trains the whole thing with SGD against a min-branch multi-modal loss.
//! Everything runs on a small built-in reverse-mode autodiff engine over
//! `f64` tensors, which keeps gradients checkable against central finite
//! differences at tight tolerances.
//!
//! The `book/` directory of the repository walks through each layer of the
//! crate; its code snippets compile and run as doc-tests of this crate.

pub mod attention;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod fusion;
pub mod loss;
pub mod nn;
pub mod tensor;
pub mod train;

pub use attention::{AttentionVector, CNet, MNet, SeBlock};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointEntry};
pub use data::{
    class_count, feature_dims, generate_xor_pair, read_feature_pair, split_train_test,
    write_features, DataSplit, Modality, MultiModalFeature, SynthSpec,
};
pub use error::{Error, Result};
pub use fusion::{AttentionKind, EseFn, EseFnConfig, Fused, Logits, MODALITIES};
pub use loss::{multimodal_loss, BatchObjective, LossBreakdown, LossWeights};
pub use tensor::{finite_diff_grad, max_rel_error, Graph, Selected, Tensor};
pub use train::{
    argmax_lowest, check_model_gradients, primary_accuracy, train, EpochStats, GroupCheck, Model,
    OptimConfig, Sgd, TestAccuracies, TrainReport,
};

#[cfg(doctest)]
mod book {
    //! Runs every code snippet in the book as a doc-test.
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(tensors_and_autodiff, "../../../book/src/tensors-and-autodiff.md");
    chapter!(attention_blocks, "../../../book/src/attention-blocks.md");
    chapter!(fusion_pipeline, "../../../book/src/fusion-pipeline.md");
    chapter!(multimodal_loss, "../../../book/src/multimodal-loss.md");
    chapter!(synthetic_data, "../../../book/src/synthetic-data.md");
    chapter!(training, "../../../book/src/training.md");
    chapter!(cli, "../../../book/src/cli.md");
}
