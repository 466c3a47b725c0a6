//! Training pipelines: the symbolic autoencoder, the rule nets over its
//! latent space, and the image encoder aligned to it.

mod autoencoder;

pub use autoencoder::{
    default_ae_hidden, default_latent_dim, reconstruction_report, train_autoencoder, AeConfig, AeTrainReport,
    ReconstructionReport, SymbolicAutoencoder,
};

mod rules;

pub use rules::{
    build_rule_training_set, class_counts, macro_f1, net_keys, predict_classes, train_rule_net, train_rule_nets,
    NetKey, RowBank, RuleNet, RuleNetBundle, RuleNetReport, RuleTrainConfig,
};

mod image;

pub use image::{
    raster_matrix, render_all, train_image_encoder, ImageArch, ImageEncoder, ImageTrainConfig, ImageTrainReport,
};
