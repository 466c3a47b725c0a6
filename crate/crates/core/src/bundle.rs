//! Model bundles on disk and the training stages that produce them.
//!
//! Layout under an artifact root:
//!
//! ```text
//! <root>/<configuration>/ae/{encoder.bin, decoder.bin, manifest.json}
//! <root>/<configuration>/rules/{c0-type-constant.bin, ..., manifest.json}
//! <root>/<configuration>/img/{encoder.bin, manifest.json}
//! ```
//!
//! Every weight file has a JSON sidecar; every manifest carries the format
//! version, configuration and seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{Configuration, Panel, Problem};
use crate::nn::{load_model, save_model, Model, Network};
use crate::trainers::{
    net_keys, train_autoencoder, train_image_encoder, train_rule_nets, AeTrainReport, ImageEncoder, ImageTrainReport,
    NetKey, RuleNet, RuleNetBundle, RuleNetReport, SymbolicAutoencoder,
};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
const BUNDLE_FORMAT: &str = "nesy-rpm-bundle";
const MANIFEST: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Autoencoder,
    Rules,
    Image,
}

impl Stage {
    pub fn dir_name(self) -> &'static str {
        match self {
            Stage::Autoencoder => "ae",
            Stage::Rules => "rules",
            Stage::Image => "img",
        }
    }
}

pub fn stage_dir(root: &Path, config: Configuration, stage: Stage) -> PathBuf {
    root.join(config.name()).join(stage.dir_name())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetEntry {
    pub file: String,
    pub component: usize,
    pub attribute: crate::model::AttributeKind,
    pub kind: crate::model::RuleKind,
    pub class_count: usize,
    pub latent_dim: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub f1: f64,
    pub accuracy: f64,
    pub epochs: usize,
    pub train_counts: Vec<usize>,
    pub heldout_counts: Vec<usize>,
    pub synthesized_rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub format_version: u32,
    pub stage: String,
    pub configuration: Configuration,
    pub latent_dim: usize,
    pub seed: u64,
    pub architecture: String,
    pub files: Vec<String>,
    pub metrics: Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nets: Vec<NetEntry>,
}

impl Manifest {
    fn new(stage: Stage, configuration: Configuration, latent_dim: usize, seed: u64, architecture: &str) -> Self {
        Manifest {
            format: BUNDLE_FORMAT.into(),
            format_version: BUNDLE_FORMAT_VERSION,
            stage: stage.dir_name().into(),
            configuration,
            latent_dim,
            seed,
            architecture: architecture.into(),
            files: Vec::new(),
            metrics: Value::Null,
            nets: Vec::new(),
        }
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        crate::fsio::write_atomic(&dir.join(MANIFEST), &bytes)
    }

    pub fn read(dir: &Path, stage: Stage) -> Result<Self> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Err(Error::MissingPrerequisite(format!(
                "no {} bundle at {}",
                stage.dir_name(),
                dir.display()
            )));
        }
        let m: Manifest = serde_json::from_slice(&std::fs::read(&path)?)?;
        if m.format != BUNDLE_FORMAT || m.stage != stage.dir_name() {
            return Err(Error::Format(format!(
                "{} is not a {} manifest",
                path.display(),
                stage.dir_name()
            )));
        }
        if m.format_version != BUNDLE_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: BUNDLE_FORMAT_VERSION,
                found: m.format_version,
            });
        }
        Ok(m)
    }
}

fn save_net(dir: &Path, file: &str, model: &Model, meta: Value) -> Result<()> {
    save_model(&dir.join(file), model, &meta)
}

fn load_mlp(dir: &Path, file: &str) -> Result<crate::nn::Mlp> {
    match load_model(&dir.join(file))?.0 {
        Model::Mlp(m) => Ok(m),
        other => Err(Error::Format(format!(
            "{file}: expected an MLP, found {}",
            other.architecture()
        ))),
    }
}

pub fn save_autoencoder(dir: &Path, ae: &SymbolicAutoencoder, report: &AeTrainReport, seed: u64) -> Result<()> {
    let mut m = Manifest::new(Stage::Autoencoder, ae.config, ae.latent_dim, seed, "mlp");
    for (file, net, role) in [("encoder.bin", &ae.encoder, "E_S"), ("decoder.bin", &ae.decoder, "D_S")] {
        save_net(
            dir,
            file,
            &Model::Mlp(net.clone()),
            json!({"role": role, "configuration": ae.config, "latent_dim": ae.latent_dim, "seed": seed}),
        )?;
        m.files.push(file.into());
    }
    m.metrics = json!({
        "heldout_block_accuracy": report.heldout.block_accuracy,
        "heldout_panel_accuracy": report.heldout.panel_accuracy,
        "heldout_panels": report.heldout.panels,
        "epochs": report.history.epochs.len(),
        "best_epoch": report.history.best_epoch,
        "best_loss": report.history.best_loss,
    });
    m.write(dir)
}

pub fn load_autoencoder(dir: &Path) -> Result<SymbolicAutoencoder> {
    let m = Manifest::read(dir, Stage::Autoencoder)?;
    let ae = SymbolicAutoencoder::new(
        m.configuration,
        load_mlp(dir, "encoder.bin")?,
        load_mlp(dir, "decoder.bin")?,
    )?;
    if ae.latent_dim != m.latent_dim {
        return Err(Error::Format("autoencoder latent width disagrees with manifest".into()));
    }
    Ok(ae)
}

pub fn save_rule_bundle(dir: &Path, bundle: &RuleNetBundle, reports: &[RuleNetReport], seed: u64) -> Result<()> {
    let mut m = Manifest::new(Stage::Rules, bundle.config, bundle.latent_dim, seed, "mlp");
    let by_key: BTreeMap<NetKey, &RuleNetReport> = reports.iter().map(|r| (r.key, r)).collect();
    for (key, net) in &bundle.nets {
        let file = format!("{key}.bin");
        let rep = by_key.get(key).ok_or_else(|| Error::MissingNet(key.to_string()))?;
        let entry = NetEntry {
            file: file.clone(),
            component: key.component,
            attribute: key.attribute,
            kind: key.kind,
            class_count: net.class_count,
            latent_dim: bundle.latent_dim,
            seed,
            hidden: rep.hidden.clone(),
            f1: rep.f1,
            accuracy: rep.accuracy,
            epochs: rep.history.epochs.len(),
            train_counts: rep.train_counts.clone(),
            heldout_counts: rep.heldout_counts.clone(),
            synthesized_rows: rep.synthesized_rows,
        };
        save_net(
            dir,
            &file,
            &Model::Mlp(net.classifier.clone()),
            serde_json::to_value(&entry)?,
        )?;
        m.files.push(file);
        m.nets.push(entry);
    }
    let good = reports.iter().filter(|r| r.f1 >= 0.9).count();
    m.metrics = json!({
        "nets": reports.len(),
        "nets_f1_at_least_0.9": good,
        "min_f1": reports.iter().map(|r| r.f1).fold(f64::INFINITY, f64::min),
    });
    m.write(dir)
}

pub fn load_rule_bundle(dir: &Path) -> Result<RuleNetBundle> {
    let m = Manifest::read(dir, Stage::Rules)?;
    let mut nets = BTreeMap::new();
    for e in &m.nets {
        let key = NetKey {
            component: e.component,
            attribute: e.attribute,
            kind: e.kind,
        };
        let classifier = load_mlp(dir, &e.file)?;
        if classifier.input_dim() != 3 * m.latent_dim || classifier.output_dim() != key.kind.class_count() {
            return Err(Error::Format(format!("{}: dimensions disagree with manifest", e.file)));
        }
        nets.insert(
            key,
            RuleNet {
                key,
                class_count: e.class_count,
                classifier,
            },
        );
    }
    if let Some(k) = net_keys(m.configuration).into_iter().find(|k| !nets.contains_key(k)) {
        return Err(Error::MissingNet(k.to_string()));
    }
    Ok(RuleNetBundle {
        config: m.configuration,
        latent_dim: m.latent_dim,
        nets,
    })
}

pub fn save_image_encoder(dir: &Path, enc: &ImageEncoder, report: &ImageTrainReport, seed: u64) -> Result<()> {
    let mut m = Manifest::new(Stage::Image, enc.config, enc.latent_dim(), seed, enc.arch().as_str());
    save_net(
        dir,
        "encoder.bin",
        &enc.net,
        json!({"role": "E_X", "configuration": enc.config, "raster_size": enc.raster_size, "seed": seed}),
    )?;
    m.files.push("encoder.bin".into());
    m.metrics = json!({
        "raster_size": enc.raster_size,
        "alignment_mse": report.alignment_mse,
        "latent_scale": report.latent_scale,
        "nearest_neighbor": report.nearest_neighbor,
        "epochs": report.history.epochs.len(),
        "best_epoch": report.history.best_epoch,
    });
    m.write(dir)
}

pub fn load_image_encoder(dir: &Path) -> Result<ImageEncoder> {
    let m = Manifest::read(dir, Stage::Image)?;
    let (net, _) = load_model(&dir.join("encoder.bin"))?;
    let size = (net.input_dim() as f64).sqrt().round() as usize;
    if size * size != net.input_dim() || net.output_dim() != m.latent_dim {
        return Err(Error::Format("image encoder dimensions disagree with manifest".into()));
    }
    ImageEncoder::new(m.configuration, size, net)
}

/// One panel per problem, cycling through the 16 panel positions, so that
/// consecutive samples come from different problems.
pub fn panel_sample(problems: &[Problem], limit: usize) -> Vec<&Panel> {
    problems
        .iter()
        .take(limit)
        .enumerate()
        .map(|(i, p)| p.panels().nth(i % 16).expect("16 panels"))
        .collect()
}

fn same_config(a: &Dataset, b: &Dataset) -> Result<Configuration> {
    if a.config() != b.config() {
        return Err(Error::ConfigMismatch {
            expected: a.config(),
            found: b.config(),
        });
    }
    Ok(a.config())
}

pub fn train_ae_stage(train: &Dataset, val: &Dataset, rc: &RunConfig) -> Result<(SymbolicAutoencoder, AeTrainReport)> {
    let config = same_config(train, val)?;
    let panels = panel_sample(&train.problems, rc.ae_panels);
    let held = panel_sample(&val.problems, usize::MAX);
    train_autoencoder(&panels, &held, config, &rc.ae_config(config))
}

pub fn train_rules_stage(
    train: &Dataset,
    val: &Dataset,
    ae: &SymbolicAutoencoder,
    rc: &RunConfig,
) -> Result<(RuleNetBundle, Vec<RuleNetReport>)> {
    let config = same_config(train, val)?;
    if ae.config != config {
        return Err(Error::ConfigMismatch {
            expected: config,
            found: ae.config,
        });
    }
    let n = if rc.rules_problems == 0 {
        train.problems.len()
    } else {
        rc.rules_problems.min(train.problems.len())
    };
    train_rule_nets(&train.problems[..n], &val.problems, ae, &rc.rule_config())
}

pub fn train_img_stage(
    train: &Dataset,
    val: &Dataset,
    ae: &SymbolicAutoencoder,
    rc: &RunConfig,
) -> Result<(ImageEncoder, ImageTrainReport)> {
    let config = same_config(train, val)?;
    if ae.config != config {
        return Err(Error::ConfigMismatch {
            expected: config,
            found: ae.config,
        });
    }
    let panels = panel_sample(&train.problems, rc.img_panels);
    let held = panel_sample(&val.problems, 1000);
    train_image_encoder(&panels, &held, ae, &rc.image_config())
}
