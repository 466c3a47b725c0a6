use std::collections::BTreeMap;
use std::fmt;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::autoencoder::SymbolicAutoencoder;
use crate::error::{Error, Result};
use crate::generator::{generate_problem_forcing, GeneratorConfig};
use crate::model::{AttributeKind, Configuration, Panel, Problem, RuleKind, OPTION_COUNT};
use crate::nn::{softmax, train, Dataset, History, Mlp, Network, Objective, Targets, TrainConfig};
use crate::oracle::{label_row, net_pairs, reachable_classes, RowTriple};
use crate::par;

/// Identifies one rule net: F(attribute, kind) for one component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NetKey {
    pub component: usize,
    pub attribute: AttributeKind,
    pub kind: RuleKind,
}

impl fmt::Display for NetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "c{}-{}-{}",
            self.component,
            self.attribute.as_str(),
            self.kind.as_str()
        )
    }
}

/// Every net a configuration needs, components in order, pairs in search order.
pub fn net_keys(config: Configuration) -> Vec<NetKey> {
    (0..config.components().len())
        .flat_map(|c| {
            net_pairs(config, c)
                .expect("valid component")
                .into_iter()
                .map(move |(attribute, kind)| NetKey {
                    component: c,
                    attribute,
                    kind,
                })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleNet {
    pub key: NetKey,
    pub class_count: usize,
    pub classifier: Mlp,
}

impl RuleNet {
    /// Class probabilities for rows of concatenated latent triples.
    pub fn probabilities(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut logits = self.classifier.predict(x);
        for mut row in logits.rows_mut() {
            let p = softmax(row.as_slice().unwrap());
            row.assign(&ndarray::ArrayView1::from(&p));
        }
        logits
    }
}

/// Row triples of a set of problems with their latents and oracle labels
/// for every net of the configuration.
#[derive(Clone, Debug)]
pub struct RowBank {
    pub config: Configuration,
    pub latent_dim: usize,
    /// One row per sample: three latents side by side.
    pub inputs: Array2<f64>,
    pub labels: BTreeMap<NetKey, Vec<usize>>,
}

/// Panel indices (into `Problem::panels()` order) of the rows used for one problem.
fn row_panel_indices(include_options: bool) -> Vec<[usize; 3]> {
    let mut rows = vec![[0, 1, 2], [3, 4, 5]];
    if include_options {
        rows.extend((0..OPTION_COUNT).map(|k| [6, 7, 8 + k]));
    }
    rows
}

impl RowBank {
    /// Rows 1 and 2 of every problem; with `include_options`, also row 3
    /// completed by each of the eight options.
    pub fn build(problems: &[Problem], ae: &SymbolicAutoencoder, include_options: bool) -> Result<Self> {
        let config = ae.config;
        if let Some(p) = problems.iter().find(|p| p.config != config) {
            return Err(Error::ConfigMismatch {
                expected: config,
                found: p.config,
            });
        }
        let keys = net_keys(config);
        let rows = row_panel_indices(include_options);
        let panels: Vec<&Panel> = problems.iter().flat_map(|p| p.panels()).collect();
        let latents = ae.encode_panels(&panels);
        let l = ae.latent_dim;
        let per_problem = 16;
        let mut inputs = Array2::zeros((problems.len() * rows.len(), 3 * l));
        for (pi, _) in problems.iter().enumerate() {
            for (ri, idx) in rows.iter().enumerate() {
                let r = pi * rows.len() + ri;
                for (j, &panel) in idx.iter().enumerate() {
                    inputs
                        .slice_mut(s![r, j * l..(j + 1) * l])
                        .assign(&latents.row(pi * per_problem + panel));
                }
            }
        }
        let per_problem_labels = par::map_slice(problems, |p| {
            let all: Vec<&Panel> = p.panels().collect();
            rows.iter()
                .map(|idx| {
                    let row = RowTriple::new(config, [all[idx[0]], all[idx[1]], all[idx[2]]]);
                    keys.iter()
                        .map(|k| label_row(&row, k.component, k.attribute, k.kind))
                        .collect::<Result<Vec<usize>>>()
                })
                .collect::<Result<Vec<_>>>()
        });
        let mut labels: BTreeMap<NetKey, Vec<usize>> =
            keys.iter().map(|&k| (k, Vec::with_capacity(inputs.nrows()))).collect();
        for problem_rows in per_problem_labels {
            for row_labels in problem_rows? {
                for (k, y) in keys.iter().zip(row_labels) {
                    labels.get_mut(k).unwrap().push(y);
                }
            }
        }
        Ok(RowBank {
            config,
            latent_dim: l,
            inputs,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dataset(&self, key: &NetKey) -> Result<Dataset> {
        let y = self.labels.get(key).ok_or_else(|| Error::MissingNet(key.to_string()))?;
        Dataset::new(self.inputs.clone(), Targets::Classes(y.clone()))
    }

    pub fn append(&mut self, other: RowBank) {
        self.inputs =
            ndarray::concatenate(Axis(0), &[self.inputs.view(), other.inputs.view()]).expect("same latent width");
        for (k, v) in other.labels {
            self.labels.entry(k).or_default().extend(v);
        }
    }
}

/// Labeled latent rows for one net: rows 1-2 of each problem, plus the eight
/// completed third rows when `include_options` is set.
pub fn build_rule_training_set(
    problems: &[Problem],
    ae: &SymbolicAutoencoder,
    key: NetKey,
    include_options: bool,
) -> Result<Dataset> {
    reachable_classes(ae.config, key.component, key.attribute, key.kind)?;
    RowBank::build(problems, ae, include_options)?.dataset(&key)
}

pub fn class_counts(labels: &[usize], classes: usize) -> Vec<usize> {
    let mut c = vec![0; classes];
    for &y in labels {
        c[y] += 1;
    }
    c
}

/// Macro F1 over the classes present in `truth`.
pub fn macro_f1(truth: &[usize], predicted: &[usize], classes: usize) -> f64 {
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fneg = vec![0usize; classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fneg[t] += 1;
        }
    }
    let present: Vec<usize> = (0..classes).filter(|&c| tp[c] + fneg[c] > 0).collect();
    if present.is_empty() {
        return 1.0;
    }
    present
        .iter()
        .map(|&c| {
            let denom = 2 * tp[c] + fp[c] + fneg[c];
            2.0 * tp[c] as f64 / denom as f64
        })
        .sum::<f64>()
        / present.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleTrainConfig {
    /// Candidate hidden-layer stacks, tried in order; later ones only when
    /// the earlier best falls short of `good_enough_f1` on validation.
    pub hidden_options: Vec<Vec<usize>>,
    pub good_enough_f1: f64,
    /// Minimum share of every reachable class after rebalancing.
    pub class_floor: f64,
    /// Cap on extra problems generated per net to supply rare classes.
    pub synth_budget: usize,
    pub include_options: bool,
    pub train: TrainConfig,
}

impl Default for RuleTrainConfig {
    fn default() -> Self {
        RuleTrainConfig {
            hidden_options: vec![vec![64], vec![64, 64]],
            good_enough_f1: 0.99,
            class_floor: 0.05,
            synth_budget: 600,
            include_options: true,
            train: TrainConfig {
                max_epochs: 40,
                patience: 4,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleNetReport {
    pub key: NetKey,
    pub class_count: usize,
    pub hidden: Vec<usize>,
    /// Held-out macro F1.
    pub f1: f64,
    pub accuracy: f64,
    pub train_counts: Vec<usize>,
    pub heldout_counts: Vec<usize>,
    pub synthesized_rows: usize,
    pub history: History,
}

pub fn predict_classes(net: &RuleNet, x: ArrayView2<'_, f64>) -> Vec<usize> {
    net.classifier
        .predict(x)
        .rows()
        .into_iter()
        .map(|r| crate::oracle::argmax_first(r.as_slice().unwrap()))
        .collect()
}

/// Duplicates random rows of under-represented classes until each reachable
/// class holds at least `floor` of the set.
fn oversample(data: &Dataset, reachable: &[usize], floor: f64, rng: &mut ChaCha8Rng) -> Dataset {
    let Targets::Classes(y) = &data.targets else {
        unreachable!("rule nets use class targets")
    };
    let classes = reachable.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &c) in y.iter().enumerate() {
        by_class[c].push(i);
    }
    let mut rows: Vec<usize> = (0..y.len()).collect();
    let mut counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
    loop {
        let total = rows.len() as f64;
        let Some(&c) = reachable
            .iter()
            .find(|&&c| counts[c] > 0 && (counts[c] as f64) < floor * total)
        else {
            break;
        };
        // Solve (have + extra) / (total + extra) >= floor.
        let extra = ((floor * total - counts[c] as f64) / (1.0 - floor)).ceil().max(1.0) as usize;
        for _ in 0..extra {
            rows.push(*by_class[c].choose(rng).unwrap());
        }
        counts[c] += extra;
    }
    data.select(&rows)
}

/// Extra labeled rows from problems generated with the net's rule forced,
/// keeping only rows of classes still below the floor.
fn synthesize(
    ae: &SymbolicAutoencoder,
    key: NetKey,
    counts: &[usize],
    reachable: &[usize],
    total: usize,
    rcfg: &RuleTrainConfig,
    seed: u64,
) -> Result<Option<Dataset>> {
    let floor = (rcfg.class_floor * total as f64).ceil() as usize;
    let short: Vec<usize> = reachable.iter().copied().filter(|&c| counts[c] < floor).collect();
    if short.is_empty() || rcfg.synth_budget == 0 {
        return Ok(None);
    }
    let gcfg = GeneratorConfig::new(ae.config, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut problems = Vec::new();
    for _ in 0..rcfg.synth_budget {
        problems.push(generate_problem_forcing(
            &gcfg,
            &mut rng,
            Some((key.component, key.attribute, key.kind)),
        )?);
    }
    let data = build_rule_training_set(&problems, ae, key, rcfg.include_options)?;
    let Targets::Classes(y) = &data.targets else {
        unreachable!()
    };
    let mut have = counts.to_vec();
    let keep: Vec<usize> = (0..y.len())
        .filter(|&i| {
            let c = y[i];
            if short.contains(&c) && have[c] < floor {
                have[c] += 1;
                true
            } else {
                false
            }
        })
        .collect();
    Ok((!keep.is_empty()).then(|| data.select(&keep)))
}

fn concat(a: &Dataset, b: &Dataset) -> Dataset {
    let (Targets::Classes(ya), Targets::Classes(yb)) = (&a.targets, &b.targets) else {
        unreachable!()
    };
    Dataset {
        inputs: ndarray::concatenate(Axis(0), &[a.inputs.view(), b.inputs.view()]).unwrap(),
        targets: Targets::Classes(ya.iter().chain(yb).copied().collect()),
    }
}

/// Trains one cross-entropy classifier for `key`, rebalancing rare classes,
/// and reports macro F1 on `heldout`.
pub fn train_rule_net(
    train_set: &Dataset,
    heldout: &Dataset,
    ae: &SymbolicAutoencoder,
    key: NetKey,
    rcfg: &RuleTrainConfig,
) -> Result<(RuleNet, RuleNetReport)> {
    let class_count = key.kind.class_count();
    let reachable = reachable_classes(ae.config, key.component, key.attribute, key.kind)?;
    let Targets::Classes(y) = &train_set.targets else {
        return Err(Error::Format("rule nets need class targets".into()));
    };
    if let Some(&bad) = y.iter().find(|&&c| c >= class_count) {
        return Err(Error::LabelOutOfRange {
            label: bad,
            classes: class_count,
        });
    }
    let seed = rcfg.train.seed ^ (hash_key(&key) << 8);
    let counts = class_counts(y, class_count);
    let extra = synthesize(ae, key, &counts, &reachable, y.len(), rcfg, seed)?;
    let synthesized_rows = extra.as_ref().map_or(0, |d| d.len());
    let merged = match &extra {
        Some(e) => concat(train_set, e),
        None => train_set.clone(),
    };
    let Targets::Classes(my) = &merged.targets else {
        unreachable!()
    };
    let merged_counts = class_counts(my, class_count);
    if let Some(&c) = reachable.iter().find(|&&c| merged_counts[c] == 0) {
        return Err(Error::DegenerateLabels {
            key: key.to_string(),
            class: c,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let balanced = oversample(&merged, &reachable, rcfg.class_floor, &mut rng);
    let Targets::Classes(balanced_y) = &balanced.targets else {
        unreachable!()
    };
    let train_counts = class_counts(balanced_y, class_count);

    let Targets::Classes(hy) = &heldout.targets else {
        return Err(Error::Format("rule nets need class targets".into()));
    };
    let heldout_counts = class_counts(hy, class_count);
    let input = train_set.inputs.ncols();
    let mut best: Option<(RuleNet, f64, f64, Vec<usize>, History)> = None;
    for (i, hidden) in rcfg.hidden_options.iter().enumerate() {
        if best.as_ref().is_some_and(|b| b.1 >= rcfg.good_enough_f1) {
            break;
        }
        let mut dims = vec![input];
        dims.extend(hidden);
        dims.push(class_count);
        let mut init = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let mut net = Mlp::with_dims(&dims, &mut init);
        let mut tcfg = rcfg.train.clone();
        tcfg.seed = seed.wrapping_add(i as u64);
        let val = (!heldout.is_empty()).then_some(heldout);
        let history = train(&mut net, &balanced, val, &Objective::CrossEntropy, &tcfg)?;
        let rule_net = RuleNet {
            key,
            class_count,
            classifier: net,
        };
        let pred = predict_classes(&rule_net, heldout.inputs.view());
        let f1 = macro_f1(hy, &pred, class_count);
        let acc = hy.iter().zip(&pred).filter(|(a, b)| a == b).count() as f64 / hy.len().max(1) as f64;
        if best.as_ref().is_none_or(|b| f1 > b.1) {
            best = Some((rule_net, f1, acc, hidden.clone(), history));
        }
    }
    let (net, f1, accuracy, hidden, history) =
        best.ok_or_else(|| Error::InvalidTrainConfig("no hidden-layer options".into()))?;
    Ok((
        net,
        RuleNetReport {
            key,
            class_count,
            hidden,
            f1,
            accuracy,
            train_counts,
            heldout_counts,
            synthesized_rows,
            history,
        },
    ))
}

fn hash_key(key: &NetKey) -> u64 {
    (key.component as u64) << 16 | (key.attribute as u64) << 8 | key.kind as u64
}

/// All rule nets of one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleNetBundle {
    pub config: Configuration,
    pub latent_dim: usize,
    pub nets: BTreeMap<NetKey, RuleNet>,
}

/// Trains every applicable net of the autoencoder's configuration.
pub fn train_rule_nets(
    train_problems: &[Problem],
    heldout_problems: &[Problem],
    ae: &SymbolicAutoencoder,
    rcfg: &RuleTrainConfig,
) -> Result<(RuleNetBundle, Vec<RuleNetReport>)> {
    let bank = RowBank::build(train_problems, ae, rcfg.include_options)?;
    let held = RowBank::build(heldout_problems, ae, rcfg.include_options)?;
    let mut nets = BTreeMap::new();
    let mut reports = Vec::new();
    for key in net_keys(ae.config) {
        let (net, report) = train_rule_net(&bank.dataset(&key)?, &held.dataset(&key)?, ae, key, rcfg)?;
        nets.insert(key, net);
        reports.push(report);
    }
    Ok((
        RuleNetBundle {
            config: ae.config,
            latent_dim: ae.latent_dim,
            nets,
        },
        reports,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_counts_per_configuration() {
        let counts: Vec<usize> = Configuration::ALL.iter().map(|&c| net_keys(c).len()).collect();
        assert_eq!(counts, vec![11, 22, 22, 17, 19, 19, 25]);
        assert_eq!(counts.iter().sum::<usize>(), 135);
    }

    #[test]
    fn f1_examples() {
        assert_eq!(macro_f1(&[0, 1, 1, 0], &[0, 1, 1, 0], 2), 1.0);
        // Class 0: tp 1, fp 0, fn 1 -> 2/3. Class 1: tp 2, fp 1, fn 0 -> 4/5.
        let f = macro_f1(&[0, 0, 1, 1], &[0, 1, 1, 1], 2);
        assert!((f - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-12);
        // Classes absent from the truth do not count.
        assert_eq!(macro_f1(&[2, 2], &[2, 2], 5), 1.0);
    }

    #[test]
    fn oversampling_reaches_floor() {
        let x = Array2::zeros((100, 1));
        let mut y = vec![0; 98];
        y.extend([1, 2]);
        let data = Dataset::new(x, Targets::Classes(y)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = oversample(&data, &[0, 1, 2], 0.05, &mut rng);
        let Targets::Classes(oy) = &out.targets else {
            unreachable!()
        };
        let c = class_counts(oy, 3);
        for k in 0..3 {
            assert!(c[k] as f64 / oy.len() as f64 >= 0.05 - 1e-9, "{c:?}");
        }
    }
}
