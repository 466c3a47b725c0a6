//! Neural rule inference and option scoring over a problem's ten rows
//! (rows 1 and 2, then row 3 completed by each option), in three modes:
//! image/neural (A), image/symbolic (B) and symbolic/neural (c).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AttributeKind, Configuration, Panel, Problem, RuleKind, MATRIX_PANELS, OPTION_COUNT};
use crate::oracle::{argmax_first, label_row, problem_rules, solve_symbolic, RowTriple};
use crate::par;
use crate::trainers::{macro_f1, net_keys, ImageEncoder, NetKey, RuleNetBundle, SymbolicAutoencoder};

/// Rows 1 and 2 plus one completed third row per option.
pub const ROWS_PER_PROBLEM: usize = 2 + OPTION_COUNT;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub tau: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { tau: 0.5 }
    }
}

impl SearchConfig {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidTrainConfig(format!("tau must lie in (0, 1), got {tau}")));
        }
        Ok(SearchConfig { tau })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveMode {
    /// A: rendered images, `E_X` latents, rule nets.
    ImageNeural,
    /// B: rendered images decoded back to symbols, exact solver.
    ImageSymbolic,
    /// c: symbolic panels, `E_S` latents, rule nets.
    SymbolicNeural,
}

impl SolveMode {
    pub const ALL: [SolveMode; 3] = [
        SolveMode::ImageNeural,
        SolveMode::ImageSymbolic,
        SolveMode::SymbolicNeural,
    ];

    pub fn letter(self) -> &'static str {
        match self {
            SolveMode::ImageNeural => "A",
            SolveMode::ImageSymbolic => "B",
            SolveMode::SymbolicNeural => "c",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SolveMode::ImageNeural => "A: Image/Neural",
            SolveMode::ImageSymbolic => "B: Image/Symbolic",
            SolveMode::SymbolicNeural => "c: Symbolic/Neural",
        }
    }
}

impl fmt::Display for SolveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.letter())
    }
}

impl std::str::FromStr for SolveMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(SolveMode::ImageNeural),
            "b" => Ok(SolveMode::ImageSymbolic),
            "c" => Ok(SolveMode::SymbolicNeural),
            _ => Err(format!("unknown mode '{s}' (expected a, b or c)")),
        }
    }
}

/// A rule accepted on both example rows. `value` is the net's class index
/// and is never 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InferredRule {
    pub component: usize,
    pub attribute: AttributeKind,
    pub kind: RuleKind,
    pub value: usize,
}

impl InferredRule {
    pub fn key(&self) -> NetKey {
        NetKey {
            component: self.component,
            attribute: self.attribute,
            kind: self.kind,
        }
    }
}

/// Class probabilities of the ten rows of one problem for each net, as
/// `ROWS_PER_PROBLEM x class_count` matrices.
pub type ProbabilityTable = BTreeMap<NetKey, Array2<f64>>;

/// Source of per-row class probabilities for one problem.
pub trait RowProbabilities {
    fn probabilities(&self, key: &NetKey) -> Result<Array2<f64>>;
}

/// Rule nets applied to latent rows.
pub struct NeuralRows<'a> {
    pub bundle: &'a RuleNetBundle,
    /// `ROWS_PER_PROBLEM x 3·latent_dim`.
    pub inputs: Array2<f64>,
}

impl<'a> NeuralRows<'a> {
    /// `latents` holds the 8 matrix panels then the 8 options, one per row.
    pub fn new(bundle: &'a RuleNetBundle, latents: ArrayView2<'_, f64>) -> Result<Self> {
        let l = bundle.latent_dim;
        if latents.ncols() != l {
            return Err(Error::DimensionMismatch {
                expected: l,
                found: latents.ncols(),
            });
        }
        if latents.nrows() != MATRIX_PANELS + OPTION_COUNT {
            return Err(Error::DimensionMismatch {
                expected: MATRIX_PANELS + OPTION_COUNT,
                found: latents.nrows(),
            });
        }
        let mut inputs = Array2::zeros((ROWS_PER_PROBLEM, 3 * l));
        for (r, panels) in row_panel_indices().iter().enumerate() {
            for (j, &p) in panels.iter().enumerate() {
                inputs
                    .slice_mut(ndarray::s![r, j * l..(j + 1) * l])
                    .assign(&latents.row(p));
            }
        }
        Ok(NeuralRows { bundle, inputs })
    }
}

impl RowProbabilities for NeuralRows<'_> {
    fn probabilities(&self, key: &NetKey) -> Result<Array2<f64>> {
        let net = self
            .bundle
            .nets
            .get(key)
            .ok_or_else(|| Error::MissingNet(key.to_string()))?;
        Ok(net.probabilities(self.inputs.view()))
    }
}

/// Exact one-hot probabilities from the oracle's labels, standing in for
/// perfectly trained nets.
pub struct OracleStub<'a> {
    pub problem: &'a Problem,
}

impl RowProbabilities for OracleStub<'_> {
    fn probabilities(&self, key: &NetKey) -> Result<Array2<f64>> {
        let labels = row_labels(self.problem, key)?;
        let mut p = Array2::zeros((ROWS_PER_PROBLEM, key.kind.class_count()));
        for (r, &c) in labels.iter().enumerate() {
            p[[r, c]] = 1.0;
        }
        Ok(p)
    }
}

/// Indices into matrix-then-options panel order for each of the ten rows.
fn row_panel_indices() -> [[usize; 3]; ROWS_PER_PROBLEM] {
    let mut rows = [[0; 3]; ROWS_PER_PROBLEM];
    rows[0] = [0, 1, 2];
    rows[1] = [3, 4, 5];
    for k in 0..OPTION_COUNT {
        rows[2 + k] = [6, 7, MATRIX_PANELS + k];
    }
    rows
}

/// Oracle labels of the ten rows for one net.
pub fn row_labels(problem: &Problem, key: &NetKey) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(ROWS_PER_PROBLEM);
    for r in 0..2 {
        let row = RowTriple::new(problem.config, problem.row(r));
        out.push(label_row(&row, key.component, key.attribute, key.kind)?);
    }
    for k in 0..OPTION_COUNT {
        let row = RowTriple::new(problem.config, problem.completed_row(k));
        out.push(label_row(&row, key.component, key.attribute, key.kind)?);
    }
    Ok(out)
}

pub fn probability_table(source: &dyn RowProbabilities, keys: &[NetKey]) -> Result<ProbabilityTable> {
    keys.iter().map(|k| Ok((*k, source.probabilities(k)?))).collect()
}

/// Per component and attribute, the first kind (in search order) accepted on
/// both example rows. Binary kinds need the positive-class probability above
/// `tau` on both rows; parameterized kinds need the same non-zero argmax.
pub fn infer_rules_neural(table: &ProbabilityTable, keys: &[NetKey], scfg: &SearchConfig) -> Result<Vec<InferredRule>> {
    let mut out = Vec::new();
    let mut done: BTreeSet<(usize, AttributeKind)> = BTreeSet::new();
    for key in keys {
        if done.contains(&(key.component, key.attribute)) {
            continue;
        }
        let p = table.get(key).ok_or_else(|| Error::MissingNet(key.to_string()))?;
        let (p1, p2) = (p.row(0), p.row(1));
        let value = match key.kind {
            RuleKind::Constant | RuleKind::DistributeThree => (p1[1] > scfg.tau && p2[1] > scfg.tau).then_some(1),
            RuleKind::Progression | RuleKind::Arithmetic => {
                let a1 = argmax_first(p1.as_slice().unwrap());
                let a2 = argmax_first(p2.as_slice().unwrap());
                (a1 != 0 && a1 == a2).then_some(a1)
            }
        };
        if let Some(value) = value {
            out.push(InferredRule {
                component: key.component,
                attribute: key.attribute,
                kind: key.kind,
                value,
            });
            done.insert((key.component, key.attribute));
        }
    }
    Ok(out)
}

/// `s_k`: summed probability of each rule's inferred value on row 3
/// completed by option `k`.
pub fn score_options(rules: &[InferredRule], table: &ProbabilityTable) -> Result<Vec<f64>> {
    let mut scores = vec![0.0; OPTION_COUNT];
    for rule in rules {
        let key = rule.key();
        let p = table.get(&key).ok_or_else(|| Error::MissingNet(key.to_string()))?;
        for (k, s) in scores.iter_mut().enumerate() {
            *s += p[[2 + k, rule.value]];
        }
    }
    Ok(scores)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub answer: usize,
    /// Option scores; empty in mode B.
    pub scores: Vec<f64>,
    pub rules: Vec<InferredRule>,
    /// No rule was accepted; the answer is the fallback 0.
    pub empty_rule_set: bool,
}

/// Runs the search on a probability source.
pub fn solve_with(
    source: &dyn RowProbabilities,
    config: Configuration,
    scfg: &SearchConfig,
) -> Result<(Solution, ProbabilityTable)> {
    let keys = net_keys(config);
    let table = probability_table(source, &keys)?;
    let rules = infer_rules_neural(&table, &keys, scfg)?;
    let solution = if rules.is_empty() {
        Solution {
            answer: 0,
            scores: vec![0.0; OPTION_COUNT],
            rules,
            empty_rule_set: true,
        }
    } else {
        let scores = score_options(&rules, &table)?;
        Solution {
            answer: argmax_first(&scores),
            scores,
            rules,
            empty_rule_set: false,
        }
    };
    Ok((solution, table))
}

/// Trained models; each mode needs a subset.
#[derive(Clone, Debug, Default)]
pub struct Models {
    pub autoencoder: Option<SymbolicAutoencoder>,
    pub rules: Option<RuleNetBundle>,
    pub image: Option<ImageEncoder>,
}

impl Models {
    fn check(&self, mode: SolveMode, config: Configuration) -> Result<()> {
        let need_ae = matches!(mode, SolveMode::SymbolicNeural | SolveMode::ImageSymbolic);
        let need_rules = mode != SolveMode::ImageSymbolic;
        let need_image = mode != SolveMode::SymbolicNeural;
        let mut configs = Vec::new();
        if need_ae {
            configs.push(
                self.autoencoder
                    .as_ref()
                    .ok_or(Error::MissingModel("symbolic autoencoder"))?
                    .config,
            );
        }
        if need_rules {
            configs.push(self.rules.as_ref().ok_or(Error::MissingModel("rule nets"))?.config);
        }
        if need_image {
            configs.push(self.image.as_ref().ok_or(Error::MissingModel("image encoder"))?.config);
        }
        if let Some(&found) = configs.iter().find(|&&c| c != config) {
            return Err(Error::ConfigMismatch {
                expected: config,
                found,
            });
        }
        Ok(())
    }

    fn latents(&self, problem: &Problem, mode: SolveMode) -> Result<Array2<f64>> {
        let panels: Vec<&Panel> = problem.panels().collect();
        match mode {
            SolveMode::SymbolicNeural => {
                let ae = self
                    .autoencoder
                    .as_ref()
                    .ok_or(Error::MissingModel("symbolic autoencoder"))?;
                for p in &panels {
                    ae.latent(p).map(drop)?;
                }
                Ok(ae.encode_panels(&panels))
            }
            _ => self
                .image
                .as_ref()
                .ok_or(Error::MissingModel("image encoder"))?
                .latents(&panels),
        }
    }
}

/// Problem read back from images through `E_X` and `D_S`.
pub fn reconstruct_from_images(problem: &Problem, models: &Models) -> Result<Problem> {
    let ae = models
        .autoencoder
        .as_ref()
        .ok_or(Error::MissingModel("symbolic autoencoder"))?;
    let image = models.image.as_ref().ok_or(Error::MissingModel("image encoder"))?;
    let panels: Vec<&Panel> = problem.panels().collect();
    let mut decoded = ae.decode_latents(image.latents(&panels)?.view())?;
    let options = decoded.split_off(MATRIX_PANELS);
    Ok(Problem {
        matrix: decoded,
        options,
        ..problem.clone()
    })
}

struct Outcome {
    solution: Solution,
    table: Option<ProbabilityTable>,
}

fn solve_inner(problem: &Problem, mode: SolveMode, models: &Models, scfg: &SearchConfig) -> Result<Outcome> {
    models.check(mode, problem.config)?;
    if mode == SolveMode::ImageSymbolic {
        let rebuilt = reconstruct_from_images(problem, models)?;
        let solution = match solve_symbolic(&rebuilt) {
            Ok(answer) => Solution {
                answer,
                scores: Vec::new(),
                rules: Vec::new(),
                empty_rule_set: false,
            },
            Err(Error::NoConsistentRules) => Solution {
                answer: 0,
                scores: Vec::new(),
                rules: Vec::new(),
                empty_rule_set: true,
            },
            Err(e) => return Err(e),
        };
        return Ok(Outcome { solution, table: None });
    }
    let latents = models.latents(problem, mode)?;
    let rows = NeuralRows::new(models.rules.as_ref().expect("checked"), latents.view())?;
    let (solution, table) = solve_with(&rows, problem.config, scfg)?;
    Ok(Outcome {
        solution,
        table: Some(table),
    })
}

pub fn solve(problem: &Problem, mode: SolveMode, models: &Models, scfg: &SearchConfig) -> Result<Solution> {
    Ok(solve_inner(problem, mode, models, scfg)?.solution)
}

/// Held-out quality of one net on the evaluated problems, counted on rows 1,
/// 2 and the row completed by the correct answer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetScore {
    pub key: NetKey,
    pub class_count: usize,
    pub rows: usize,
    pub f1: f64,
    pub accuracy: f64,
}

/// How the inferred rule sets compare with the oracle's rules of rows 1-2.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleConfusion {
    pub correct: usize,
    pub spurious: usize,
    pub missed: usize,
    /// Problems whose inferred set equals the oracle's.
    pub exact_sets: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: Configuration,
    pub mode: SolveMode,
    pub tau: f64,
    pub problems: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// Indices of problems that fell back to answer 0.
    pub empty_rule_set: Vec<usize>,
    /// Indices of problems with repeated options.
    pub degenerate: Vec<usize>,
    pub confusion: RuleConfusion,
    pub nets: Vec<NetScore>,
}

fn oracle_rule_set(problem: &Problem) -> BTreeSet<InferredRule> {
    problem_rules(problem)
        .into_iter()
        .map(|r| InferredRule {
            component: r.component,
            attribute: r.rule.attribute,
            kind: r.rule.kind,
            value: r.rule.value.class_index(),
        })
        .collect()
}

/// Solves every problem (in parallel, merged in input order) and summarizes.
pub fn evaluate(problems: &[Problem], mode: SolveMode, models: &Models, scfg: &SearchConfig) -> Result<EvalReport> {
    let config = problems.first().map_or(Configuration::Center, |p| p.config);
    if let Some(p) = problems.iter().find(|p| p.config != config) {
        return Err(Error::ConfigMismatch {
            expected: config,
            found: p.config,
        });
    }
    let outcomes: Vec<Outcome> = par::map_slice(problems, |p| solve_inner(p, mode, models, scfg))
        .into_iter()
        .collect::<Result<_>>()?;

    let keys = net_keys(config);
    let mut truth: BTreeMap<NetKey, Vec<usize>> = BTreeMap::new();
    let mut pred: BTreeMap<NetKey, Vec<usize>> = BTreeMap::new();
    let mut confusion = RuleConfusion::default();
    let mut correct = 0;
    let mut empty_rule_set = Vec::new();
    let mut degenerate = Vec::new();
    for (i, (problem, out)) in problems.iter().zip(&outcomes).enumerate() {
        correct += (out.solution.answer == problem.answer) as usize;
        if out.solution.empty_rule_set {
            empty_rule_set.push(i);
        }
        if problem.has_duplicate_options() {
            degenerate.push(i);
        }
        let Some(table) = &out.table else { continue };
        let expected = oracle_rule_set(problem);
        let got: BTreeSet<InferredRule> = out.solution.rules.iter().copied().collect();
        confusion.correct += got.intersection(&expected).count();
        confusion.spurious += got.difference(&expected).count();
        confusion.missed += expected.difference(&got).count();
        confusion.exact_sets += (got == expected) as usize;
        for key in &keys {
            let labels = row_labels(problem, key)?;
            let p = &table[key];
            for r in [0, 1, 2 + problem.answer] {
                truth.entry(*key).or_default().push(labels[r]);
                pred.entry(*key)
                    .or_default()
                    .push(argmax_first(p.row(r).as_slice().unwrap()));
            }
        }
    }
    let nets = truth
        .iter()
        .map(|(key, t)| {
            let p = &pred[key];
            let hits = t.iter().zip(p).filter(|(a, b)| a == b).count();
            NetScore {
                key: *key,
                class_count: key.kind.class_count(),
                rows: t.len(),
                f1: macro_f1(t, p, key.kind.class_count()),
                accuracy: hits as f64 / t.len().max(1) as f64,
            }
        })
        .collect();
    Ok(EvalReport {
        config,
        mode,
        tau: scfg.tau,
        problems: problems.len(),
        correct,
        accuracy: correct as f64 / problems.len().max(1) as f64,
        empty_rule_set,
        degenerate,
        confusion,
        nets,
    })
}

/// Accuracy per configuration (rows) and mode (columns).
pub fn accuracy_table(reports: &[EvalReport]) -> String {
    let mut modes: Vec<SolveMode> = SolveMode::ALL
        .into_iter()
        .filter(|m| reports.iter().any(|r| r.mode == *m))
        .collect();
    modes.sort_by_key(|m| m.letter());
    let mut configs: Vec<Configuration> = reports.iter().map(|r| r.config).collect();
    configs.sort();
    configs.dedup();
    let mut out = format!("{:<22}", "Method");
    for c in &configs {
        out += &format!("{:>14}", c.display_name());
    }
    out.push('\n');
    for m in modes {
        out += &format!("{:<22}", m.label());
        for c in &configs {
            match reports.iter().find(|r| r.mode == m && r.config == *c) {
                Some(r) => out += &format!("{:>13.2}%", 100.0 * r.accuracy),
                None => out += &format!("{:>14}", "-"),
            }
        }
        out.push('\n');
    }
    out
}

/// Per-net F1 laid out with one row per (component, attribute) and one
/// column per rule kind.
pub fn f1_table(config: Configuration, nets: &[(NetKey, f64)]) -> String {
    let mut out = format!("{}\n{:<20}", config.display_name(), "Attribute");
    for k in RuleKind::ORDER {
        out += &format!("{:>18}", k.display_name());
    }
    out.push('\n');
    let specs = config.components();
    let mut rows: Vec<(usize, AttributeKind)> = nets.iter().map(|(k, _)| (k.component, k.attribute)).collect();
    rows.dedup();
    for (c, a) in rows {
        let name = if specs.len() > 1 {
            format!("{} {}", specs[c].name, a.short_name())
        } else {
            a.short_name().to_string()
        };
        out += &format!("{name:<20}");
        for k in RuleKind::ORDER {
            match nets
                .iter()
                .find(|(key, _)| key.component == c && key.attribute == a && key.kind == k)
            {
                Some((_, f1)) => out += &format!("{f1:>18.4}"),
                None => out += &format!("{:>18}", "-"),
            }
        }
        out.push('\n');
    }
    out
}

pub const ACCURACY_CSV_HEADER: &str = "config,mode,tau,problems,correct,accuracy,empty_rule_set,degenerate,rules_correct,rules_spurious,rules_missed,exact_rule_sets";
pub const NET_CSV_HEADER: &str = "config,mode,component,attribute,kind,class_count,rows,f1,accuracy";

impl EvalReport {
    pub fn accuracy_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{},{},{},{},{},{}",
            self.config.name(),
            self.mode.letter(),
            self.tau,
            self.problems,
            self.correct,
            self.accuracy,
            self.empty_rule_set.len(),
            self.degenerate.len(),
            self.confusion.correct,
            self.confusion.spurious,
            self.confusion.missed,
            self.confusion.exact_sets
        )
    }

    pub fn net_csv_rows(&self) -> Vec<String> {
        self.nets
            .iter()
            .map(|n| {
                format!(
                    "{},{},{},{},{},{},{},{:.6},{:.6}",
                    self.config.name(),
                    self.mode.letter(),
                    n.key.component,
                    n.key.attribute.as_str(),
                    n.key.kind.as_str(),
                    n.class_count,
                    n.rows,
                    n.f1,
                    n.accuracy
                )
            })
            .collect()
    }

    /// Human-readable summary: headline numbers, flags and the F1 table.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} mode {} (tau {}): {}/{} correct, accuracy {:.2}%\n",
            self.config.display_name(),
            self.mode.label(),
            self.tau,
            self.correct,
            self.problems,
            100.0 * self.accuracy
        );
        out += &format!(
            "empty rule set (answered 0): {}\ndegenerate (repeated options): {}\n",
            self.empty_rule_set.len(),
            self.degenerate.len()
        );
        if !self.nets.is_empty() {
            let c = &self.confusion;
            out += &format!(
                "inferred rules: {} correct, {} spurious, {} missed; exact sets {}/{}\n\n",
                c.correct, c.spurious, c.missed, c.exact_sets, self.problems
            );
            let pairs: Vec<(NetKey, f64)> = self.nets.iter().map(|n| (n.key, n.f1)).collect();
            out += &f1_table(self.config, &pairs);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{generate_dataset, GeneratorConfig};
    use ndarray::array;

    fn key(attribute: AttributeKind, kind: RuleKind) -> NetKey {
        NetKey {
            component: 0,
            attribute,
            kind,
        }
    }

    fn table_with(entries: Vec<(NetKey, Array2<f64>)>) -> ProbabilityTable {
        entries.into_iter().collect()
    }

    fn rows(first: &[f64], second: &[f64], rest: &[f64]) -> Array2<f64> {
        let mut m = Array2::zeros((ROWS_PER_PROBLEM, first.len()));
        m.row_mut(0).assign(&ndarray::ArrayView1::from(first));
        m.row_mut(1).assign(&ndarray::ArrayView1::from(second));
        for r in 2..ROWS_PER_PROBLEM {
            m.row_mut(r).assign(&ndarray::ArrayView1::from(rest));
        }
        m
    }

    #[test]
    fn constant_accepted_above_tau() {
        let k = key(AttributeKind::Type, RuleKind::Constant);
        let t = table_with(vec![(k, rows(&[0.1, 0.9], &[0.1, 0.9], &[0.5, 0.5]))]);
        let r = infer_rules_neural(&t, &[k], &SearchConfig::default()).unwrap();
        assert_eq!(
            r,
            vec![InferredRule {
                component: 0,
                attribute: AttributeKind::Type,
                kind: RuleKind::Constant,
                value: 1
            }]
        );
        let strict = SearchConfig::new(0.95).unwrap();
        assert!(infer_rules_neural(&t, &[k], &strict).unwrap().is_empty());
    }

    #[test]
    fn progression_needs_equal_nonzero_argmax() {
        let c = key(AttributeKind::Size, RuleKind::Constant);
        let p = key(AttributeKind::Size, RuleKind::Progression);
        let a = key(AttributeKind::Size, RuleKind::Arithmetic);
        let mut t = table_with(vec![
            (c, rows(&[0.9, 0.1], &[0.9, 0.1], &[0.9, 0.1])),
            (
                p,
                rows(
                    &[0.0, 0.0, 0.0, 0.8, 0.2],
                    &[0.0, 0.0, 0.0, 0.2, 0.8],
                    &[1.0, 0.0, 0.0, 0.0, 0.0],
                ),
            ),
            (a, rows(&[0.8, 0.1, 0.1], &[0.8, 0.1, 0.1], &[1.0, 0.0, 0.0])),
        ]);
        let keys = [c, p, a];
        assert!(infer_rules_neural(&t, &keys, &SearchConfig::default())
            .unwrap()
            .is_empty());
        t.insert(
            p,
            rows(&[0.0, 0.0, 0.0, 0.8, 0.2], &[0.0, 0.1, 0.0, 0.7, 0.2], &[0.0; 5]),
        );
        let r = infer_rules_neural(&t, &keys, &SearchConfig::default()).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].kind, r[0].value), (RuleKind::Progression, 3));
    }

    #[test]
    fn first_acceptance_per_attribute_wins() {
        let c = key(AttributeKind::Color, RuleKind::Constant);
        let d = key(AttributeKind::Color, RuleKind::DistributeThree);
        let t = table_with(vec![
            (c, rows(&[0.2, 0.8], &[0.3, 0.7], &[0.0, 1.0])),
            (d, rows(&[0.0, 1.0], &[0.0, 1.0], &[0.0, 1.0])),
        ]);
        let r = infer_rules_neural(&t, &[c, d], &SearchConfig::default()).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].kind, RuleKind::Constant);
        assert!(matches!(
            infer_rules_neural(&ProbabilityTable::new(), &[c], &SearchConfig::default()),
            Err(Error::MissingNet(_))
        ));
    }

    #[test]
    fn scores_sum_rule_probabilities() {
        let c = key(AttributeKind::Type, RuleKind::Constant);
        let p = key(AttributeKind::Size, RuleKind::Progression);
        let mut pc = rows(&[0.0, 1.0], &[0.0, 1.0], &[0.5, 0.5]);
        let mut pp = rows(&[0.0; 5], &[0.0; 5], &[0.2; 5]);
        pc.row_mut(2).assign(&array![0.1, 0.9]);
        pp.row_mut(2).assign(&array![0.0, 0.0, 0.0, 0.8, 0.2]);
        let t = table_with(vec![(c, pc), (p, pp)]);
        let rules = vec![
            InferredRule {
                component: 0,
                attribute: AttributeKind::Type,
                kind: RuleKind::Constant,
                value: 1,
            },
            InferredRule {
                component: 0,
                attribute: AttributeKind::Size,
                kind: RuleKind::Progression,
                value: 3,
            },
        ];
        let s = score_options(&rules, &t).unwrap();
        assert!((s[0] - 1.7).abs() < 1e-12);
        assert!((s[1] - 0.7).abs() < 1e-12);
        let mut reversed = rules.clone();
        reversed.reverse();
        assert_eq!(score_options(&reversed, &t).unwrap(), s);
    }

    #[test]
    fn tau_bounds() {
        assert!(SearchConfig::new(0.0).is_err());
        assert!(SearchConfig::new(1.0).is_err());
        assert!(SearchConfig::new(f64::NAN).is_err());
        assert!(SearchConfig::new(0.3).is_ok());
    }

    #[test]
    fn stub_search_matches_symbolic_solver() {
        for config in Configuration::ALL {
            let problems = generate_dataset(&GeneratorConfig::new(config, 77), 40).unwrap();
            for p in &problems {
                let (sol, _) = solve_with(&OracleStub { problem: p }, config, &SearchConfig::default()).unwrap();
                assert!(!sol.empty_rule_set);
                assert_eq!(sol.answer, solve_symbolic(p).unwrap());
                assert_eq!(sol.answer, p.answer);
                assert_eq!(sol.scores[p.answer], sol.rules.len() as f64);
                let expected: BTreeSet<InferredRule> = oracle_rule_set(p);
                assert_eq!(sol.rules.iter().copied().collect::<BTreeSet<_>>(), expected);
            }
        }
    }

    #[test]
    fn missing_models_are_reported() {
        let p = &generate_dataset(&GeneratorConfig::new(Configuration::Center, 1), 1).unwrap()[0];
        let m = Models::default();
        for mode in SolveMode::ALL {
            assert!(matches!(
                solve(p, mode, &m, &SearchConfig::default()),
                Err(Error::MissingModel(_))
            ));
        }
    }

    #[test]
    fn mode_letters_parse() {
        for m in SolveMode::ALL {
            assert_eq!(m.letter().parse::<SolveMode>().unwrap(), m);
        }
        assert!("d".parse::<SolveMode>().is_err());
    }
}
