//! Procedural problem generation.
//!
//! A problem samples one rule per rule-governing attribute of each component,
//! instantiates three rows under those rules, and builds seven distractors by
//! perturbing the correct answer until each breaks at least one ground-truth
//! rule and at least one rule the symbolic solver would infer from rows 1-2.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rand::seq::index;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    applicable_for_role, AttributeKind, ComponentPanel, ComponentRole, ComponentRules, ComponentSpec, Configuration,
    Entity, Panel, Problem, RuleInstance, RuleKind, RuleValue, OPTION_COUNT,
};
use crate::oracle::{self, check_rule, rotate_mask, ComponentRule, RowTriple};
use crate::par;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub config: Configuration,
    pub seed: u64,
    /// How many attribute values a distractor changes.
    pub distractor_edits: RangeInclusive<u8>,
    pub max_rejections: u32,
}

impl GeneratorConfig {
    pub fn new(config: Configuration, seed: u64) -> Self {
        GeneratorConfig {
            config,
            seed,
            distractor_edits: 1..=2,
            max_rejections: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (*self.distractor_edits.start(), *self.distractor_edits.end());
        if lo < 1 || hi > 3 || lo > hi {
            return Err(Error::InvalidGeneratorConfig(format!(
                "distractor edits {lo}..={hi} outside 1..=3"
            )));
        }
        if self.max_rejections == 0 {
            return Err(Error::InvalidGeneratorConfig("max_rejections must be > 0".into()));
        }
        Ok(())
    }
}

/// Per-component ground-truth rules.
pub type RuleAssignment = Vec<ComponentRules>;

/// RNG for problem `index` of a seeded stream; independent per index so
/// shards can be generated in any order.
pub fn problem_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn rule_values<R: Rng + ?Sized>(
    config: Configuration,
    component: usize,
    attr: AttributeKind,
    kind: RuleKind,
    rng: &mut R,
) -> RuleValue {
    let classes: Vec<usize> = oracle::reachable_classes(config, component, attr, kind)
        .expect("applicable pair")
        .into_iter()
        .filter(|&c| c != 0)
        .collect();
    let class = classes[rng.gen_range(0..classes.len())];
    RuleValue::from_class(kind, class).expect("reachable class")
}

fn sample_kind<R: Rng + ?Sized>(role: ComponentRole, attr: AttributeKind, rng: &mut R) -> RuleKind {
    let kinds: Vec<RuleKind> = RuleKind::ORDER
        .into_iter()
        .filter(|&k| applicable_for_role(role, attr, k))
        .collect();
    kinds[rng.gen_range(0..kinds.len())]
}

/// Sample one applicable rule per rule-governing attribute. Grid components
/// govern exactly one of Number/Position; the other follows from it.
pub fn sample_rule_assignment<R: Rng + ?Sized>(config: Configuration, rng: &mut R) -> RuleAssignment {
    sample_rule_assignment_forcing(config, rng, None)
}

/// Like [`sample_rule_assignment`], but with `force = (component, attr, kind)`
/// that pair is always chosen.
pub fn sample_rule_assignment_forcing<R: Rng + ?Sized>(
    config: Configuration,
    rng: &mut R,
    force: Option<(usize, AttributeKind, RuleKind)>,
) -> RuleAssignment {
    config
        .components()
        .iter()
        .enumerate()
        .map(|(c, spec)| {
            let mut attrs: Vec<AttributeKind> = AttributeKind::ENTITY
                .into_iter()
                .filter(|&a| RuleKind::ORDER.iter().any(|&k| applicable_for_role(spec.role, a, k)))
                .collect();
            if spec.is_grid() {
                let layout_attr = match force {
                    Some((fc, a @ (AttributeKind::Number | AttributeKind::Position), _)) if fc == c => a,
                    _ if rng.gen_bool(0.5) => AttributeKind::Number,
                    _ => AttributeKind::Position,
                };
                attrs.push(layout_attr);
            }
            attrs
                .into_iter()
                .map(|attr| {
                    let kind = match force {
                        Some((fc, fa, fk)) if fc == c && fa == attr => fk,
                        _ => sample_kind(spec.role, attr, rng),
                    };
                    let value = rule_values(config, c, attr, kind, rng);
                    (
                        attr,
                        RuleInstance {
                            attribute: attr,
                            kind,
                            value,
                        },
                    )
                })
                .collect()
        })
        .collect()
}

/// Distribute-three value triples, drawn once per problem and shared by all rows.
pub type SharedDraws = Vec<BTreeMap<AttributeKind, [u16; 3]>>;

fn random_mask<R: Rng + ?Sized>(n: usize, rng: &mut R) -> u16 {
    let count = rng.gen_range(1..=n);
    mask_with_count(n, count, rng)
}

fn mask_with_count<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> u16 {
    index::sample(rng, n, count).into_iter().fold(0u16, |m, s| m | (1 << s))
}

pub fn draw_shared<R: Rng + ?Sized>(config: Configuration, assignment: &RuleAssignment, rng: &mut R) -> SharedDraws {
    config
        .components()
        .iter()
        .zip(assignment)
        .map(|(spec, rules)| {
            let n = spec.slot_count();
            rules
                .values()
                .filter(|r| r.kind == RuleKind::DistributeThree)
                .map(|r| {
                    let triple = match r.attribute {
                        AttributeKind::Number => {
                            let v = index::sample(rng, n, 3).into_vec();
                            [v[0] as u16 + 1, v[1] as u16 + 1, v[2] as u16 + 1]
                        }
                        AttributeKind::Position => {
                            let a = random_mask(n, rng);
                            let mut b = random_mask(n, rng);
                            while b == a {
                                b = random_mask(n, rng);
                            }
                            let mut c = random_mask(n, rng);
                            while c == a || c == b {
                                c = random_mask(n, rng);
                            }
                            [a, b, c]
                        }
                        attr => {
                            let d = attr.entity_domain().unwrap();
                            let v = index::sample(rng, d, 3).into_vec();
                            [v[0] as u16, v[1] as u16, v[2] as u16]
                        }
                    };
                    (r.attribute, triple)
                })
                .collect()
        })
        .collect()
}

fn rejection<T, R: Rng + ?Sized>(
    max: u32,
    rng: &mut R,
    reason: &'static str,
    mut f: impl FnMut(&mut R) -> Option<T>,
) -> Result<T> {
    for _ in 0..max {
        if let Some(v) = f(rng) {
            return Ok(v);
        }
    }
    Err(Error::GenerationExhausted { attempts: max, reason })
}

fn rotated(triple: [u16; 3], row: usize) -> [u16; 3] {
    [triple[row % 3], triple[(row + 1) % 3], triple[(row + 2) % 3]]
}

/// Scalar sequence (type/size/color index or Number) for one row.
fn scalar_row<R: Rng + ?Sized>(
    rule: &RuleInstance,
    lo: i32,
    hi: i32,
    shared: Option<[u16; 3]>,
    row: usize,
    rng: &mut R,
    max: u32,
) -> Result<[i32; 3]> {
    let in_range = |v: i32| (lo..=hi).contains(&v);
    match (rule.kind, rule.value) {
        (RuleKind::Constant, _) => {
            let v = rng.gen_range(lo..=hi);
            Ok([v; 3])
        }
        (RuleKind::DistributeThree, _) => {
            let t = rotated(shared.expect("distribute-three triple"), row);
            Ok(t.map(|v| v as i32))
        }
        (RuleKind::Progression, RuleValue::Step(s)) => {
            let s = s as i32;
            rejection(max, rng, "progression start", |rng| {
                let a = rng.gen_range(lo..=hi);
                in_range(a + 2 * s).then_some([a, a + s, a + 2 * s])
            })
        }
        (RuleKind::Arithmetic, op) => rejection(max, rng, "arithmetic operands", |rng| {
            let a = rng.gen_range(lo..=hi);
            // A zero second operand would make add and sub indistinguishable.
            let b = rng.gen_range(lo.max(1)..=hi);
            let c = if op == RuleValue::Add { a + b } else { a - b };
            in_range(c).then_some([a, b, c])
        }),
        _ => unreachable!("rule value validated at construction"),
    }
}

fn position_row<R: Rng + ?Sized>(
    rule: &RuleInstance,
    n: usize,
    shared: Option<[u16; 3]>,
    row: usize,
    rng: &mut R,
    max: u32,
) -> Result<[u16; 3]> {
    match (rule.kind, rule.value) {
        (RuleKind::Constant, _) => {
            let m = random_mask(n, rng);
            Ok([m; 3])
        }
        (RuleKind::DistributeThree, _) => Ok(rotated(shared.expect("distribute-three triple"), row)),
        (RuleKind::Progression, RuleValue::Step(s)) => rejection(max, rng, "position progression", |rng| {
            let a = random_mask(n, rng);
            let b = rotate_mask(a, s, n);
            let m = [a, b, rotate_mask(b, s, n)];
            // Shift-symmetric layouts can alias an earlier step; skip them.
            (b != a && oracle::position_progression_class(m, n) == rule.value.class_index()).then_some(m)
        }),
        (RuleKind::Arithmetic, op) => rejection(max, rng, "position arithmetic", |rng| {
            let a = random_mask(n, rng);
            let b = random_mask(n, rng);
            let c = if op == RuleValue::Add { a | b } else { a & !b };
            (c != 0).then_some([a, b, c])
        }),
        _ => unreachable!("rule value validated at construction"),
    }
}

enum AttrRow {
    Uniform([u8; 3]),
    PerSlot(BTreeMap<u8, u8>),
}

fn component_row<R: Rng + ?Sized>(
    spec: &ComponentSpec,
    rules: &ComponentRules,
    shared: &BTreeMap<AttributeKind, [u16; 3]>,
    row: usize,
    rng: &mut R,
    max: u32,
) -> Result<[ComponentPanel; 3]> {
    let n = spec.slot_count();
    let masks: [u16; 3] = if !spec.is_grid() {
        [1; 3]
    } else if let Some(rule) = rules.get(&AttributeKind::Position) {
        position_row(rule, n, shared.get(&AttributeKind::Position).copied(), row, rng, max)?
    } else if let Some(rule) = rules.get(&AttributeKind::Number) {
        let counts = scalar_row(
            rule,
            1,
            n as i32,
            shared.get(&AttributeKind::Number).copied(),
            row,
            rng,
            max,
        )?;
        counts.map(|c| mask_with_count(n, c as usize, rng))
    } else {
        [random_mask(n, rng), random_mask(n, rng), random_mask(n, rng)]
    };

    let fixed_layout = spec.is_grid()
        && rules
            .get(&AttributeKind::Position)
            .is_some_and(|r| r.kind == RuleKind::Constant);

    let mut attr_rows = Vec::with_capacity(3);
    for attr in AttributeKind::ENTITY {
        let d = attr.entity_domain().unwrap() as i32;
        let ar = match rules.get(&attr) {
            None => AttrRow::Uniform([0; 3]),
            Some(rule) if rule.kind == RuleKind::Constant && fixed_layout => {
                // Each slot keeps its own value across the row.
                let palette = (0..n as u8)
                    .filter(|&s| masks[0] & (1 << s) != 0)
                    .map(|s| (s, rng.gen_range(0..d) as u8))
                    .collect();
                AttrRow::PerSlot(palette)
            }
            Some(rule) => {
                let v = scalar_row(rule, 0, d - 1, shared.get(&attr).copied(), row, rng, max)?;
                AttrRow::Uniform(v.map(|x| x as u8))
            }
        };
        attr_rows.push(ar);
    }

    let panels = [0usize, 1, 2].map(|k| {
        ComponentPanel::from_entities((0..n as u8).filter(|&s| masks[k] & (1 << s) != 0).map(|s| {
            let mut e = Entity::default();
            for (attr, ar) in AttributeKind::ENTITY.into_iter().zip(&attr_rows) {
                let v = match ar {
                    AttrRow::Uniform(v) => v[k],
                    AttrRow::PerSlot(p) => p[&s],
                };
                e.set(attr, v);
            }
            (s, e)
        }))
    });
    Ok(panels)
}

/// Instantiate row `row` (0..3) of a problem under `assignment`.
pub fn apply_rules_to_row<R: Rng + ?Sized>(
    assignment: &RuleAssignment,
    config: Configuration,
    shared: &SharedDraws,
    row: usize,
    rng: &mut R,
    max_rejections: u32,
) -> Result<[Panel; 3]> {
    let mut comps: Vec<[ComponentPanel; 3]> = Vec::with_capacity(assignment.len());
    for (c, spec) in config.components().iter().enumerate() {
        comps.push(component_row(
            spec,
            &assignment[c],
            &shared[c],
            row,
            rng,
            max_rejections,
        )?);
    }
    Ok([0usize, 1, 2].map(|k| Panel::new(comps.iter().map(|cp| cp[k].clone()).collect())))
}

fn rules_hold(config: Configuration, row: [&Panel; 3], rules: &[ComponentRule]) -> Vec<bool> {
    let row = RowTriple::new(config, row);
    rules
        .iter()
        .map(|r| check_rule(&r.rule, r.component, &row).expect("applicable rule"))
        .collect()
}

fn ground_truth_list(assignment: &RuleAssignment) -> Vec<ComponentRule> {
    assignment
        .iter()
        .enumerate()
        .flat_map(|(component, rules)| rules.values().map(move |&rule| ComponentRule { component, rule }))
        .collect()
}

#[derive(Clone, Copy)]
enum Edit {
    Entity(usize, AttributeKind),
    Number(usize),
    Position(usize),
}

fn edit_sites(config: Configuration) -> Vec<Edit> {
    let mut out = Vec::new();
    for (c, spec) in config.components().iter().enumerate() {
        out.push(Edit::Entity(c, AttributeKind::Type));
        out.push(Edit::Entity(c, AttributeKind::Size));
        if spec.role != ComponentRole::Out {
            out.push(Edit::Entity(c, AttributeKind::Color));
        }
        if spec.is_grid() {
            out.push(Edit::Number(c));
            out.push(Edit::Position(c));
        }
    }
    out
}

fn fresh_value<R: Rng + ?Sized>(domain: usize, current: u8, rng: &mut R) -> u8 {
    let v = rng.gen_range(0..domain - 1) as u8;
    if v >= current {
        v + 1
    } else {
        v
    }
}

fn relayout(cp: &ComponentPanel, mask: u16, n: usize) -> ComponentPanel {
    let existing: Vec<Entity> = cp.entities.values().copied().collect();
    ComponentPanel::from_entities(
        (0..n as u8)
            .filter(|&s| mask & (1 << s) != 0)
            .enumerate()
            .map(|(i, s)| (s, existing[i % existing.len()])),
    )
}

/// Apply one edit in place; false if the edit cannot change anything.
fn apply_edit<R: Rng + ?Sized>(panel: &mut Panel, config: Configuration, edit: Edit, rng: &mut R) -> bool {
    match edit {
        Edit::Entity(c, attr) => {
            let cp = &mut panel.components[c];
            let d = attr.entity_domain().unwrap();
            let values: Vec<u8> = cp.entities.values().map(|e| e.get(attr)).collect();
            if values.iter().all(|&v| v == values[0]) {
                let v = fresh_value(d, values[0], rng);
                cp.entities.values_mut().for_each(|e| e.set(attr, v));
            } else {
                let i = rng.gen_range(0..values.len());
                let e = cp.entities.values_mut().nth(i).unwrap();
                e.set(attr, fresh_value(d, values[i], rng));
            }
            true
        }
        Edit::Number(c) => {
            let n = config.components()[c].slot_count();
            let cp = &panel.components[c];
            let count = fresh_value(n, (cp.number() - 1) as u8, rng) as usize + 1;
            let mask = mask_with_count(n, count, rng);
            panel.components[c] = relayout(cp, mask, n);
            true
        }
        Edit::Position(c) => {
            let n = config.components()[c].slot_count();
            let cp = &panel.components[c];
            if cp.number() == n {
                return false;
            }
            let current = cp.position_mask();
            let mut mask = current;
            while mask == current {
                mask = mask_with_count(n, cp.number(), rng);
            }
            panel.components[c] = relayout(cp, mask, n);
            true
        }
    }
}

fn make_distractor<R: Rng + ?Sized>(
    correct: &Panel,
    config: Configuration,
    edits: &RangeInclusive<u8>,
    sites: &[Edit],
    rng: &mut R,
) -> Panel {
    let count = rng.gen_range(edits.clone()) as usize;
    let mut panel = correct.clone();
    let mut applied = 0;
    for i in index::sample(rng, sites.len(), sites.len()).into_iter() {
        if applied == count {
            break;
        }
        if apply_edit(&mut panel, config, sites[i], rng) {
            applied += 1;
        }
    }
    panel
}

/// Generate one problem. Retries with a fresh rule assignment whenever a row,
/// the answer, or a distractor cannot be instantiated.
pub fn generate_problem<R: Rng + ?Sized>(gcfg: &GeneratorConfig, rng: &mut R) -> Result<Problem> {
    generate_problem_forcing(gcfg, rng, None)
}

pub fn generate_problem_forcing<R: Rng + ?Sized>(
    gcfg: &GeneratorConfig,
    rng: &mut R,
    force: Option<(usize, AttributeKind, RuleKind)>,
) -> Result<Problem> {
    gcfg.validate()?;
    let config = gcfg.config;
    let max = gcfg.max_rejections;
    let sites = edit_sites(config);

    'attempt: for _ in 0..max {
        let assignment = sample_rule_assignment_forcing(config, rng, force);
        let shared = draw_shared(config, &assignment, rng);
        let mut rows = Vec::with_capacity(3);
        for r in 0..3 {
            match apply_rules_to_row(&assignment, config, &shared, r, rng, max) {
                Ok(row) => rows.push(row),
                Err(Error::GenerationExhausted { .. }) => continue 'attempt,
                Err(e) => return Err(e),
            }
        }
        let ground_truth = ground_truth_list(&assignment);
        debug_assert!(rows
            .iter()
            .all(|row| rules_hold(config, [&row[0], &row[1], &row[2]], &ground_truth)
                .into_iter()
                .all(|b| b)));

        let r1 = RowTriple::new(config, [&rows[0][0], &rows[0][1], &rows[0][2]]);
        let r2 = RowTriple::new(config, [&rows[1][0], &rows[1][1], &rows[1][2]]);
        let inferred = oracle::infer_common_rules(&r1, &r2);
        if inferred.is_empty() {
            continue;
        }
        let [p31, p32, correct] = rows.pop().unwrap();
        if !rules_hold(config, [&p31, &p32, &correct], &inferred)
            .into_iter()
            .all(|b| b)
        {
            continue;
        }

        let mut distractors: Vec<Panel> = Vec::with_capacity(OPTION_COUNT - 1);
        while distractors.len() < OPTION_COUNT - 1 {
            let found = (0..max).find_map(|_| {
                let cand = make_distractor(&correct, config, &gcfg.distractor_edits, &sites, rng);
                if cand == correct || distractors.contains(&cand) {
                    return None;
                }
                let row = [&p31, &p32, &cand];
                let breaks_inferred = rules_hold(config, row, &inferred).contains(&false);
                let breaks_truth = rules_hold(config, row, &ground_truth).contains(&false);
                (breaks_inferred && breaks_truth).then_some(cand)
            });
            match found {
                Some(d) => distractors.push(d),
                None => continue 'attempt,
            }
        }

        let answer = rng.gen_range(0..OPTION_COUNT);
        let mut options = distractors;
        options.insert(answer, correct);
        let mut matrix: Vec<Panel> = rows.into_iter().flatten().collect();
        matrix.push(p31);
        matrix.push(p32);
        return Ok(Problem {
            config,
            matrix,
            options,
            answer,
            rules: assignment,
        });
    }
    Err(Error::GenerationExhausted {
        attempts: max,
        reason: "problem",
    })
}

/// Problem `index` of the stream defined by `gcfg`.
pub fn generate_indexed(gcfg: &GeneratorConfig, index: u64) -> Result<Problem> {
    generate_problem(gcfg, &mut problem_rng(gcfg.seed, index))
}

/// `count` problems; identical configs give identical datasets.
pub fn generate_dataset(gcfg: &GeneratorConfig, count: usize) -> Result<Vec<Problem>> {
    gcfg.validate()?;
    par::map_range(count, |i| generate_indexed(gcfg, i as u64))
        .into_iter()
        .collect()
}

/// Lazy version of [`generate_dataset`].
pub fn problem_stream(gcfg: GeneratorConfig) -> impl Iterator<Item = Result<Problem>> {
    (0u64..).map(move |i| generate_indexed(&gcfg, i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_panel;

    #[test]
    fn center_never_gets_number_rules() {
        let mut rng = problem_rng(1, 0);
        for _ in 0..500 {
            let a = sample_rule_assignment(Configuration::Center, &mut rng);
            assert_eq!(a.len(), 1);
            assert_eq!(a[0].len(), 3);
            assert!(!a[0].contains_key(&AttributeKind::Number));
        }
    }

    #[test]
    fn grid_governs_exactly_one_layout_attribute() {
        let mut rng = problem_rng(2, 0);
        for _ in 0..10_000 {
            let a = sample_rule_assignment(Configuration::Grid2x2, &mut rng);
            let n = a[0].contains_key(&AttributeKind::Number) as u8;
            let p = a[0].contains_key(&AttributeKind::Position) as u8;
            assert_eq!(n + p, 1);
            for (c, rules) in a.iter().enumerate() {
                for r in rules.values() {
                    assert!(crate::model::rule_applicability(Configuration::Grid2x2, c, r.attribute, r.kind).unwrap());
                }
            }
        }
    }

    #[test]
    fn out_component_has_no_color_rule() {
        let mut rng = problem_rng(3, 0);
        for _ in 0..200 {
            let a = sample_rule_assignment(Configuration::OutInGrid, &mut rng);
            assert!(!a[0].contains_key(&AttributeKind::Color));
            assert_eq!(a[1].len(), 4);
        }
    }

    #[test]
    fn progression_row_steps() {
        let rule = RuleInstance::new(AttributeKind::Size, RuleKind::Progression, RuleValue::Step(2)).unwrap();
        let mut rng = problem_rng(4, 0);
        for _ in 0..100 {
            let v = scalar_row(&rule, 0, 5, None, 0, &mut rng, 1000).unwrap();
            assert_eq!(v[1] - v[0], 2);
            assert_eq!(v[2] - v[1], 2);
        }
        // Start index 0 can only give (0, 2, 4).
        let v = scalar_row(&rule, 0, 4, None, 0, &mut rng, 1000).unwrap();
        assert_eq!(v, [0, 2, 4]);
    }

    #[test]
    fn arithmetic_row_in_bounds() {
        let rule = RuleInstance::new(AttributeKind::Color, RuleKind::Arithmetic, RuleValue::Add).unwrap();
        let mut rng = problem_rng(5, 0);
        for _ in 0..200 {
            let v = scalar_row(&rule, 0, 9, None, 0, &mut rng, 1000).unwrap();
            assert_eq!(v[2], v[0] + v[1]);
            assert!(v[2] <= 9);
        }
    }

    #[test]
    fn infeasible_rule_exhausts() {
        // Number progression +2 cannot fit in two slots.
        let rule = RuleInstance::new(AttributeKind::Number, RuleKind::Progression, RuleValue::Step(2)).unwrap();
        let mut rng = problem_rng(6, 0);
        assert!(matches!(
            scalar_row(&rule, 1, 2, None, 0, &mut rng, 50),
            Err(Error::GenerationExhausted { .. })
        ));
    }

    #[test]
    fn generated_problems_are_valid_and_sound() {
        for config in Configuration::ALL {
            let gcfg = GeneratorConfig::new(config, 11);
            for p in generate_dataset(&gcfg, 40).unwrap() {
                assert_eq!(p.matrix.len(), 8);
                assert_eq!(p.options.len(), 8);
                for panel in p.panels() {
                    assert!(validate_panel(panel, config).is_empty(), "{config}: {panel:?}");
                }
                let gt = ground_truth_list(&p.rules);
                for r in 0..2 {
                    assert!(rules_hold(config, p.row(r), &gt).into_iter().all(|b| b));
                }
                let hits: Vec<usize> = (0..8)
                    .filter(|&k| rules_hold(config, p.completed_row(k), &gt).into_iter().all(|b| b))
                    .collect();
                assert_eq!(hits, vec![p.answer]);
                assert!(!p.has_duplicate_options());
                assert_eq!(oracle::solve_symbolic(&p).unwrap(), p.answer);
            }
        }
    }

    #[test]
    fn grid_number_matches_occupancy() {
        let gcfg = GeneratorConfig::new(Configuration::Grid3x3, 12);
        for p in generate_dataset(&gcfg, 30).unwrap() {
            for panel in p.panels() {
                let cp = &panel.components[0];
                assert_eq!(cp.number(), cp.entities.len());
            }
        }
    }

    #[test]
    fn distribute_three_shares_values_across_rows() {
        let gcfg = GeneratorConfig::new(Configuration::Center, 13);
        let mut seen = 0;
        for p in generate_dataset(&gcfg, 60).unwrap() {
            if let Some(rule) = p.rules[0].get(&AttributeKind::Color) {
                if rule.kind == RuleKind::DistributeThree {
                    let set = |r: [&Panel; 3]| {
                        let mut v: Vec<u8> = r.iter().map(|p| p.components[0].entities[&0].color_idx).collect();
                        v.sort();
                        v
                    };
                    assert_eq!(set(p.row(0)), set(p.row(1)));
                    assert_eq!(set(p.row(0)), set(p.completed_row(p.answer)));
                    assert_ne!(p.row(0)[0].components[0], p.row(1)[0].components[0]);
                    seen += 1;
                }
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn deterministic_and_index_independent() {
        let gcfg = GeneratorConfig::new(Configuration::LeftRight, 7);
        let a = generate_dataset(&gcfg, 10).unwrap();
        let b = generate_dataset(&gcfg, 10).unwrap();
        assert_eq!(a, b);
        assert_eq!(generate_indexed(&gcfg, 4).unwrap(), a[4]);
        let streamed: Vec<Problem> = problem_stream(gcfg).take(3).map(|p| p.unwrap()).collect();
        assert_eq!(&streamed[..], &a[..3]);
    }

    #[test]
    fn config_validation() {
        let mut g = GeneratorConfig::new(Configuration::Center, 0);
        g.distractor_edits = 0..=2;
        assert!(g.validate().is_err());
        g.distractor_edits = 1..=4;
        assert!(g.validate().is_err());
        g.distractor_edits = 1..=3;
        g.max_rejections = 0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn forcing_fixes_the_rule() {
        let mut rng = problem_rng(8, 0);
        let gcfg = GeneratorConfig::new(Configuration::Grid2x2, 0);
        for _ in 0..20 {
            let p = generate_problem_forcing(
                &gcfg,
                &mut rng,
                Some((0, AttributeKind::Position, RuleKind::Arithmetic)),
            )
            .unwrap();
            assert_eq!(p.rules[0][&AttributeKind::Position].kind, RuleKind::Arithmetic);
        }
    }
}
