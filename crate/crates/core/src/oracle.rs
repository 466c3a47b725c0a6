//! Exact rule semantics over symbolic rows.
//!
//! A row is three panels; every rule is evaluated per component. Entity-level
//! attributes (type, size, color) have a scalar value in a panel only when all
//! entities of the component agree on it. Constant is the exception: it also
//! holds when the occupancy is identical across the row and every slot keeps
//! its own value.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{
    applicable_for_role, AttributeKind, ComponentPanel, ComponentRules, ComponentSpec, Configuration, Panel, Problem,
    RuleInstance, RuleKind, RuleValue, PROGRESSION_STEPS,
};

/// One row of three panels under a configuration.
#[derive(Clone, Copy, Debug)]
pub struct RowTriple<'a> {
    pub panels: [&'a Panel; 3],
    pub config: Configuration,
}

impl<'a> RowTriple<'a> {
    pub fn new(config: Configuration, panels: [&'a Panel; 3]) -> Self {
        RowTriple { panels, config }
    }

    fn component(&self, c: usize) -> [&'a ComponentPanel; 3] {
        self.panels.map(|p| &p.components[c])
    }
}

/// Scalar value of an attribute in one component panel, if it has one.
fn scalar(cp: &ComponentPanel, attr: AttributeKind) -> Option<i32> {
    match attr {
        AttributeKind::Number => Some(cp.number() as i32),
        AttributeKind::Position => Some(cp.position_mask() as i32),
        _ => {
            let mut it = cp.entities.values().map(|e| e.get(attr));
            let first = it.next()?;
            it.all(|v| v == first).then_some(first as i32)
        }
    }
}

fn scalars(cps: [&ComponentPanel; 3], attr: AttributeKind) -> Option<[i32; 3]> {
    Some([scalar(cps[0], attr)?, scalar(cps[1], attr)?, scalar(cps[2], attr)?])
}

/// Cyclic shift of an occupancy mask over `n` row-major slots.
pub fn rotate_mask(mask: u16, step: i8, n: usize) -> u16 {
    let shift = step.rem_euclid(n as i8) as usize;
    (0..n)
        .filter(|&s| mask & (1 << s) != 0)
        .fold(0, |m, s| m | (1 << ((s + shift) % n)))
}

/// Progression class of three occupancy masks over `n` slots (0 if none).
pub fn position_progression_class(masks: [u16; 3], n: usize) -> usize {
    let [a, b, c] = masks;
    PROGRESSION_STEPS
        .iter()
        .position(|&s| rotate_mask(a, s, n) == b && rotate_mask(b, s, n) == c)
        .map_or(0, |i| i + 1)
}

fn constant_label(cps: [&ComponentPanel; 3], attr: AttributeKind) -> bool {
    if let Some([a, b, c]) = scalars(cps, attr) {
        if a == b && b == c {
            return true;
        }
    }
    if !attr.is_entity_level() {
        return false;
    }
    // Per-slot constancy over an unchanged layout.
    cps[0].occupancy == cps[1].occupancy
        && cps[1].occupancy == cps[2].occupancy
        && cps[0].entities.iter().all(|(slot, e)| {
            let v = e.get(attr);
            cps[1].entities[slot].get(attr) == v && cps[2].entities[slot].get(attr) == v
        })
}

fn progression_label(cps: [&ComponentPanel; 3], attr: AttributeKind, slots: usize) -> usize {
    let Some([a, b, c]) = scalars(cps, attr) else {
        return 0;
    };
    if attr == AttributeKind::Position {
        return position_progression_class([a as u16, b as u16, c as u16], slots);
    }
    PROGRESSION_STEPS
        .iter()
        .position(|&s| b - a == s as i32 && c - b == s as i32)
        .map_or(0, |i| i + 1)
}

fn arithmetic_label(cps: [&ComponentPanel; 3], attr: AttributeKind) -> usize {
    let Some([a, b, c]) = scalars(cps, attr) else {
        return 0;
    };
    if attr == AttributeKind::Position {
        // Set arithmetic: union for Add, difference for Sub.
        if c == a | b {
            1
        } else if c == a & !b {
            2
        } else {
            0
        }
    } else if c == a + b {
        1
    } else if c == a - b {
        2
    } else {
        0
    }
}

fn label_component(spec: &ComponentSpec, cps: [&ComponentPanel; 3], attr: AttributeKind, kind: RuleKind) -> usize {
    match kind {
        RuleKind::Constant => constant_label(cps, attr) as usize,
        RuleKind::DistributeThree => match scalars(cps, attr) {
            Some([a, b, c]) => (a != b && b != c && a != c) as usize,
            None => 0,
        },
        RuleKind::Progression => progression_label(cps, attr, spec.slot_count()),
        RuleKind::Arithmetic => arithmetic_label(cps, attr),
    }
}

fn check_applicable(
    config: Configuration,
    component: usize,
    attr: AttributeKind,
    kind: RuleKind,
) -> Result<&'static ComponentSpec> {
    let spec = config.component(component)?;
    if !applicable_for_role(spec.role, attr, kind) {
        return Err(Error::NotApplicable {
            config,
            component,
            attribute: attr,
            kind,
        });
    }
    Ok(spec)
}

/// Class label of a row for one (attribute, rule) net.
///
/// Constant and DistributeThree give 0/1; Progression gives 0..=4 for
/// {none, -2, -1, +1, +2}; Arithmetic gives 0..=2 for {none, add, sub}.
/// When several values hold at once the lowest class wins.
pub fn label_row(row: &RowTriple<'_>, component: usize, attr: AttributeKind, kind: RuleKind) -> Result<usize> {
    let spec = check_applicable(row.config, component, attr, kind)?;
    Ok(label_component(spec, row.component(component), attr, kind))
}

pub fn check_rule(rule: &RuleInstance, component: usize, row: &RowTriple<'_>) -> Result<bool> {
    let label = label_row(row, component, rule.attribute, rule.kind)?;
    Ok(label == rule.value.class_index())
}

/// Applicable (attribute, kind) pairs of a component in search order.
pub fn net_pairs(config: Configuration, component: usize) -> Result<Vec<(AttributeKind, RuleKind)>> {
    let role = config.component(component)?.role;
    Ok(AttributeKind::ALL
        .into_iter()
        .flat_map(|a| RuleKind::ORDER.into_iter().map(move |k| (a, k)))
        .filter(|&(a, k)| applicable_for_role(role, a, k))
        .collect())
}

/// Classes that can occur at all for a net. Progression steps that the
/// domain cannot hold, or that alias an earlier step under cyclic shifts,
/// never appear as labels.
pub fn reachable_classes(
    config: Configuration,
    component: usize,
    attr: AttributeKind,
    kind: RuleKind,
) -> Result<Vec<usize>> {
    let spec = check_applicable(config, component, attr, kind)?;
    if kind != RuleKind::Progression {
        return Ok((0..kind.class_count()).collect());
    }
    let n = spec.slot_count();
    let mut out = vec![0];
    for (i, &step) in PROGRESSION_STEPS.iter().enumerate() {
        let ok = match attr {
            AttributeKind::Position => PROGRESSION_STEPS[..i]
                .iter()
                .all(|&prev| (prev as i32).rem_euclid(n as i32) != (step as i32).rem_euclid(n as i32)),
            AttributeKind::Number => n > 2 * step.unsigned_abs() as usize,
            a => a.entity_domain().unwrap() > 2 * step.unsigned_abs() as usize,
        };
        if ok {
            out.push(i + 1);
        }
    }
    Ok(out)
}

/// Per component, the first rule (in [`RuleKind::ORDER`]) that holds on the row.
pub fn infer_rules(row: &RowTriple<'_>) -> Vec<ComponentRules> {
    (0..row.config.components().len())
        .map(|c| {
            let mut rules = BTreeMap::new();
            for (attr, kind) in net_pairs(row.config, c).expect("valid component") {
                if rules.contains_key(&attr) {
                    continue;
                }
                let label = label_row(row, c, attr, kind).expect("applicable pair");
                if let Some(value) = RuleValue::from_class(kind, label) {
                    rules.insert(
                        attr,
                        RuleInstance {
                            attribute: attr,
                            kind,
                            value,
                        },
                    );
                }
            }
            rules
        })
        .collect()
}

/// A rule found to hold on both example rows of a problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ComponentRule {
    pub component: usize,
    pub rule: RuleInstance,
}

/// Rules shared by two rows: for each attribute, the first kind whose label is
/// non-zero and equal on both rows. This is the search procedure's acceptance
/// test with exact probabilities.
pub fn infer_common_rules(first: &RowTriple<'_>, second: &RowTriple<'_>) -> Vec<ComponentRule> {
    let config = first.config;
    let mut out = Vec::new();
    for c in 0..config.components().len() {
        let mut done: Option<AttributeKind> = None;
        for (attr, kind) in net_pairs(config, c).expect("valid component") {
            if done == Some(attr) {
                continue;
            }
            let l1 = label_row(first, c, attr, kind).expect("applicable pair");
            let l2 = label_row(second, c, attr, kind).expect("applicable pair");
            if l1 != 0 && l1 == l2 {
                let value = RuleValue::from_class(kind, l1).expect("non-zero class");
                out.push(ComponentRule {
                    component: c,
                    rule: RuleInstance {
                        attribute: attr,
                        kind,
                        value,
                    },
                });
                done = Some(attr);
            }
        }
    }
    out
}

/// Rules of rows 1 and 2 of a problem.
pub fn problem_rules(problem: &Problem) -> Vec<ComponentRule> {
    let r1 = RowTriple::new(problem.config, problem.row(0));
    let r2 = RowTriple::new(problem.config, problem.row(1));
    infer_common_rules(&r1, &r2)
}

/// How many of `rules` hold when option `k` completes row 3.
pub fn satisfied_count(problem: &Problem, rules: &[ComponentRule], option: usize) -> usize {
    let row = RowTriple::new(problem.config, problem.completed_row(option));
    rules
        .iter()
        .filter(|r| check_rule(&r.rule, r.component, &row).expect("applicable rule"))
        .count()
}

/// Symbolic solver: infer the rules shared by rows 1 and 2, then pick the
/// option satisfying the most of them (all of them on well-formed input),
/// lowest index on ties.
pub fn solve_symbolic(problem: &Problem) -> Result<usize> {
    let rules = problem_rules(problem);
    if rules.is_empty() {
        return Err(Error::NoConsistentRules);
    }
    let counts: Vec<usize> = (0..problem.options.len())
        .map(|k| satisfied_count(problem, &rules, k))
        .collect();
    Ok(argmax_first(&counts))
}

pub(crate) fn argmax_first<T: PartialOrd + Copy>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Entity;
    use AttributeKind::*;
    use RuleKind::*;

    fn center(t: u8, s: u8, c: u8) -> Panel {
        Panel::new(vec![ComponentPanel::single(Entity::new(t, s, c))])
    }

    fn grid(config_slots: &[u8]) -> Panel {
        let e = Entity::new(0, 0, 0);
        Panel::new(vec![ComponentPanel::from_entities(
            config_slots.iter().map(|&s| (s, e)),
        )])
    }

    fn center_row(vals: [(u8, u8, u8); 3]) -> [Panel; 3] {
        vals.map(|(t, s, c)| center(t, s, c))
    }

    #[test]
    fn check_rule_examples() {
        let p = center_row([(1, 0, 0), (1, 3, 0), (1, 5, 0)]);
        let row = RowTriple::new(Configuration::Center, [&p[0], &p[1], &p[2]]);
        assert!(check_rule(&RuleInstance::unit(Type, Constant), 0, &row).unwrap());

        let g = [grid(&[0, 1]), grid(&[0, 1, 2]), grid(&[0, 1, 2, 3, 4])];
        let row = RowTriple::new(Configuration::Grid3x3, [&g[0], &g[1], &g[2]]);
        let add = RuleInstance::new(Number, Arithmetic, RuleValue::Add).unwrap();
        assert!(check_rule(&add, 0, &row).unwrap());

        let p = center_row([(0, 0, 0), (0, 2, 0), (0, 4, 0)]);
        let row = RowTriple::new(Configuration::Center, [&p[0], &p[1], &p[2]]);
        let plus1 = RuleInstance::new(Size, Progression, RuleValue::Step(1)).unwrap();
        let plus2 = RuleInstance::new(Size, Progression, RuleValue::Step(2)).unwrap();
        assert!(!check_rule(&plus1, 0, &row).unwrap());
        assert!(check_rule(&plus2, 0, &row).unwrap());
    }

    #[test]
    fn check_rule_not_applicable() {
        let p = center_row([(0, 0, 0); 3]);
        let row = RowTriple::new(Configuration::Center, [&p[0], &p[1], &p[2]]);
        let r = RuleInstance::unit(Number, Constant);
        assert!(matches!(check_rule(&r, 0, &row), Err(Error::NotApplicable { .. })));
        assert!(matches!(
            label_row(&row, 0, Type, Arithmetic),
            Err(Error::NotApplicable { .. })
        ));
    }

    #[test]
    fn label_examples() {
        let p = center_row([(0, 3, 0), (0, 2, 0), (0, 1, 0)]);
        let row = RowTriple::new(Configuration::Center, [&p[0], &p[1], &p[2]]);
        // -1 is class 2 in {none, -2, -1, +1, +2}.
        assert_eq!(label_row(&row, 0, Size, Progression).unwrap(), 2);

        let p = center_row([(1, 0, 0), (4, 0, 0), (1, 0, 0)]);
        let row = RowTriple::new(Configuration::Center, [&p[0], &p[1], &p[2]]);
        assert_eq!(label_row(&row, 0, Type, Constant).unwrap(), 0);

        let p = center_row([(0, 0, 4), (0, 0, 1), (0, 0, 3)]);
        let row = RowTriple::new(Configuration::Center, [&p[0], &p[1], &p[2]]);
        assert_eq!(label_row(&row, 0, Color, Arithmetic).unwrap(), 2);
    }

    #[test]
    fn position_set_arithmetic() {
        let g = [grid(&[0, 1]), grid(&[1, 2]), grid(&[0, 1, 2])];
        let row = RowTriple::new(Configuration::Grid2x2, [&g[0], &g[1], &g[2]]);
        assert_eq!(label_row(&row, 0, Position, Arithmetic).unwrap(), 1);
        let g = [grid(&[0, 1, 3]), grid(&[1]), grid(&[0, 3])];
        let row = RowTriple::new(Configuration::Grid2x2, [&g[0], &g[1], &g[2]]);
        assert_eq!(label_row(&row, 0, Position, Arithmetic).unwrap(), 2);
    }

    #[test]
    fn position_progression_rotates() {
        assert_eq!(rotate_mask(0b0001, 1, 4), 0b0010);
        assert_eq!(rotate_mask(0b1000, 1, 4), 0b0001);
        assert_eq!(rotate_mask(0b0001, -1, 4), 0b1000);
        let g = [grid(&[0]), grid(&[1]), grid(&[2])];
        let row = RowTriple::new(Configuration::Grid3x3, [&g[0], &g[1], &g[2]]);
        assert_eq!(label_row(&row, 0, Position, Progression).unwrap(), 3);
    }

    #[test]
    fn constant_row_infers_constant_everywhere() {
        let p = center_row([(2, 3, 4); 3]);
        let row = RowTriple::new(Configuration::Center, [&p[0], &p[1], &p[2]]);
        let rules = infer_rules(&row);
        assert_eq!(rules[0].len(), 3);
        assert!(rules[0].values().all(|r| r.kind == Constant));
    }

    #[test]
    fn distribute_three_inferred() {
        let p = center_row([(2, 3, 1), (2, 3, 7), (2, 3, 4)]);
        let row = RowTriple::new(Configuration::Center, [&p[0], &p[1], &p[2]]);
        assert_eq!(infer_rules(&row)[0][&Color].kind, DistributeThree);
    }

    #[test]
    fn per_slot_constant() {
        let a = Entity::new(0, 1, 2);
        let b = Entity::new(3, 4, 5);
        let p = Panel::new(vec![ComponentPanel::from_entities([(0, a), (3, b)])]);
        let row = RowTriple::new(Configuration::Grid2x2, [&p, &p, &p]);
        for attr in [Type, Size, Color] {
            assert_eq!(label_row(&row, 0, attr, Constant).unwrap(), 1);
            assert_eq!(label_row(&row, 0, attr, DistributeThree).unwrap(), 0);
        }
    }

    #[test]
    fn common_rules_follow_search_acceptance() {
        // Row 1 (1,2,3) is both D3 and progression; row 2 (1,1,2) is only
        // arithmetic. The shared rule is arithmetic add.
        let r1 = center_row([(0, 1, 0), (0, 2, 0), (0, 3, 0)]);
        let r2 = center_row([(0, 1, 0), (0, 1, 0), (0, 2, 0)]);
        let a = RowTriple::new(Configuration::Center, [&r1[0], &r1[1], &r1[2]]);
        let b = RowTriple::new(Configuration::Center, [&r2[0], &r2[1], &r2[2]]);
        let common = infer_common_rules(&a, &b);
        let size = common.iter().find(|r| r.rule.attribute == Size).unwrap();
        assert_eq!(size.rule.kind, Arithmetic);
        assert_eq!(size.rule.value, RuleValue::Add);
    }

    #[test]
    fn reachable_progression_classes() {
        assert_eq!(
            reachable_classes(Configuration::Grid2x2, 0, Position, Progression).unwrap(),
            vec![0, 1, 2, 3]
        );
        assert_eq!(
            reachable_classes(Configuration::Grid2x2, 0, Number, Progression).unwrap(),
            vec![0, 2, 3]
        );
        assert_eq!(
            reachable_classes(Configuration::Grid3x3, 0, Number, Progression).unwrap(),
            vec![0, 1, 2, 3, 4]
        );
        assert_eq!(
            reachable_classes(Configuration::Center, 0, Type, Progression).unwrap(),
            vec![0, 1, 2, 3, 4]
        );
    }

    #[test]
    fn identical_options_tie_break_to_zero() {
        let rows = center_row([(0, 0, 0), (0, 0, 0), (0, 0, 0)]);
        let problem = Problem {
            config: Configuration::Center,
            matrix: (0..8).map(|i| rows[i % 3].clone()).collect(),
            options: vec![center(0, 0, 0); 8],
            answer: 3,
            rules: vec![ComponentRules::new()],
        };
        assert_eq!(solve_symbolic(&problem).unwrap(), 0);
    }
}
