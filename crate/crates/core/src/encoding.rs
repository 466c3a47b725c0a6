//! Panels <-> multihot vectors.
//!
//! Single-slot components are one 21-wide `[type | size | color]` block.
//! Grid components list their slots row-major, each as an occupancy bit
//! followed by a 21-wide entity block (all zeros when the slot is empty).
//! Out components keep their color block with the frozen index 0.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::model::{
    validate_panel, AttributeKind, ComponentPanel, ComponentRole, Configuration, Entity, Panel, COLOR_COUNT,
    SIZE_COUNT, TYPE_COUNT,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKind {
    Occupancy,
    OneHot(AttributeKind),
}

/// One group of the multihot: either an occupancy bit or a one-hot block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Group {
    pub component: usize,
    pub slot: u8,
    pub kind: GroupKind,
    pub offset: usize,
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultihotLayout {
    pub config: Configuration,
    pub groups: Vec<Group>,
    pub dim: usize,
}

impl MultihotLayout {
    fn build(config: Configuration) -> Self {
        let mut groups = Vec::new();
        let mut offset = 0;
        for (c, spec) in config.components().iter().enumerate() {
            for slot in 0..spec.slot_count() as u8 {
                if spec.role == ComponentRole::Grid {
                    groups.push(Group {
                        component: c,
                        slot,
                        kind: GroupKind::Occupancy,
                        offset,
                        width: 1,
                    });
                    offset += 1;
                }
                for (attr, width) in [
                    (AttributeKind::Type, TYPE_COUNT),
                    (AttributeKind::Size, SIZE_COUNT),
                    (AttributeKind::Color, COLOR_COUNT),
                ] {
                    groups.push(Group {
                        component: c,
                        slot,
                        kind: GroupKind::OneHot(attr),
                        offset,
                        width,
                    });
                    offset += width;
                }
            }
        }
        MultihotLayout {
            config,
            groups,
            dim: offset,
        }
    }

    pub fn for_config(config: Configuration) -> &'static MultihotLayout {
        static LAYOUTS: OnceLock<Vec<MultihotLayout>> = OnceLock::new();
        let all = LAYOUTS.get_or_init(|| Configuration::ALL.iter().map(|&c| Self::build(c)).collect());
        &all[config as usize]
    }

    pub fn has_occupancy(&self, component: usize) -> bool {
        self.groups
            .iter()
            .any(|g| g.component == component && g.kind == GroupKind::Occupancy)
    }

    pub fn one_hot_groups(&self) -> impl Iterator<Item = &Group> {
        self.groups.iter().filter(|g| matches!(g.kind, GroupKind::OneHot(_)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Multihot {
    pub values: Vec<f64>,
    pub config: Configuration,
}

impl Multihot {
    pub fn layout(&self) -> &'static MultihotLayout {
        MultihotLayout::for_config(self.config)
    }
}

pub fn multihot_dim(config: Configuration) -> usize {
    MultihotLayout::for_config(config).dim
}

pub fn encode(panel: &Panel, config: Configuration) -> Result<Multihot> {
    let violations = validate_panel(panel, config);
    if !violations.is_empty() {
        return Err(Error::InvalidPanel(format!("{violations:?}")));
    }
    Ok(Multihot {
        values: encode_unchecked(panel, config),
        config,
    })
}

/// Encoding of a panel already known to be valid.
pub fn encode_unchecked(panel: &Panel, config: Configuration) -> Vec<f64> {
    let layout = MultihotLayout::for_config(config);
    let mut v = vec![0.0; layout.dim];
    for g in &layout.groups {
        let Some(e) = panel.components[g.component].entities.get(&g.slot) else {
            continue;
        };
        match g.kind {
            GroupKind::Occupancy => v[g.offset] = 1.0,
            GroupKind::OneHot(attr) => v[g.offset + e.get(attr) as usize] = 1.0,
        }
    }
    v
}

fn argmax_lowest(xs: &[f64]) -> usize {
    crate::oracle::argmax_first(xs)
}

/// Read a panel back from a multihot-shaped vector of reals: argmax per block
/// (lowest index on ties), occupancy bits thresholded at 0.5. A grid left with
/// no occupied slot keeps its strongest slot so the result is always valid.
pub fn decode(values: &[f64], config: Configuration) -> Result<Panel> {
    let layout = MultihotLayout::for_config(config);
    if values.len() != layout.dim {
        return Err(Error::DimensionMismatch {
            expected: layout.dim,
            found: values.len(),
        });
    }
    let mut components = Vec::with_capacity(config.components().len());
    let mut groups = layout.groups.iter().peekable();
    for (c, spec) in config.components().iter().enumerate() {
        let mut entities = Vec::new();
        let mut best_slot = (0u8, f64::NEG_INFINITY);
        let mut slot_entities = Vec::new();
        for slot in 0..spec.slot_count() as u8 {
            let mut occupied = true;
            let mut e = Entity::default();
            while let Some(g) = groups.next_if(|g| g.component == c && g.slot == slot) {
                let block = &values[g.offset..g.offset + g.width];
                match g.kind {
                    GroupKind::Occupancy => {
                        occupied = block[0] > 0.5;
                        if block[0] > best_slot.1 {
                            best_slot = (slot, block[0]);
                        }
                    }
                    GroupKind::OneHot(attr) => e.set(attr, argmax_lowest(block) as u8),
                }
            }
            if spec.role == ComponentRole::Out {
                e.color_idx = 0;
            }
            slot_entities.push(e);
            if occupied {
                entities.push((slot, e));
            }
        }
        if entities.is_empty() {
            let s = best_slot.0;
            entities.push((s, slot_entities[s as usize]));
        }
        components.push(ComponentPanel::from_entities(entities));
    }
    Ok(Panel::new(components))
}

/// Blocks of `values` that decode to the same class as in `target`. Occupancy
/// bits count as blocks; entity blocks of empty target slots are skipped.
pub fn block_agreement(values: &[f64], target: &[f64], config: Configuration) -> (usize, usize) {
    let layout = MultihotLayout::for_config(config);
    let mut hits = 0;
    let mut total = 0;
    let mut slot_occupied = true;
    for g in &layout.groups {
        let t = &target[g.offset..g.offset + g.width];
        let p = &values[g.offset..g.offset + g.width];
        match g.kind {
            GroupKind::Occupancy => {
                slot_occupied = t[0] > 0.5;
                total += 1;
                hits += ((p[0] > 0.5) == slot_occupied) as usize;
            }
            GroupKind::OneHot(_) => {
                if !layout.has_occupancy(g.component) {
                    slot_occupied = true;
                }
                if slot_occupied {
                    total += 1;
                    hits += (argmax_lowest(p) == argmax_lowest(t)) as usize;
                }
            }
        }
    }
    (hits, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{generate_dataset, GeneratorConfig};

    #[test]
    fn dims() {
        let expected = [21, 42, 42, 42, 88, 198, 109];
        for (c, e) in Configuration::ALL.into_iter().zip(expected) {
            assert_eq!(multihot_dim(c), e, "{c}");
        }
    }

    #[test]
    fn center_positions() {
        let p = Panel::new(vec![ComponentPanel::single(Entity::new(1, 2, 0))]);
        let v = encode(&p, Configuration::Center).unwrap().values;
        let ones: Vec<usize> = v
            .iter()
            .enumerate()
            .filter(|(_, &x)| x == 1.0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(ones, vec![1, 7, 11]);
    }

    #[test]
    fn empty_grid_slot_is_zero() {
        let p = Panel::new(vec![ComponentPanel::from_entities([(1, Entity::new(4, 5, 9))])]);
        let v = encode(&p, Configuration::Grid2x2).unwrap().values;
        assert!(v[0..22].iter().all(|&x| x == 0.0));
        assert_eq!(v[22], 1.0);
        assert_eq!(v[22..44].iter().sum::<f64>(), 4.0);
    }

    #[test]
    fn invalid_panel_rejected() {
        let p = Panel::new(vec![ComponentPanel::single(Entity::new(7, 0, 0))]);
        assert!(matches!(encode(&p, Configuration::Center), Err(Error::InvalidPanel(_))));
    }

    #[test]
    fn decode_uniform_and_mismatch() {
        let p = decode(&[0.0; 21], Configuration::Center).unwrap();
        assert_eq!(p.components[0].entities[&0], Entity::new(0, 0, 0));
        assert!(matches!(
            decode(&[0.0; 20], Configuration::Center),
            Err(Error::DimensionMismatch {
                expected: 21,
                found: 20
            })
        ));
        // All-zero grid still decodes to a valid panel.
        let g = decode(&[0.0; 198], Configuration::Grid3x3).unwrap();
        assert!(validate_panel(&g, Configuration::Grid3x3).is_empty());
    }

    #[test]
    fn decode_logits() {
        let p = Panel::new(vec![ComponentPanel::single(Entity::new(3, 1, 8))]);
        let v: Vec<f64> = encode(&p, Configuration::Center)
            .unwrap()
            .values
            .iter()
            .map(|x| 6.0 * x - 3.0)
            .collect();
        assert_eq!(decode(&v, Configuration::Center).unwrap(), p);
    }

    #[test]
    fn round_trip_generated() {
        for config in Configuration::ALL {
            for prob in generate_dataset(&GeneratorConfig::new(config, 3), 20).unwrap() {
                for p in prob.panels() {
                    let m = encode(p, config).unwrap();
                    assert_eq!(m.values.len(), multihot_dim(config));
                    assert_eq!(&decode(&m.values, config).unwrap(), p);
                    let (hits, total) = block_agreement(&m.values, &m.values, config);
                    assert_eq!(hits, total);
                }
            }
        }
    }

    use proptest::prelude::*;

    fn arb_panel(config: Configuration) -> impl Strategy<Value = Panel> {
        let comps: Vec<_> = config
            .components()
            .iter()
            .map(|spec| {
                let n = spec.slot_count();
                let out = spec.role == ComponentRole::Out;
                proptest::collection::vec((any::<bool>(), 0u8..5, 0u8..6, 0u8..10), n).prop_map(move |slots| {
                    let mut es: Vec<(u8, Entity)> = slots
                        .iter()
                        .enumerate()
                        .filter(|(_, s)| s.0)
                        .map(|(i, &(_, t, z, c))| (i as u8, Entity::new(t, z, if out { 0 } else { c })))
                        .collect();
                    if es.is_empty() || n == 1 {
                        let (_, t, z, c) = slots[0];
                        es = vec![(0, Entity::new(t, z, if out { 0 } else { c }))];
                    }
                    ComponentPanel::from_entities(es)
                })
            })
            .collect();
        comps.prop_map(Panel::new)
    }

    proptest! {
        #[test]
        fn round_trip((config, panel) in (0usize..7).prop_flat_map(|ci| {
            let config = Configuration::ALL[ci];
            arb_panel(config).prop_map(move |p| (config, p))
        })) {
            prop_assert!(validate_panel(&panel, config).is_empty());
            let m = encode(&panel, config).unwrap();
            prop_assert_eq!(decode(&m.values, config).unwrap(), panel);
        }
    }
}
