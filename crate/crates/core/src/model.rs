//! Domain vocabulary: configurations, components, attributes, rules, panels
//! and problems, plus the table of which rules exist where.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Number of entity types (triangle, square, pentagon, hexagon, circle).
pub const TYPE_COUNT: usize = 5;
pub const SIZE_COUNT: usize = 6;
pub const COLOR_COUNT: usize = 10;
/// Width of the per-entity one-hot block: type + size + color.
pub const ENTITY_BLOCK: usize = TYPE_COUNT + SIZE_COUNT + COLOR_COUNT;

/// Matrix panels per problem (rows 1-2 plus the first two cells of row 3).
pub const MATRIX_PANELS: usize = 8;
pub const OPTION_COUNT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Type,
    Size,
    Color,
    Number,
    Position,
}

impl AttributeKind {
    pub const ALL: [AttributeKind; 5] = [
        AttributeKind::Type,
        AttributeKind::Size,
        AttributeKind::Color,
        AttributeKind::Number,
        AttributeKind::Position,
    ];
    pub const ENTITY: [AttributeKind; 3] = [AttributeKind::Type, AttributeKind::Size, AttributeKind::Color];

    /// Domain size for entity-level attributes; `None` for Number/Position,
    /// whose domain depends on the layout.
    pub fn entity_domain(self) -> Option<usize> {
        match self {
            AttributeKind::Type => Some(TYPE_COUNT),
            AttributeKind::Size => Some(SIZE_COUNT),
            AttributeKind::Color => Some(COLOR_COUNT),
            AttributeKind::Number | AttributeKind::Position => None,
        }
    }

    pub fn is_entity_level(self) -> bool {
        self.entity_domain().is_some()
    }

    pub fn short_name(self) -> &'static str {
        match self {
            AttributeKind::Type => "Typ",
            AttributeKind::Size => "Siz",
            AttributeKind::Color => "Col",
            AttributeKind::Number => "Num",
            AttributeKind::Position => "Pos",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttributeKind::Type => "type",
            AttributeKind::Size => "size",
            AttributeKind::Color => "color",
            AttributeKind::Number => "number",
            AttributeKind::Position => "position",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Constant,
    DistributeThree,
    Progression,
    Arithmetic,
}

impl RuleKind {
    /// Fixed check order. Search stops at the first kind that fires, so this
    /// order carries meaning.
    pub const ORDER: [RuleKind; 4] = [
        RuleKind::Constant,
        RuleKind::DistributeThree,
        RuleKind::Progression,
        RuleKind::Arithmetic,
    ];

    /// Classes of the matching rule-net label scheme (class 0 = not followed).
    pub fn class_count(self) -> usize {
        match self {
            RuleKind::Constant | RuleKind::DistributeThree => 2,
            RuleKind::Progression => 5,
            RuleKind::Arithmetic => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::Constant => "constant",
            RuleKind::DistributeThree => "distribute_three",
            RuleKind::Progression => "progression",
            RuleKind::Arithmetic => "arithmetic",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            RuleKind::Constant => "Constant",
            RuleKind::DistributeThree => "Distri Three",
            RuleKind::Progression => "Progression",
            RuleKind::Arithmetic => "Arithmetic",
        }
    }
}

/// Progression steps in class order: class 1..=4 maps to these.
pub const PROGRESSION_STEPS: [i8; 4] = [-2, -1, 1, 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleValue {
    Unit,
    Step(i8),
    Add,
    Sub,
}

impl RuleValue {
    /// Non-zero class index of this value in its kind's label scheme.
    pub fn class_index(self) -> usize {
        match self {
            RuleValue::Unit => 1,
            RuleValue::Step(s) => {
                1 + PROGRESSION_STEPS
                    .iter()
                    .position(|&p| p == s)
                    .expect("validated progression step")
            }
            RuleValue::Add => 1,
            RuleValue::Sub => 2,
        }
    }

    /// Inverse of [`RuleValue::class_index`]; `None` for class 0 or out of range.
    pub fn from_class(kind: RuleKind, class: usize) -> Option<RuleValue> {
        match (kind, class) {
            (_, 0) => None,
            (RuleKind::Constant | RuleKind::DistributeThree, 1) => Some(RuleValue::Unit),
            (RuleKind::Progression, c @ 1..=4) => Some(RuleValue::Step(PROGRESSION_STEPS[c - 1])),
            (RuleKind::Arithmetic, 1) => Some(RuleValue::Add),
            (RuleKind::Arithmetic, 2) => Some(RuleValue::Sub),
            _ => None,
        }
    }

    fn legal_for(self, kind: RuleKind) -> bool {
        match (kind, self) {
            (RuleKind::Constant | RuleKind::DistributeThree, RuleValue::Unit) => true,
            (RuleKind::Progression, RuleValue::Step(s)) => PROGRESSION_STEPS.contains(&s),
            (RuleKind::Arithmetic, RuleValue::Add | RuleValue::Sub) => true,
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleInstance {
    pub attribute: AttributeKind,
    pub kind: RuleKind,
    pub value: RuleValue,
}

impl RuleInstance {
    pub fn new(attribute: AttributeKind, kind: RuleKind, value: RuleValue) -> Result<Self> {
        if !value.legal_for(kind) {
            return Err(Error::InvalidRuleValue {
                kind,
                detail: format!("{value:?}"),
            });
        }
        Ok(RuleInstance { attribute, kind, value })
    }

    pub fn unit(attribute: AttributeKind, kind: RuleKind) -> Self {
        Self::new(attribute, kind, RuleValue::Unit).expect("unit rule kind")
    }
}

impl fmt::Display for RuleInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value {
            RuleValue::Unit => write!(f, "({}, {})", self.attribute.as_str(), self.kind.as_str()),
            RuleValue::Step(s) => write!(f, "({}, {}, {s:+})", self.attribute.as_str(), self.kind.as_str()),
            RuleValue::Add => write!(f, "({}, {}, add)", self.attribute.as_str(), self.kind.as_str()),
            RuleValue::Sub => write!(f, "({}, {}, sub)", self.attribute.as_str(), self.kind.as_str()),
        }
    }
}

/// What a component is, which decides both its rule table and how it is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComponentRole {
    /// One slot holding one entity.
    Single,
    /// The enclosing shape of the Out-In layouts; color is frozen.
    Out,
    /// A grid of slots; Number and Position are rule-governing.
    Grid,
}

/// Axis-aligned region in unit panel coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub cx: f64,
    pub cy: f64,
    pub half_w: f64,
    pub half_h: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComponentSpec {
    pub name: &'static str,
    pub role: ComponentRole,
    pub rows: u8,
    pub cols: u8,
    pub region: Region,
}

impl ComponentSpec {
    pub fn slot_count(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    pub fn is_grid(&self) -> bool {
        self.role == ComponentRole::Grid
    }

    /// Center and half-extent of a slot cell, in unit coordinates.
    pub fn slot_cell(&self, slot: usize) -> (f64, f64, f64) {
        let (rows, cols) = (self.rows as f64, self.cols as f64);
        let r = (slot / self.cols as usize) as f64;
        let c = (slot % self.cols as usize) as f64;
        let cw = 2.0 * self.region.half_w / cols;
        let ch = 2.0 * self.region.half_h / rows;
        let x = self.region.cx - self.region.half_w + cw * (c + 0.5);
        let y = self.region.cy - self.region.half_h + ch * (r + 0.5);
        (x, y, cw.min(ch) / 2.0)
    }
}

const fn region(cx: f64, cy: f64, half_w: f64, half_h: f64) -> Region {
    Region { cx, cy, half_w, half_h }
}

const fn single(name: &'static str, region: Region) -> ComponentSpec {
    ComponentSpec {
        name,
        role: ComponentRole::Single,
        rows: 1,
        cols: 1,
        region,
    }
}

const FULL: Region = region(0.5, 0.5, 0.5, 0.5);

static CENTER: [ComponentSpec; 1] = [single("Center", FULL)];
static LEFT_RIGHT: [ComponentSpec; 2] = [
    single("Left", region(0.25, 0.5, 0.25, 0.5)),
    single("Right", region(0.75, 0.5, 0.25, 0.5)),
];
static UP_DOWN: [ComponentSpec; 2] = [
    single("Up", region(0.5, 0.25, 0.5, 0.25)),
    single("Down", region(0.5, 0.75, 0.5, 0.25)),
];
static OUT_IN_CENTER: [ComponentSpec; 2] = [
    ComponentSpec {
        name: "Out",
        role: ComponentRole::Out,
        rows: 1,
        cols: 1,
        region: FULL,
    },
    single("In", region(0.5, 0.5, 0.165, 0.165)),
];
static GRID_2X2: [ComponentSpec; 1] = [ComponentSpec {
    name: "Grid",
    role: ComponentRole::Grid,
    rows: 2,
    cols: 2,
    region: FULL,
}];
static GRID_3X3: [ComponentSpec; 1] = [ComponentSpec {
    name: "Grid",
    role: ComponentRole::Grid,
    rows: 3,
    cols: 3,
    region: FULL,
}];
static OUT_IN_GRID: [ComponentSpec; 2] = [
    ComponentSpec {
        name: "Out",
        role: ComponentRole::Out,
        rows: 1,
        cols: 1,
        region: FULL,
    },
    ComponentSpec {
        name: "In Grid",
        role: ComponentRole::Grid,
        rows: 2,
        cols: 2,
        region: region(0.5, 0.5, 0.33, 0.33),
    },
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Configuration {
    Center,
    LeftRight,
    UpDown,
    OutInCenter,
    Grid2x2,
    Grid3x3,
    OutInGrid,
}

impl Configuration {
    pub const ALL: [Configuration; 7] = [
        Configuration::Center,
        Configuration::LeftRight,
        Configuration::UpDown,
        Configuration::OutInCenter,
        Configuration::Grid2x2,
        Configuration::Grid3x3,
        Configuration::OutInGrid,
    ];

    pub fn components(self) -> &'static [ComponentSpec] {
        match self {
            Configuration::Center => &CENTER,
            Configuration::LeftRight => &LEFT_RIGHT,
            Configuration::UpDown => &UP_DOWN,
            Configuration::OutInCenter => &OUT_IN_CENTER,
            Configuration::Grid2x2 => &GRID_2X2,
            Configuration::Grid3x3 => &GRID_3X3,
            Configuration::OutInGrid => &OUT_IN_GRID,
        }
    }

    pub fn component(self, index: usize) -> Result<&'static ComponentSpec> {
        self.components().get(index).ok_or(Error::InvalidComponent {
            config: self,
            component: index,
        })
    }

    /// Machine name used on the command line and in files.
    pub fn name(self) -> &'static str {
        match self {
            Configuration::Center => "center",
            Configuration::LeftRight => "left_right",
            Configuration::UpDown => "up_down",
            Configuration::OutInCenter => "out_in_center",
            Configuration::Grid2x2 => "grid_2x2",
            Configuration::Grid3x3 => "grid_3x3",
            Configuration::OutInGrid => "out_in_grid",
        }
    }

    /// Column heading used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Configuration::Center => "Center",
            Configuration::LeftRight => "Left-Right",
            Configuration::UpDown => "Up-Down",
            Configuration::OutInCenter => "Out-In Center",
            Configuration::Grid2x2 => "2x2 Grid",
            Configuration::Grid3x3 => "3x3 Grid",
            Configuration::OutInGrid => "Out-In Grid",
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        let config = match norm.as_str() {
            "center" => Configuration::Center,
            "leftright" | "lr" => Configuration::LeftRight,
            "updown" | "ud" => Configuration::UpDown,
            "outincenter" | "oic" => Configuration::OutInCenter,
            "grid2x2" | "2x2grid" | "2x2" => Configuration::Grid2x2,
            "grid3x3" | "3x3grid" | "3x3" => Configuration::Grid3x3,
            "outingrid" | "oig" => Configuration::OutInGrid,
            _ => return Err(Error::Format(format!("unknown configuration '{s}'"))),
        };
        Ok(config)
    }
}

impl Serialize for Configuration {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Configuration {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// Which (attribute, rule) pairs exist for a component. Type never takes
/// Arithmetic, Out components have no Color rules and no Size Arithmetic, and only grid
/// components carry Number/Position rules.
pub fn rule_applicability(
    config: Configuration,
    component: usize,
    attr: AttributeKind,
    kind: RuleKind,
) -> Result<bool> {
    let role = config.component(component)?.role;
    Ok(applicable_for_role(role, attr, kind))
}

pub(crate) fn applicable_for_role(role: ComponentRole, attr: AttributeKind, kind: RuleKind) -> bool {
    use AttributeKind::*;
    match attr {
        Type => kind != RuleKind::Arithmetic,
        Size => role != ComponentRole::Out || kind != RuleKind::Arithmetic,
        Color => role != ComponentRole::Out,
        Number | Position => role == ComponentRole::Grid,
    }
}

/// Attributes with at least one applicable rule, in canonical order.
pub fn governed_attributes(config: Configuration, component: usize) -> Result<Vec<AttributeKind>> {
    let role = config.component(component)?.role;
    Ok(AttributeKind::ALL
        .into_iter()
        .filter(|&a| RuleKind::ORDER.iter().any(|&k| applicable_for_role(role, a, k)))
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Entity {
    pub type_idx: u8,
    pub size_idx: u8,
    pub color_idx: u8,
}

impl Entity {
    pub fn new(type_idx: u8, size_idx: u8, color_idx: u8) -> Self {
        Entity {
            type_idx,
            size_idx,
            color_idx,
        }
    }

    pub fn get(&self, attr: AttributeKind) -> u8 {
        match attr {
            AttributeKind::Type => self.type_idx,
            AttributeKind::Size => self.size_idx,
            AttributeKind::Color => self.color_idx,
            _ => panic!("{attr:?} is not an entity attribute"),
        }
    }

    pub fn set(&mut self, attr: AttributeKind, value: u8) {
        match attr {
            AttributeKind::Type => self.type_idx = value,
            AttributeKind::Size => self.size_idx = value,
            AttributeKind::Color => self.color_idx = value,
            _ => panic!("{attr:?} is not an entity attribute"),
        }
    }

    /// Size index to scaling factor: six values evenly spanning [0.4, 0.9].
    pub fn scale(&self) -> f64 {
        size_scale(self.size_idx)
    }
}

pub fn size_scale(size_idx: u8) -> f64 {
    0.4 + 0.1 * size_idx as f64
}

/// Contents of one component in one panel.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ComponentPanel {
    pub occupancy: BTreeSet<u8>,
    pub entities: BTreeMap<u8, Entity>,
}

impl ComponentPanel {
    pub fn from_entities(entities: impl IntoIterator<Item = (u8, Entity)>) -> Self {
        let entities: BTreeMap<u8, Entity> = entities.into_iter().collect();
        ComponentPanel {
            occupancy: entities.keys().copied().collect(),
            entities,
        }
    }

    pub fn single(entity: Entity) -> Self {
        Self::from_entities([(0, entity)])
    }

    pub fn number(&self) -> usize {
        self.occupancy.len()
    }

    /// Occupancy as a bit mask over slots.
    pub fn position_mask(&self) -> u16 {
        self.occupancy.iter().fold(0u16, |m, &s| m | (1u16 << s))
    }
}

/// Serialized as a list of `[slot, type, size, color]` entries.
impl Serialize for ComponentPanel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<[u8; 4]> = self
            .entities
            .iter()
            .map(|(&slot, e)| [slot, e.type_idx, e.size_idx, e.color_idx])
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComponentPanel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<[u8; 4]>::deserialize(d)?;
        let mut entities = BTreeMap::new();
        for [slot, t, s, c] in rows {
            if entities.insert(slot, Entity::new(t, s, c)).is_some() {
                return Err(de::Error::custom(format!("duplicate slot {slot}")));
            }
        }
        Ok(ComponentPanel {
            occupancy: entities.keys().copied().collect(),
            entities,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Panel {
    pub components: Vec<ComponentPanel>,
}

impl Panel {
    pub fn new(components: Vec<ComponentPanel>) -> Self {
        Panel { components }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    ComponentCount {
        expected: usize,
        found: usize,
    },
    SlotOutOfRange {
        component: usize,
        slot: u8,
    },
    MissingEntity {
        component: usize,
        slot: u8,
    },
    OrphanEntity {
        component: usize,
        slot: u8,
    },
    EmptyComponent {
        component: usize,
    },
    AttributeOutOfRange {
        component: usize,
        slot: u8,
        attribute: AttributeKind,
        value: u8,
    },
    FrozenColor {
        component: usize,
        slot: u8,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Every invariant violation of `panel` under `config`; empty means valid.
pub fn validate_panel(panel: &Panel, config: Configuration) -> Vec<Violation> {
    let specs = config.components();
    let mut out = Vec::new();
    if panel.components.len() != specs.len() {
        out.push(Violation::ComponentCount {
            expected: specs.len(),
            found: panel.components.len(),
        });
    }
    for (ci, (cp, spec)) in panel.components.iter().zip(specs).enumerate() {
        let slots = spec.slot_count();
        if cp.occupancy.is_empty() {
            out.push(Violation::EmptyComponent { component: ci });
        }
        for &slot in &cp.occupancy {
            if slot as usize >= slots {
                out.push(Violation::SlotOutOfRange { component: ci, slot });
            }
            if !cp.entities.contains_key(&slot) {
                out.push(Violation::MissingEntity { component: ci, slot });
            }
        }
        for (&slot, e) in &cp.entities {
            if !cp.occupancy.contains(&slot) {
                out.push(Violation::OrphanEntity { component: ci, slot });
                if slot as usize >= slots {
                    out.push(Violation::SlotOutOfRange { component: ci, slot });
                }
            }
            for attr in AttributeKind::ENTITY {
                let v = e.get(attr);
                if v as usize >= attr.entity_domain().unwrap() {
                    out.push(Violation::AttributeOutOfRange {
                        component: ci,
                        slot,
                        attribute: attr,
                        value: v,
                    });
                }
            }
            if spec.role == ComponentRole::Out && e.color_idx != 0 {
                out.push(Violation::FrozenColor { component: ci, slot });
            }
        }
    }
    out
}

/// Ground-truth rules of one component.
pub type ComponentRules = BTreeMap<AttributeKind, RuleInstance>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub config: Configuration,
    /// Row-major matrix panels; the ninth (bottom-right) cell is missing.
    pub matrix: Vec<Panel>,
    pub options: Vec<Panel>,
    pub answer: usize,
    pub rules: Vec<ComponentRules>,
}

impl Problem {
    /// Complete row `r` (0 or 1) of the matrix.
    pub fn row(&self, r: usize) -> [&Panel; 3] {
        assert!(r < 2, "only rows 0 and 1 are complete");
        [&self.matrix[3 * r], &self.matrix[3 * r + 1], &self.matrix[3 * r + 2]]
    }

    /// Third row completed with `option`.
    pub fn completed_row(&self, option: usize) -> [&Panel; 3] {
        [&self.matrix[6], &self.matrix[7], &self.options[option]]
    }

    /// All 16 panels: matrix first, then options.
    pub fn panels(&self) -> impl Iterator<Item = &Panel> {
        self.matrix.iter().chain(self.options.iter())
    }

    /// True when some option appears twice.
    pub fn has_duplicate_options(&self) -> bool {
        let set: std::collections::HashSet<&Panel> = self.options.iter().collect();
        set.len() != self.options.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use AttributeKind::*;
    use RuleKind::*;

    #[test]
    fn applicability_examples() {
        assert!(!rule_applicability(Configuration::Center, 0, Number, Constant).unwrap());
        assert!(!rule_applicability(Configuration::OutInCenter, 0, Color, Constant).unwrap());
        assert!(rule_applicability(Configuration::Grid2x2, 0, Position, Arithmetic).unwrap());
        assert!(!rule_applicability(Configuration::OutInGrid, 0, Size, Arithmetic).unwrap());
        assert!(rule_applicability(Configuration::OutInGrid, 1, Size, Arithmetic).unwrap());
        assert!(!rule_applicability(Configuration::LeftRight, 1, Type, Arithmetic).unwrap());
    }

    #[test]
    fn applicability_rejects_bad_component() {
        assert!(matches!(
            rule_applicability(Configuration::Center, 1, Type, Constant),
            Err(Error::InvalidComponent { .. })
        ));
    }

    #[test]
    fn applicability_total_and_nonempty() {
        let mut count = 0;
        for config in Configuration::ALL {
            for c in 0..config.components().len() {
                let mut any = false;
                for attr in AttributeKind::ALL {
                    for kind in RuleKind::ORDER {
                        any |= rule_applicability(config, c, attr, kind).unwrap();
                        count += 1;
                    }
                }
                assert!(any, "{config} component {c}");
            }
        }
        assert_eq!(count, 11 * 5 * 4);
    }

    #[test]
    fn net_counts_match_table() {
        // Non-blank cells per column of the F1 table.
        let expected = [
            (Configuration::Center, vec![11]),
            (Configuration::LeftRight, vec![11, 11]),
            (Configuration::UpDown, vec![11, 11]),
            (Configuration::OutInCenter, vec![6, 11]),
            (Configuration::Grid2x2, vec![19]),
            (Configuration::Grid3x3, vec![19]),
            (Configuration::OutInGrid, vec![6, 19]),
        ];
        for (config, counts) in expected {
            for (c, &n) in counts.iter().enumerate() {
                let got = AttributeKind::ALL
                    .iter()
                    .flat_map(|&a| RuleKind::ORDER.iter().map(move |&k| (a, k)))
                    .filter(|&(a, k)| rule_applicability(config, c, a, k).unwrap())
                    .count();
                assert_eq!(got, n, "{config} component {c}");
            }
        }
    }

    #[test]
    fn validate_examples() {
        let ok = Panel::new(vec![ComponentPanel::single(Entity::new(1, 2, 0))]);
        assert!(validate_panel(&ok, Configuration::Center).is_empty());

        let e = Entity::new(0, 0, 0);
        let bad_slot = Panel::new(vec![ComponentPanel::from_entities([(0, e), (5, e)])]);
        assert!(validate_panel(&bad_slot, Configuration::Grid2x2)
            .contains(&Violation::SlotOutOfRange { component: 0, slot: 5 }));

        let mut missing = ComponentPanel::single(e);
        missing.occupancy.insert(1);
        let missing = Panel::new(vec![missing]);
        assert!(validate_panel(&missing, Configuration::Grid2x2)
            .contains(&Violation::MissingEntity { component: 0, slot: 1 }));

        let big = Panel::new(vec![ComponentPanel::single(Entity::new(5, 0, 10))]);
        assert_eq!(validate_panel(&big, Configuration::Center).len(), 2);
    }

    #[test]
    fn rule_value_classes_round_trip() {
        for kind in RuleKind::ORDER {
            for class in 1..kind.class_count() {
                let v = RuleValue::from_class(kind, class).unwrap();
                assert_eq!(v.class_index(), class);
                assert!(RuleInstance::new(Size, kind, v).is_ok());
            }
            assert!(RuleValue::from_class(kind, kind.class_count()).is_none());
        }
        assert!(RuleInstance::new(Size, Progression, RuleValue::Step(3)).is_err());
        assert!(RuleInstance::new(Size, Constant, RuleValue::Add).is_err());
    }

    #[test]
    fn configuration_names_parse() {
        for c in Configuration::ALL {
            assert_eq!(c.name().parse::<Configuration>().unwrap(), c);
            assert_eq!(c.display_name().parse::<Configuration>().unwrap(), c);
        }
        assert!("hexagonal".parse::<Configuration>().is_err());
    }
}
