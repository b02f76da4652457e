//! Discrete action spaces of the four agents and the joint configuration space.
//!
//! Strategy ids are contiguous within a component. A joint configuration is
//! encoded as a mixed-radix integer with AUG as the most significant digit,
//! followed by OPT, LRS and LOSS.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const DEFAULT_CATALOG: &str = include_str!("../data/catalog.json");

pub type ActionId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Component {
    #[serde(rename = "AUG")]
    Aug,
    #[serde(rename = "OPT")]
    Opt,
    #[serde(rename = "LRS")]
    Lrs,
    #[serde(rename = "LOSS")]
    Loss,
}

impl Component {
    pub const ALL: [Component; 4] = [Component::Aug, Component::Opt, Component::Lrs, Component::Loss];

    pub fn index(self) -> usize {
        match self {
            Component::Aug => 0,
            Component::Opt => 1,
            Component::Lrs => 2,
            Component::Loss => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Component::Aug => "AUG",
            Component::Opt => "OPT",
            Component::Lrs => "LRS",
            Component::Loss => "LOSS",
        }
    }

    /// Lower-case field name used in wire formats (`aug`, `opt`, ...).
    pub fn key(self) -> &'static str {
        match self {
            Component::Aug => "aug",
            Component::Opt => "opt",
            Component::Lrs => "lrs",
            Component::Loss => "loss",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "AUG" => Ok(Component::Aug),
            "OPT" => Ok(Component::Opt),
            "LRS" => Ok(Component::Lrs),
            "LOSS" => Ok(Component::Loss),
            _ => Err(Error::InvalidInput(format!("unknown component `{s}`"))),
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyDescriptor {
    pub id: ActionId,
    pub name: String,
    pub component: Component,
    pub cost: f64,
}

/// The ordered strategies available to one agent.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSpace {
    component: Component,
    strategies: Vec<StrategyDescriptor>,
}

impl ActionSpace {
    /// Builds a space from `(name, cost)` pairs; ids are assigned in order.
    pub fn new(component: Component, entries: &[(&str, f64)]) -> Result<Self> {
        let strategies = entries
            .iter()
            .enumerate()
            .map(|(id, (name, cost))| StrategyDescriptor {
                id,
                name: (*name).to_string(),
                component,
                cost: *cost,
            })
            .collect();
        Self::from_descriptors(component, strategies)
    }

    fn from_descriptors(component: Component, strategies: Vec<StrategyDescriptor>) -> Result<Self> {
        if strategies.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "{component} space needs at least 2 strategies, got {}",
                strategies.len()
            )));
        }
        for (i, s) in strategies.iter().enumerate() {
            if s.id != i || s.component != component {
                return Err(Error::InvalidInput(format!("{component} strategy `{}` has a bad id", s.name)));
            }
            if !(s.cost.is_finite() && s.cost >= 0.0) {
                return Err(Error::InvalidInput(format!("strategy `{}` has negative cost", s.name)));
            }
            if strategies[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::InvalidInput(format!("duplicate {component} strategy `{}`", s.name)));
            }
        }
        Ok(Self { component, strategies })
    }

    pub fn component(&self) -> Component {
        self.component
    }

    pub fn size(&self) -> usize {
        self.strategies.len()
    }

    pub fn strategies(&self) -> &[StrategyDescriptor] {
        &self.strategies
    }

    pub fn get(&self, id: ActionId) -> Option<&StrategyDescriptor> {
        self.strategies.get(id)
    }

    pub fn name(&self, id: ActionId) -> &str {
        &self.strategies[id].name
    }

    pub fn find(&self, name: &str) -> Option<ActionId> {
        self.strategies.iter().position(|s| s.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.find(name).is_some()
    }
}

/// One strategy id per component: the configuration applied for a decision interval.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JointConfig {
    pub aug: ActionId,
    pub opt: ActionId,
    pub lrs: ActionId,
    pub loss: ActionId,
}

impl JointConfig {
    pub fn new(aug: ActionId, opt: ActionId, lrs: ActionId, loss: ActionId) -> Self {
        Self { aug, opt, lrs, loss }
    }

    pub fn from_array(ids: [ActionId; 4]) -> Self {
        Self::new(ids[0], ids[1], ids[2], ids[3])
    }

    pub fn as_array(&self) -> [ActionId; 4] {
        [self.aug, self.opt, self.lrs, self.loss]
    }

    pub fn get(&self, component: Component) -> ActionId {
        self.as_array()[component.index()]
    }

    pub fn set(&mut self, component: Component, id: ActionId) {
        match component {
            Component::Aug => self.aug = id,
            Component::Opt => self.opt = id,
            Component::Lrs => self.lrs = id,
            Component::Loss => self.loss = id,
        }
    }
}

/// Product of the space sizes.
pub fn joint_space_size(spaces: &[ActionSpace]) -> Result<usize> {
    if spaces.is_empty() {
        return Err(Error::Usage("joint_space_size needs at least one action space".into()));
    }
    Ok(spaces.iter().map(ActionSpace::size).product())
}

#[derive(Serialize, Deserialize)]
struct CatalogEntry {
    component: Component,
    name: String,
    cost: f64,
}

/// The four action spaces, in component order.
#[derive(Clone, Debug, PartialEq)]
pub struct Catalog {
    spaces: [ActionSpace; 4],
}

impl Catalog {
    pub fn new(spaces: [ActionSpace; 4]) -> Result<Self> {
        for (c, s) in Component::ALL.iter().zip(spaces.iter()) {
            if s.component() != *c {
                return Err(Error::InvalidInput(format!(
                    "space for {c} found in slot for {}",
                    s.component()
                )));
            }
        }
        Ok(Self { spaces })
    }

    /// Parses the JSON catalog format: a list of `{component, name, cost}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<CatalogEntry> = serde_json::from_str(text)?;
        let mut grouped: [Vec<StrategyDescriptor>; 4] = Default::default();
        for e in entries {
            let slot = &mut grouped[e.component.index()];
            slot.push(StrategyDescriptor {
                id: slot.len(),
                name: e.name,
                component: e.component,
                cost: e.cost,
            });
        }
        let [a, o, l, s] = grouped;
        Self::new([
            ActionSpace::from_descriptors(Component::Aug, a)?,
            ActionSpace::from_descriptors(Component::Opt, o)?,
            ActionSpace::from_descriptors(Component::Lrs, l)?,
            ActionSpace::from_descriptors(Component::Loss, s)?,
        ])
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let entries: Vec<CatalogEntry> = self
            .spaces
            .iter()
            .flat_map(|s| s.strategies())
            .map(|s| CatalogEntry {
                component: s.component,
                name: s.name.clone(),
                cost: s.cost,
            })
            .collect();
        serde_json::to_string(&entries).expect("catalog entries serialize")
    }

    /// Hex SHA-256 of the compact JSON form; peers compare it during the bridge handshake.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn spaces(&self) -> &[ActionSpace; 4] {
        &self.spaces
    }

    pub fn space(&self, component: Component) -> &ActionSpace {
        &self.spaces[component.index()]
    }

    pub fn sizes(&self) -> [usize; 4] {
        [
            self.spaces[0].size(),
            self.spaces[1].size(),
            self.spaces[2].size(),
            self.spaces[3].size(),
        ]
    }

    pub fn joint_size(&self) -> usize {
        self.sizes().iter().product()
    }

    pub fn validate(&self, c: &JointConfig) -> Result<()> {
        for (component, id) in Component::ALL.iter().zip(c.as_array()) {
            let size = self.space(*component).size();
            if id >= size {
                return Err(Error::OutOfRange { index: id, size });
            }
        }
        Ok(())
    }

    pub fn config_to_index(&self, c: &JointConfig) -> Result<usize> {
        self.validate(c)?;
        let sizes = self.sizes();
        Ok(c.as_array()
            .iter()
            .zip(sizes.iter())
            .fold(0, |acc, (id, radix)| acc * radix + id))
    }

    pub fn index_to_config(&self, index: usize) -> Result<JointConfig> {
        let size = self.joint_size();
        if index >= size {
            return Err(Error::OutOfRange { index, size });
        }
        let sizes = self.sizes();
        let mut ids = [0; 4];
        let mut rest = index;
        for k in (0..4).rev() {
            ids[k] = rest % sizes[k];
            rest /= sizes[k];
        }
        Ok(JointConfig::from_array(ids))
    }

    /// All joint configurations in index order.
    pub fn enumerate(&self) -> impl Iterator<Item = JointConfig> + '_ {
        (0..self.joint_size()).map(|i| self.index_to_config(i).expect("index in range"))
    }

    pub fn config_from_names(&self, names: [&str; 4]) -> Result<JointConfig> {
        let mut ids = [0; 4];
        for (k, component) in Component::ALL.iter().enumerate() {
            ids[k] = self.space(*component).find(names[k]).ok_or_else(|| {
                Error::InvalidInput(format!("unknown {component} strategy `{}`", names[k]))
            })?;
        }
        Ok(JointConfig::from_array(ids))
    }

    pub fn names(&self, c: &JointConfig) -> [&str; 4] {
        let ids = c.as_array();
        [
            self.spaces[0].name(ids[0]),
            self.spaces[1].name(ids[1]),
            self.spaces[2].name(ids[2]),
            self.spaces[3].name(ids[3]),
        ]
    }

    /// Sum of the per-strategy costs of a configuration.
    pub fn cost(&self, c: &JointConfig) -> f64 {
        Component::ALL
            .iter()
            .map(|k| self.space(*k).strategies()[c.get(*k)].cost)
            .sum()
    }
}

impl Default for Catalog {
    fn default() -> Self {
        build_default_catalog()
    }
}

/// The shipped five/five/six/five strategy catalog with default costs.
pub fn build_default_catalog() -> Catalog {
    Catalog::from_json(DEFAULT_CATALOG).expect("embedded catalog is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(space: &ActionSpace) -> Vec<&str> {
        space.strategies().iter().map(|s| s.name.as_str()).collect()
    }

    #[test]
    fn default_catalog_contents() {
        let cat = build_default_catalog();
        assert_eq!(names(cat.space(Component::Aug)), ["Basic", "CutMix", "MixUp", "RandAugment", "FastAA"]);
        assert_eq!(names(cat.space(Component::Opt)), ["SGD", "Adam", "AdamW", "RAdam", "LARS"]);
        assert_eq!(
            names(cat.space(Component::Lrs)),
            ["Step", "MultiStep", "Cosine", "OneCycle", "Linear", "WarmUp"]
        );
        assert_eq!(names(cat.space(Component::Loss)), ["BCE", "Focal", "ASL", "MSE", "CB"]);
        assert!(cat.space(Component::Aug).contains("CutMix"));
        assert!(cat.space(Component::Loss).contains("CB"));
        assert!(cat.spaces().iter().all(|s| s.size() >= 2));
    }

    #[test]
    fn joint_size() {
        let cat = build_default_catalog();
        assert_eq!(joint_space_size(cat.spaces()).unwrap(), 750);
        assert_eq!(cat.joint_size(), 750);
        let two = ActionSpace::new(Component::Aug, &[("a", 0.0), ("b", 0.0)]).unwrap();
        assert_eq!(joint_space_size(&[two.clone(), two]).unwrap(), 4);
        assert!(matches!(joint_space_size(&[]), Err(Error::Usage(_))));
    }

    #[test]
    fn single_strategy_space_rejected() {
        assert!(ActionSpace::new(Component::Aug, &[("only", 0.0)]).is_err());
        assert!(ActionSpace::new(Component::Aug, &[("a", 0.0), ("a", 0.1)]).is_err());
        assert!(ActionSpace::new(Component::Aug, &[("a", 0.0), ("b", -0.1)]).is_err());
    }

    #[test]
    fn mixed_radix_encoding() {
        let cat = build_default_catalog();
        assert_eq!(cat.config_to_index(&JointConfig::new(0, 0, 0, 0)).unwrap(), 0);
        assert_eq!(cat.index_to_config(749).unwrap(), JointConfig::new(4, 4, 5, 4));
        assert_eq!(cat.config_to_index(&JointConfig::new(0, 0, 0, 1)).unwrap(), 1);
        assert_eq!(cat.config_to_index(&JointConfig::new(1, 0, 0, 0)).unwrap(), 150);
        assert!(cat.index_to_config(750).is_err());
        assert!(cat.config_to_index(&JointConfig::new(5, 0, 0, 0)).is_err());
    }

    #[test]
    fn exhaustive_round_trip() {
        let cat = build_default_catalog();
        // Independent enumeration: nested loops in component order.
        let mut expected = Vec::new();
        for a in 0..5 {
            for o in 0..5 {
                for l in 0..6 {
                    for s in 0..5 {
                        expected.push(JointConfig::new(a, o, l, s));
                    }
                }
            }
        }
        assert_eq!(expected.len(), 750);
        for (i, c) in expected.iter().enumerate() {
            assert_eq!(cat.index_to_config(i).unwrap(), *c);
            assert_eq!(cat.config_to_index(c).unwrap(), i);
        }
    }

    #[test]
    fn json_round_trip_and_digest() {
        let cat = build_default_catalog();
        let again = Catalog::from_json(&cat.to_json()).unwrap();
        assert_eq!(cat, again);
        assert_eq!(cat.digest(), again.digest());
        assert_eq!(cat.digest().len(), 64);
    }

    #[test]
    fn default_costs() {
        let cat = build_default_catalog();
        let c = cat.config_from_names(["CutMix", "AdamW", "OneCycle", "CB"]).unwrap();
        assert!((cat.cost(&c) - 0.35).abs() < 1e-12);
        let zero = cat.config_from_names(["Basic", "SGD", "Step", "BCE"]).unwrap();
        assert_eq!(cat.cost(&zero), 0.0);
    }
}
