//! Mixed-integer architecture search spaces.
//!
//! A [`SearchSpace`] is an ordered list of integer-grid / choice / boolean
//! parameters plus "layer group" metadata tying a layer-count parameter to
//! its per-layer width parameters. Configurations map affinely onto the unit
//! hypercube for the GP ([`SearchSpace::encode`] / [`SearchSpace::decode`])
//! and serialize to the nested model-config JSON consumed by training
//! pipelines ([`SearchSpace::emit_model_config`]).
//!
//! Width parameters beyond the active layer count stay present in every
//! configuration and in the encoding; they are only truncated away when the
//! model config is emitted. Choice grids are treated as ordinal and mapped to
//! equispaced points, which preserves metric structure for the GP.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    Encoder,
    Decoder,
    LengthPredictor,
    Embedding,
}

impl ParamGroup {
    pub fn section(&self) -> &'static str {
        match self {
            ParamGroup::Encoder => "encoder",
            ParamGroup::Decoder => "decoder",
            ParamGroup::LengthPredictor => "length_predictor",
            ParamGroup::Embedding => "embedding",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterKind {
    IntRange { lo: i64, hi: i64, step: i64 },
    Choice(Vec<i64>),
    Bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub group: ParamGroup,
    pub kind: ParameterKind,
    /// Key used when the parameter is emitted into a model config. Width and
    /// layer-count parameters are consumed by their layer group instead and
    /// leave this `None`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_key: Option<String>,
}

impl ParameterSpec {
    fn check(&self) -> Result<(), SpaceError> {
        match &self.kind {
            ParameterKind::IntRange { lo, hi, step } => {
                if lo > hi || *step <= 0 || (hi - lo) % step != 0 {
                    return Err(SpaceError::InvalidSpec(format!(
                        "parameter `{}`: bad integer range [{lo}, {hi}] step {step}",
                        self.name
                    )));
                }
            }
            ParameterKind::Choice(values) => {
                if values.is_empty() || values.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(SpaceError::InvalidSpec(format!(
                        "parameter `{}`: choice list must be non-empty and strictly increasing",
                        self.name
                    )));
                }
            }
            ParameterKind::Bool => {}
        }
        Ok(())
    }

    /// Number of grid values.
    pub fn grid_len(&self) -> usize {
        match &self.kind {
            ParameterKind::IntRange { lo, hi, step } => ((hi - lo) / step) as usize + 1,
            ParameterKind::Choice(values) => values.len(),
            ParameterKind::Bool => 2,
        }
    }

    /// Grid index of a concrete value, if the value is on the grid.
    pub fn index_of(&self, value: &ParamValue) -> Option<usize> {
        match (&self.kind, value) {
            (ParameterKind::IntRange { lo, hi, step }, ParamValue::Int(v)) => {
                if v < lo || v > hi || (v - lo) % step != 0 {
                    None
                } else {
                    Some(((v - lo) / step) as usize)
                }
            }
            (ParameterKind::Choice(values), ParamValue::Int(v)) => {
                values.iter().position(|c| c == v)
            }
            (ParameterKind::Bool, ParamValue::Bool(b)) => Some(usize::from(*b)),
            _ => None,
        }
    }

    /// Concrete value at a grid index.
    pub fn value_at(&self, index: usize) -> ParamValue {
        match &self.kind {
            ParameterKind::IntRange { lo, step, .. } => {
                ParamValue::Int(lo + *step * index as i64)
            }
            ParameterKind::Choice(values) => ParamValue::Int(values[index]),
            ParameterKind::Bool => ParamValue::Bool(index != 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Bool(bool),
}

impl ParamValue {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            ParamValue::Int(v) => Some(*v),
            ParamValue::Bool(_) => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            ParamValue::Bool(b) => Some(*b),
            ParamValue::Int(_) => None,
        }
    }
}

/// Ties a layer-count parameter to the ordered width parameters it controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGroup {
    pub group: ParamGroup,
    /// Name of the parameter holding the active layer count.
    pub num_layers: String,
    /// Names of the per-layer width parameters, one per maximum layer.
    pub widths: Vec<String>,
    /// JSON key of the emitted kernel list, e.g. `encoder_kernel_list`.
    pub config_key: String,
}

/// A complete configuration: one concrete value per parameter.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    pub values: BTreeMap<String, ParamValue>,
}

impl Configuration {
    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.values.get(name)
    }

    pub fn int(&self, name: &str) -> Option<i64> {
        self.get(name).and_then(ParamValue::as_int)
    }

    pub fn set(&mut self, name: &str, value: ParamValue) {
        self.values.insert(name.to_owned(), value);
    }
}

/// A point in `[0, 1]^d`, the GP's input representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitPoint(pub Vec<f64>);

impl UnitPoint {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpaceError {
    UnknownParameter(String),
    MissingParameter(String),
    OffGrid { param: String, value: ParamValue },
    DimensionMismatch { expected: usize, got: usize },
    OutOfUnitCube { index: usize, value: f64 },
    InvalidSpec(String),
}

impl core::fmt::Display for SpaceError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SpaceError::UnknownParameter(name) => write!(f, "unknown parameter `{name}`"),
            SpaceError::MissingParameter(name) => write!(f, "missing parameter `{name}`"),
            SpaceError::OffGrid { param, value } => {
                write!(f, "value {value:?} is off the grid of parameter `{param}`")
            }
            SpaceError::DimensionMismatch { expected, got } => {
                write!(f, "expected {expected} coordinates, got {got}")
            }
            SpaceError::OutOfUnitCube { index, value } => {
                write!(f, "coordinate {index} = {value} lies outside [0, 1]")
            }
            SpaceError::InvalidSpec(msg) => write!(f, "invalid search space: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SpaceError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: Vec<ParameterSpec>,
    pub layer_groups: Vec<LayerGroup>,
}

impl SearchSpace {
    pub fn new(params: Vec<ParameterSpec>, layer_groups: Vec<LayerGroup>) -> Result<Self, SpaceError> {
        let space = SearchSpace { params, layer_groups };
        space.check()?;
        Ok(space)
    }

    fn check(&self) -> Result<(), SpaceError> {
        let mut seen = BTreeMap::new();
        for (i, p) in self.params.iter().enumerate() {
            p.check()?;
            if seen.insert(p.name.clone(), i).is_some() {
                return Err(SpaceError::InvalidSpec(format!(
                    "duplicate parameter name `{}`",
                    p.name
                )));
            }
        }
        let mut width_owner: BTreeMap<&str, &str> = BTreeMap::new();
        for g in &self.layer_groups {
            let nl = self
                .param(&g.num_layers)
                .ok_or_else(|| SpaceError::UnknownParameter(g.num_layers.clone()))?;
            let max_layers = match &nl.kind {
                ParameterKind::IntRange { hi, .. } => *hi,
                ParameterKind::Choice(values) => *values.last().unwrap(),
                ParameterKind::Bool => {
                    return Err(SpaceError::InvalidSpec(format!(
                        "layer-count parameter `{}` cannot be boolean",
                        g.num_layers
                    )))
                }
            };
            if max_layers < 1 || g.widths.len() != max_layers as usize {
                return Err(SpaceError::InvalidSpec(format!(
                    "layer group `{}` has {} width slots but a maximum of {} layers",
                    g.config_key,
                    g.widths.len(),
                    max_layers
                )));
            }
            for w in &g.widths {
                if self.param(w).is_none() {
                    return Err(SpaceError::UnknownParameter(w.clone()));
                }
                if width_owner.insert(w, &g.config_key).is_some() {
                    return Err(SpaceError::InvalidSpec(format!(
                        "width parameter `{w}` referenced by more than one layer group"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Dimensionality of the unit-cube representation.
    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn param(&self, name: &str) -> Option<&ParameterSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn grid_sizes(&self) -> Vec<usize> {
        self.params.iter().map(|p| p.grid_len()).collect()
    }

    /// Total number of grid configurations (saturating).
    pub fn grid_cardinality(&self) -> u128 {
        self.params
            .iter()
            .fold(1u128, |acc, p| acc.saturating_mul(p.grid_len() as u128))
    }

    pub fn validate_config(&self, config: &Configuration) -> Result<(), SpaceError> {
        for p in &self.params {
            let value = config
                .get(&p.name)
                .ok_or_else(|| SpaceError::MissingParameter(p.name.clone()))?;
            if p.index_of(value).is_none() {
                return Err(SpaceError::OffGrid { param: p.name.clone(), value: *value });
            }
        }
        for name in config.values.keys() {
            if self.param(name).is_none() {
                return Err(SpaceError::UnknownParameter(name.clone()));
            }
        }
        Ok(())
    }

    /// Map a configuration onto `[0, 1]^d`: each grid's minimum goes to 0 and
    /// its maximum to 1, with choices at equispaced positions.
    pub fn encode(&self, config: &Configuration) -> Result<UnitPoint, SpaceError> {
        self.validate_config(config)?;
        let mut coords = Vec::with_capacity(self.dim());
        for p in &self.params {
            let idx = p.index_of(config.get(&p.name).unwrap()).unwrap();
            coords.push(Self::coord_of_index(idx, p.grid_len()));
        }
        Ok(UnitPoint(coords))
    }

    /// Snap a unit point to the nearest grid configuration. Exact midpoints
    /// resolve to the lower grid value so the codec is deterministic.
    pub fn decode(&self, point: &UnitPoint) -> Result<Configuration, SpaceError> {
        let indices = self.indices_from_unit(point)?;
        let mut config = Configuration::default();
        for (p, &idx) in self.params.iter().zip(&indices) {
            config.set(&p.name, p.value_at(idx));
        }
        Ok(config)
    }

    #[inline]
    fn coord_of_index(idx: usize, grid_len: usize) -> f64 {
        if grid_len <= 1 {
            0.0
        } else {
            idx as f64 / (grid_len - 1) as f64
        }
    }

    pub fn indices_from_unit(&self, point: &UnitPoint) -> Result<Vec<usize>, SpaceError> {
        if point.dim() != self.dim() {
            return Err(SpaceError::DimensionMismatch { expected: self.dim(), got: point.dim() });
        }
        let mut indices = Vec::with_capacity(self.dim());
        for (i, (p, &c)) in self.params.iter().zip(point.coords()).enumerate() {
            if !(0.0..=1.0).contains(&c) {
                return Err(SpaceError::OutOfUnitCube { index: i, value: c });
            }
            let k = p.grid_len();
            let t = c * (k - 1) as f64;
            // nearest index, halfway ties to the lower one
            let idx = math::ceil(t - 0.5) as i64;
            indices.push(idx.clamp(0, k as i64 - 1) as usize);
        }
        Ok(indices)
    }

    pub fn unit_from_indices(&self, indices: &[usize]) -> UnitPoint {
        assert_eq!(indices.len(), self.dim());
        UnitPoint(
            self.params
                .iter()
                .zip(indices)
                .map(|(p, &idx)| Self::coord_of_index(idx, p.grid_len()))
                .collect(),
        )
    }

    pub fn config_from_indices(&self, indices: &[usize]) -> Configuration {
        assert_eq!(indices.len(), self.dim());
        let mut config = Configuration::default();
        for (p, &idx) in self.params.iter().zip(indices) {
            config.set(&p.name, p.value_at(idx));
        }
        config
    }

    /// Emit the nested model-config JSON document. Kernel lists are truncated
    /// to the first `num_layers` widths; all other parameters appear under
    /// their section with their configured key.
    pub fn emit_model_config(&self, config: &Configuration) -> Result<serde_json::Value, SpaceError> {
        self.validate_config(config)?;
        let mut sections: BTreeMap<&str, serde_json::Map<String, serde_json::Value>> =
            BTreeMap::new();
        let mut consumed: BTreeMap<&str, ()> = BTreeMap::new();
        for g in &self.layer_groups {
            consumed.insert(g.num_layers.as_str(), ());
            for w in &g.widths {
                consumed.insert(w.as_str(), ());
            }
            let n = config.int(&g.num_layers).unwrap() as usize;
            let kernels: Vec<serde_json::Value> = g
                .widths
                .iter()
                .take(n)
                .map(|w| serde_json::Value::from(config.int(w).unwrap()))
                .collect();
            sections
                .entry(g.group.section())
                .or_default()
                .insert(g.config_key.clone(), serde_json::Value::Array(kernels));
        }
        for p in &self.params {
            if consumed.contains_key(p.name.as_str()) {
                continue;
            }
            let key = p.config_key.clone().unwrap_or_else(|| p.name.clone());
            let value = match config.get(&p.name).unwrap() {
                ParamValue::Int(v) => serde_json::Value::from(*v),
                ParamValue::Bool(b) => serde_json::Value::from(*b),
            };
            sections.entry(p.group.section()).or_default().insert(key, value);
        }
        let mut doc = serde_json::Map::new();
        for (section, members) in sections {
            doc.insert(section.to_owned(), serde_json::Value::Object(members));
        }
        Ok(serde_json::Value::Object(doc))
    }
}

fn int_range(
    name: &str,
    group: ParamGroup,
    lo: i64,
    hi: i64,
    step: i64,
    key: Option<&str>,
) -> ParameterSpec {
    ParameterSpec {
        name: name.to_owned(),
        group,
        kind: ParameterKind::IntRange { lo, hi, step },
        config_key: key.map(str::to_owned),
    }
}

fn choice(name: &str, group: ParamGroup, values: &[i64], key: Option<&str>) -> ParameterSpec {
    ParameterSpec {
        name: name.to_owned(),
        group,
        kind: ParameterKind::Choice(values.to_vec()),
        config_key: key.map(str::to_owned),
    }
}

/// The built-in 24-parameter LightConv encoder/decoder space: six encoder
/// kernel slots with 4-6 active layers, two decoder and two length-predictor
/// kernel slots, and the dimension/attention/embedding integers, plus one
/// boolean. Ships as preset `lightconv24`.
pub fn lightconv24() -> SearchSpace {
    use ParamGroup::*;
    let mut params = Vec::new();
    for i in 0..6 {
        params.push(choice(&format!("encoder.kernel_{i}"), Encoder, &[3, 5, 7, 9], None));
    }
    params.push(choice("encoder.num_layers", Encoder, &[4, 5, 6], None));
    params.push(int_range("encoder.embed_dim", Encoder, 128, 192, 8, Some("encoder_embed_dim")));
    params.push(choice(
        "encoder.self_attention",
        Encoder,
        &[1, 2, 4],
        Some("self_attention_heads"),
    ));
    params.push(int_range("encoder.ffn_dim", Encoder, 32, 192, 8, Some("encoder_ffn_embed_dim")));
    params.push(ParameterSpec {
        name: "encoder.normalized".to_owned(),
        group: Encoder,
        kind: ParameterKind::Bool,
        config_key: Some("encoder_normalized".to_owned()),
    });
    for i in 0..2 {
        params.push(choice(&format!("decoder.kernel_{i}"), Decoder, &[7, 9, 11, 13, 15], None));
    }
    params.push(choice("decoder.num_layers", Decoder, &[1, 2], None));
    params.push(choice(
        "decoder.self_attention",
        Decoder,
        &[1, 2, 4],
        Some("self_attention_heads"),
    ));
    params.push(choice("decoder.attention_heads", Decoder, &[1, 2, 4], Some("attention_heads")));
    params.push(int_range("decoder.ffn_dim", Decoder, 128, 512, 16, Some("decoder_ffn_embed_dim")));
    for i in 0..2 {
        params.push(choice(&format!("length_predictor.kernel_{i}"), LengthPredictor, &[3, 5, 7], None));
    }
    params.push(choice("length_predictor.num_layers", LengthPredictor, &[1, 2], None));
    params.push(int_range(
        "length_predictor.dim",
        LengthPredictor,
        32,
        192,
        8,
        Some("length_predictor_dim"),
    ));
    params.push(choice("length_predictor.num_head", LengthPredictor, &[1, 2, 4], Some("num_head")));
    params.push(int_range("embedding.char_embed_dim", Embedding, 8, 24, 4, Some("char_embed_dim")));
    params.push(int_range("embedding.proj_dim", Embedding, 8, 24, 4, Some("proj_dim")));

    let layer_groups = vec![
        LayerGroup {
            group: Encoder,
            num_layers: "encoder.num_layers".to_owned(),
            widths: (0..6).map(|i| format!("encoder.kernel_{i}")).collect(),
            config_key: "encoder_kernel_list".to_owned(),
        },
        LayerGroup {
            group: Decoder,
            num_layers: "decoder.num_layers".to_owned(),
            widths: (0..2).map(|i| format!("decoder.kernel_{i}")).collect(),
            config_key: "decoder_kernel_size_list".to_owned(),
        },
        LayerGroup {
            group: LengthPredictor,
            num_layers: "length_predictor.num_layers".to_owned(),
            widths: (0..2).map(|i| format!("length_predictor.kernel_{i}")).collect(),
            config_key: "length_predictor_kernel_list".to_owned(),
        },
    ];

    SearchSpace::new(params, layer_groups).expect("built-in space is well-formed")
}

/// Default configuration of the `lightconv24` space. Width slots beyond the
/// default layer count are padded with the grid minimum.
pub fn lightconv24_default() -> Configuration {
    let mut c = Configuration::default();
    for (i, v) in [3, 3, 5, 9, 7, 3].iter().enumerate() {
        c.set(&format!("encoder.kernel_{i}"), ParamValue::Int(*v));
    }
    c.set("encoder.num_layers", ParamValue::Int(5));
    c.set("encoder.embed_dim", ParamValue::Int(128));
    c.set("encoder.self_attention", ParamValue::Int(2));
    c.set("encoder.ffn_dim", ParamValue::Int(40));
    c.set("encoder.normalized", ParamValue::Bool(true));
    c.set("decoder.kernel_0", ParamValue::Int(13));
    c.set("decoder.kernel_1", ParamValue::Int(9));
    c.set("decoder.num_layers", ParamValue::Int(2));
    c.set("decoder.self_attention", ParamValue::Int(1));
    c.set("decoder.attention_heads", ParamValue::Int(2));
    c.set("decoder.ffn_dim", ParamValue::Int(144));
    c.set("length_predictor.kernel_0", ParamValue::Int(3));
    c.set("length_predictor.kernel_1", ParamValue::Int(7));
    c.set("length_predictor.num_layers", ParamValue::Int(2));
    c.set("length_predictor.dim", ParamValue::Int(192));
    c.set("length_predictor.num_head", ParamValue::Int(4));
    c.set("embedding.char_embed_dim", ParamValue::Int(8));
    c.set("embedding.proj_dim", ParamValue::Int(12));
    c
}

/// Look up a built-in space preset by name.
pub fn preset(name: &str) -> Option<SearchSpace> {
    match name {
        "lightconv24" => Some(lightconv24()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_has_24_parameters() {
        let space = lightconv24();
        assert_eq!(space.dim(), 24);
        // 7 encoder kernel params, 3 decoder, 3 length predictor,
        // 10 other integers, 1 boolean
        let bools = space
            .params
            .iter()
            .filter(|p| matches!(p.kind, ParameterKind::Bool))
            .count();
        assert_eq!(bools, 1);
    }

    #[test]
    fn preset_grids_match_table() {
        let space = lightconv24();
        let embed = space.param("encoder.embed_dim").unwrap();
        assert_eq!(embed.grid_len(), 9);
        assert_eq!(embed.value_at(0), ParamValue::Int(128));
        assert_eq!(embed.value_at(1), ParamValue::Int(136));
        assert_eq!(embed.value_at(8), ParamValue::Int(192));
        let dk = space.param("decoder.kernel_0").unwrap();
        assert_eq!(dk.kind, ParameterKind::Choice(vec![7, 9, 11, 13, 15]));
        let dffn = space.param("decoder.ffn_dim").unwrap();
        assert_eq!(dffn.grid_len(), 25);
        assert_eq!(dffn.value_at(24), ParamValue::Int(512));
    }

    #[test]
    fn encode_maps_grid_extremes() {
        let space = lightconv24();
        let mut config = lightconv24_default();
        config.set("encoder.embed_dim", ParamValue::Int(128));
        let i = space.param_index("encoder.embed_dim").unwrap();
        assert_eq!(space.encode(&config).unwrap().coords()[i], 0.0);
        config.set("encoder.embed_dim", ParamValue::Int(160));
        assert_eq!(space.encode(&config).unwrap().coords()[i], 0.5);
        config.set("encoder.embed_dim", ParamValue::Int(192));
        assert_eq!(space.encode(&config).unwrap().coords()[i], 1.0);
        let b = space.param_index("encoder.normalized").unwrap();
        config.set("encoder.normalized", ParamValue::Bool(true));
        assert_eq!(space.encode(&config).unwrap().coords()[b], 1.0);
    }

    #[test]
    fn decode_all_zeros_is_grid_minimum() {
        let space = lightconv24();
        let config = space.decode(&UnitPoint(vec![0.0; 24])).unwrap();
        assert_eq!(config.int("encoder.embed_dim"), Some(128));
        assert_eq!(config.int("decoder.ffn_dim"), Some(128));
        assert_eq!(config.int("encoder.kernel_0"), Some(3));
        assert_eq!(config.get("encoder.normalized"), Some(&ParamValue::Bool(false)));
    }

    #[test]
    fn boolean_threshold() {
        let space = lightconv24();
        let b = space.param_index("encoder.normalized").unwrap();
        let mut p = vec![0.0; 24];
        p[b] = 0.49;
        let c = space.decode(&UnitPoint(p.clone())).unwrap();
        assert_eq!(c.get("encoder.normalized"), Some(&ParamValue::Bool(false)));
        p[b] = 0.51;
        let c = space.decode(&UnitPoint(p.clone())).unwrap();
        assert_eq!(c.get("encoder.normalized"), Some(&ParamValue::Bool(true)));
        // exact midpoints resolve to the lower grid value
        p[b] = 0.5;
        let c = space.decode(&UnitPoint(p)).unwrap();
        assert_eq!(c.get("encoder.normalized"), Some(&ParamValue::Bool(false)));
    }

    #[test]
    fn off_grid_value_rejected() {
        let space = lightconv24();
        let mut config = lightconv24_default();
        config.set("encoder.embed_dim", ParamValue::Int(130));
        assert!(matches!(space.encode(&config), Err(SpaceError::OffGrid { .. })));
        config.set("encoder.embed_dim", ParamValue::Int(128));
        config.set("bogus", ParamValue::Int(1));
        assert!(matches!(space.encode(&config), Err(SpaceError::UnknownParameter(_))));
    }

    #[test]
    fn emit_truncates_kernel_lists() {
        let space = lightconv24();
        let mut config = lightconv24_default();
        config.set("encoder.num_layers", ParamValue::Int(4));
        for (i, v) in [3, 5, 5, 7, 9, 9].iter().enumerate() {
            config.set(&format!("encoder.kernel_{i}"), ParamValue::Int(*v));
        }
        let doc = space.emit_model_config(&config).unwrap();
        assert_eq!(
            doc["encoder"]["encoder_kernel_list"],
            serde_json::json!([3, 5, 5, 7])
        );
        config.set("decoder.num_layers", ParamValue::Int(1));
        let doc = space.emit_model_config(&config).unwrap();
        let list = doc["decoder"]["decoder_kernel_size_list"].as_array().unwrap();
        assert_eq!(list.len(), 1);
    }

    #[test]
    fn emit_default_config() {
        let space = lightconv24();
        let doc = space.emit_model_config(&lightconv24_default()).unwrap();
        assert_eq!(
            doc["encoder"]["encoder_kernel_list"],
            serde_json::json!([3, 3, 5, 9, 7])
        );
        assert_eq!(doc["encoder"]["encoder_embed_dim"], serde_json::json!(128));
        assert_eq!(doc["encoder"]["encoder_ffn_embed_dim"], serde_json::json!(40));
        assert_eq!(doc["encoder"]["encoder_normalized"], serde_json::json!(true));
        assert_eq!(doc["decoder"]["self_attention_heads"], serde_json::json!(1));
        assert_eq!(doc["embedding"]["proj_dim"], serde_json::json!(12));
        // layer-count and width parameters never leak into the document
        assert!(doc["encoder"].get("encoder.num_layers").is_none());
    }

    #[test]
    fn space_serializes_round_trip() {
        let space = lightconv24();
        let json = serde_json::to_string(&space).unwrap();
        let back: SearchSpace = serde_json::from_str(&json).unwrap();
        assert_eq!(space, back);
    }

    #[test]
    fn rejects_malformed_specs() {
        let bad = SearchSpace::new(
            vec![int_range("x", ParamGroup::Encoder, 0, 10, 3, None)],
            vec![],
        );
        assert!(bad.is_err()); // 10 not divisible by 3
        let bad = SearchSpace::new(
            vec![choice("x", ParamGroup::Encoder, &[3, 3], None)],
            vec![],
        );
        assert!(bad.is_err()); // not strictly increasing
    }
}
