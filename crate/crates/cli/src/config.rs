use std::path::{Path, PathBuf};

use emflow::geometry::Nappes;
use emflow::levelset::Side;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad override `{0}`: expected key=value")]
    Override(String),
    #[error("override path `{0}` does not name an object field")]
    Path(String),
    #[error("invalid value for {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    pub z0: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    pub r_grid: f64,
    pub z_grid: f64,
    pub r_trunc: f64,
    pub m: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { h: 1.0 / 64.0, r_grid: 3.0, z_grid: 3.0, r_trunc: 8.0, m: 2000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    /// Level-set step override.
    pub dt: Option<f64>,
    pub graph_dt: f64,
    pub eta: f64,
    pub eps: f64,
    pub omega0: Option<f64>,
    pub omega0_factor: f64,
    pub eps_list: Vec<f64>,
    pub t_end: f64,
    pub sample_dt: f64,
    pub lookback: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt: None,
            graph_dt: 1e-3,
            eta: 0.1,
            eps: 1e-3,
            omega0: None,
            omega0_factor: 0.03,
            eps_list: vec![1e-3, 1e-4, 1e-5],
            t_end: 1.0,
            sample_dt: 0.05,
            lookback: 0.6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShapeConfig {
    Ball { z0: f64, rho: f64 },
    HalfSpace { level: f64, below: bool },
    /// A solved expander (index into the ordered list) and the side taken.
    Expander { branch: usize, side: Side },
}

impl Default for ShapeConfig {
    fn default() -> Self {
        ShapeConfig::Ball { z0: 0.0, rho: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvoidanceConfig {
    pub a: BallConfig,
    pub b: BallConfig,
    pub c_grid: f64,
}

impl Default for AvoidanceConfig {
    fn default() -> Self {
        Self { a: BallConfig { z0: -1.0, rho: 0.6 }, b: BallConfig { z0: 0.5, rho: 0.6 }, c_grid: 4.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierConfig {
    pub ball: BallConfig,
    /// Barrier centre (r, z).
    pub p: [f64; 2],
    pub delta: f64,
    /// Defaults to 1.05 times the admissibility threshold.
    pub c: Option<f64>,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self { ball: BallConfig { z0: 0.0, rho: 1.0 }, p: [0.0, 1.5], delta: 0.3, c: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothConfig {
    pub a: BallConfig,
    pub b: BallConfig,
    pub eps_s: f64,
}

impl Default for SmoothConfig {
    fn default() -> Self {
        Self { a: BallConfig { z0: -0.4, rho: 1.0 }, b: BallConfig { z0: 0.4, rho: 1.0 }, eps_s: 0.01 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorseConfig {
    pub side: Side,
    /// Duration of the level-set continuation.
    pub t_end: f64,
    pub witness: Option<BallConfig>,
    pub snapshot_stride: usize,
}

impl Default for MorseConfig {
    fn default() -> Self {
        Self { side: Side::Normal, t_end: 2.5, witness: Some(BallConfig { z0: 2.0, rho: 0.5 }), snapshot_stride: 5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub aperture: f64,
    pub nappes: Nappes,
    /// Index into the ordered expander list; `None` picks the first strictly
    /// unstable profile (or the only one).
    pub branch: Option<usize>,
    pub seed: u64,
    pub grid: GridConfig,
    pub flow: FlowConfig,
    pub shape: ShapeConfig,
    pub avoidance: AvoidanceConfig,
    pub barrier: BarrierConfig,
    pub smooth: SmoothConfig,
    pub morse: MorseConfig,
    /// Saved flow-line directory, for `certify`.
    pub record: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 2,
            aperture: 0.35,
            nappes: Nappes::DoubleSymmetric,
            branch: None,
            seed: 0,
            grid: GridConfig::default(),
            flow: FlowConfig::default(),
            shape: ShapeConfig::default(),
            avoidance: AvoidanceConfig::default(),
            barrier: BarrierConfig::default(),
            smooth: SmoothConfig::default(),
            morse: MorseConfig::default(),
            record: None,
        }
    }
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), ConfigError> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur.as_object_mut().ok_or_else(|| ConfigError::Path(key.into()))?;
        if i + 1 == parts.len() {
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        cur = obj.entry((*part).to_string()).or_insert_with(|| Value::Object(Default::default()));
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
    }
    Err(ConfigError::Path(key.into()))
}

/// Defaults, then the config file, then `key=value` overrides (values parsed
/// as JSON, falling back to plain strings), then the seed flag.
pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<RunConfig, ConfigError> {
    let mut v = serde_json::to_value(RunConfig::default())?;
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.into(), source })?;
        let file: Value = serde_json::from_str(&text)?;
        merge(&mut v, file);
    }
    for o in overrides {
        let (k, raw) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
        let val = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut v, k.trim(), val)?;
    }
    if let Some(s) = seed {
        set_path(&mut v, "seed", Value::from(s))?;
    }
    let cfg: RunConfig = serde_json::from_value(v)?;
    cfg.validate()?;
    Ok(cfg)
}

fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                // a tagged variant switching its `kind` replaces the default outright
                let same_kind = |slot: &Value| v.get("kind").map_or(true, |k| slot.get("kind") == Some(k));
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() && same_kind(slot) => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

fn positive(field: &'static str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Invalid { field, reason: format!("{x} must be positive and finite") })
    }
}

fn ball(field: &'static str, b: &BallConfig) -> Result<(), ConfigError> {
    positive(field, b.rho)?;
    if !b.z0.is_finite() {
        return Err(ConfigError::Invalid { field, reason: "centre must be finite".into() });
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 {
            return Err(ConfigError::Invalid { field: "n", reason: "dimension must be at least 1".into() });
        }
        if !self.aperture.is_finite() {
            return Err(ConfigError::Invalid { field: "aperture", reason: "must be finite".into() });
        }
        let g = &self.grid;
        positive("grid.h", g.h)?;
        positive("grid.r_grid", g.r_grid)?;
        positive("grid.z_grid", g.z_grid)?;
        positive("grid.r_trunc", g.r_trunc)?;
        if g.r_grid < 8.0 * g.h || 2.0 * g.z_grid < 8.0 * g.h {
            return Err(ConfigError::Invalid { field: "grid", reason: "box smaller than 8 cells".into() });
        }
        if g.m < 16 {
            return Err(ConfigError::Invalid { field: "grid.m", reason: format!("{} nodes is too few", g.m) });
        }
        let f = &self.flow;
        if let Some(dt) = f.dt {
            positive("flow.dt", dt)?;
        }
        positive("flow.graph_dt", f.graph_dt)?;
        positive("flow.eta", f.eta)?;
        positive("flow.sample_dt", f.sample_dt)?;
        positive("flow.lookback", f.lookback)?;
        positive("flow.omega0_factor", f.omega0_factor)?;
        if let Some(w) = f.omega0 {
            positive("flow.omega0", w)?;
        }
        if !(f.eps >= 0.0 && f.eps.is_finite()) {
            return Err(ConfigError::Invalid { field: "flow.eps", reason: format!("{} must be non-negative", f.eps) });
        }
        if !(f.t_end >= 0.0 && f.t_end.is_finite()) {
            return Err(ConfigError::Invalid { field: "flow.t_end", reason: format!("{} must be non-negative", f.t_end) });
        }
        if f.eps_list.iter().any(|e| !(*e > 0.0)) || f.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(ConfigError::Invalid {
                field: "flow.eps_list",
                reason: "must be positive and strictly decreasing".into(),
            });
        }
        match &self.shape {
            ShapeConfig::Ball { z0, rho } => ball("shape", &BallConfig { z0: *z0, rho: *rho })?,
            ShapeConfig::HalfSpace { level, .. } if !level.is_finite() => {
                return Err(ConfigError::Invalid { field: "shape.level", reason: "must be finite".into() })
            }
            _ => {}
        }
        ball("avoidance.a", &self.avoidance.a)?;
        ball("avoidance.b", &self.avoidance.b)?;
        positive("avoidance.c_grid", self.avoidance.c_grid)?;
        ball("barrier.ball", &self.barrier.ball)?;
        positive("barrier.delta", self.barrier.delta)?;
        if let Some(c) = self.barrier.c {
            positive("barrier.c", c)?;
        }
        ball("smooth.a", &self.smooth.a)?;
        ball("smooth.b", &self.smooth.b)?;
        positive("smooth.eps_s", self.smooth.eps_s)?;
        if !(self.morse.t_end > 0.0 && self.morse.t_end.is_finite()) {
            return Err(ConfigError::Invalid { field: "morse.t_end", reason: "must be positive".into() });
        }
        if let Some(w) = &self.morse.witness {
            ball("morse.witness", w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_win_over_defaults() {
        let c = load(None, &["grid.h=0.05".into(), "flow.eps_list=[0.1,0.01,0.001]".into()], Some(7)).unwrap();
        assert_eq!(c.grid.h, 0.05);
        assert_eq!(c.flow.eps_list, vec![0.1, 0.01, 0.001]);
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn string_values_fall_back() {
        let c = load(None, &["nappes=single".into()], None).unwrap();
        assert_eq!(c.nappes, Nappes::Single);
    }

    #[test]
    fn negative_h_is_rejected() {
        assert!(matches!(load(None, &["grid.h=-0.1".into()], None), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(load(None, &["grid.hh=0.1".into()], None), Err(ConfigError::Json(_))));
        assert!(matches!(load(None, &["nonsense".into()], None), Err(ConfigError::Override(_))));
    }

    #[test]
    fn increasing_eps_list_is_rejected() {
        assert!(load(None, &["flow.eps_list=[0.001,0.01,0.1]".into()], None).is_err());
    }

    #[test]
    fn file_merges_nested_objects() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"grid": {"h": 0.03125}, "shape": {"kind": "half-space", "level": 0.0, "below": true}}"#)
            .unwrap();
        let c = load(Some(&p), &[], None).unwrap();
        assert_eq!(c.grid.h, 0.03125);
        assert_eq!(c.grid.r_grid, 3.0);
        assert!(matches!(c.shape, ShapeConfig::HalfSpace { below: true, .. }));
    }
}
