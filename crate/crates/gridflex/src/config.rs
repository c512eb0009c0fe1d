//! Scenario configuration: a single versioned TOML file with nested
//! sections. Unknown keys are errors, and every embedded spec is validated
//! at load time, including existence of referenced files.

use crate::carbon::{DcSpec, Prices};
use crate::error::{Error, Result};
use crate::grid::Generator;
use crate::powermodel::{GpuModelParams, ServerSpec};
use crate::signals::{
    generate_load_trace, generate_signal, import_series, ImportedSeries, LoadTrace,
    RegulationSignal, SeriesSchema, SignalKind,
};
use crate::split_seed;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub server: ServerSpec,
    #[serde(default)]
    pub gpu: GpuModelParams,
    #[serde(default)]
    pub signal: SignalSection,
    #[serde(default)]
    pub trace: TraceSection,
    #[serde(default)]
    pub market: MarketSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub dc: DcSpec,
    #[serde(default)]
    pub prices: Prices,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub horizon_hours: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            horizon_hours: 1,
            seed: 42,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Generate,
    File,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSection {
    pub source: SourceKind,
    pub kind: SignalKind,
    pub ramp_limit: f64,
    pub step_seconds: f64,
    pub path: Option<PathBuf>,
}

impl Default for SignalSection {
    fn default() -> Self {
        SignalSection {
            source: SourceKind::Generate,
            kind: SignalKind::Noisy,
            ramp_limit: 0.005,
            step_seconds: 2.0,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSection {
    pub source: SourceKind,
    pub mean_pct: f64,
    pub variance: f64,
    pub min_pct: f64,
    pub max_pct: f64,
    pub step_seconds: f64,
    pub label: Option<String>,
    pub path: Option<PathBuf>,
}

impl Default for TraceSection {
    fn default() -> Self {
        // The medium-load, medium-variance utilization window.
        TraceSection {
            source: SourceKind::Generate,
            mean_pct: 50.13,
            variance: 46.64,
            min_pct: 35.0,
            max_pct: 63.0,
            step_seconds: 60.0,
            label: Some("med-med".into()),
            path: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketSection {
    /// Energy price, $/Wh.
    pub cost_per_wh: f64,
    /// Regulation-up capacity reward, $/(W h).
    pub rew_up_per_wh: f64,
    /// Regulation-down capacity reward, $/(W h).
    pub rew_down_per_wh: f64,
    pub threshold: f64,
    pub symmetric: bool,
    /// Performance score assumed before the first hour settles.
    pub first_hour_perf: f64,
    /// Quantile of LC power used for the swing estimate; the swing spans
    /// the (1-q, q) quantile range.
    pub swing_quantile: f64,
    /// Quantile of the instantaneous achievable maximum used as the bid's
    /// power ceiling.
    pub p_max_quantile: f64,
}

impl Default for MarketSection {
    fn default() -> Self {
        MarketSection {
            cost_per_wh: 5.0e-5,
            rew_up_per_wh: 2.0e-4,
            rew_down_per_wh: 2.0e-4,
            threshold: 1.2,
            symmetric: true,
            first_hour_perf: 0.9,
            swing_quantile: 0.80,
            p_max_quantile: 0.10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub demand_mw: Vec<f64>,
    pub reserve_up_mw: f64,
    pub reserve_down_mw: f64,
    pub dc_regulation_mw: f64,
    pub generators: Vec<Generator>,
}

impl Default for GridSection {
    fn default() -> Self {
        // Four identical gas plants sharing 300 MW of demand and +-100 MW of
        // regulation reserves.
        GridSection {
            demand_mw: vec![300.0],
            reserve_up_mw: 100.0,
            reserve_down_mw: 100.0,
            dc_regulation_mw: 100.0,
            generators: (1..=4)
                .map(|i| Generator {
                    name: format!("gas{i}"),
                    p_min: 50.0,
                    p_max: 100.0,
                    cost_c0: 400.0,
                    cost_c1: 25.0,
                    e_peak: 0.45,
                    eta: 0.25,
                })
                .collect(),
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            run: RunSection::default(),
            server: ServerSpec::default(),
            gpu: GpuModelParams::default(),
            signal: SignalSection::default(),
            trace: TraceSection::default(),
            market: MarketSection::default(),
            grid: GridSection::default(),
            dc: DcSpec::default(),
            prices: Prices::default(),
        }
    }
}

impl ScenarioConfig {
    /// Parse and validate a config file.
    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_path_with_overrides(path, &[])
    }

    /// Parse a config file, apply `key=value` overrides on dotted paths
    /// (e.g. `grid.dc_regulation_mw=50`), then validate.
    pub fn from_path_with_overrides(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let table: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut value = toml::Value::Table(table);
        for (key, raw) in overrides {
            set_path(&mut value, key, raw)?;
        }
        let cfg: ScenarioConfig = value
            .try_into()
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate(path.parent().unwrap_or_else(|| Path::new(".")))?;
        Ok(cfg)
    }

    /// Serialize back to TOML (useful for writing derived configs).
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self, base_dir: &Path) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.run.horizon_hours == 0 {
            return Err(Error::Config("horizon must be at least one hour".into()));
        }
        let mut server = self.server;
        server.gpu = self.gpu;
        server.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.dc.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.prices
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        for g in &self.grid.generators {
            g.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        for (section, source, path) in [
            ("signal", self.signal.source, &self.signal.path),
            ("trace", self.trace.source, &self.trace.path),
        ] {
            match source {
                SourceKind::File => {
                    let Some(p) = path else {
                        return Err(Error::Config(format!(
                            "{section}.source = \"file\" requires {section}.path"
                        )));
                    };
                    let resolved = resolve(base_dir, p);
                    if !resolved.exists() {
                        return Err(Error::Config(format!(
                            "{section} file not found: {}",
                            resolved.display()
                        )));
                    }
                }
                SourceKind::Generate => {}
            }
        }
        Ok(())
    }

    /// Server spec with the GPU section folded in.
    pub fn server_spec(&self) -> ServerSpec {
        let mut s = self.server;
        s.gpu = self.gpu;
        s
    }

    /// The regulation signal for this scenario, covering the horizon.
    pub fn load_signal(&self, base_dir: &Path) -> Result<RegulationSignal> {
        let horizon = Duration::from_secs(3600 * self.run.horizon_hours as u64);
        match self.signal.source {
            SourceKind::Generate => generate_signal(
                self.signal.kind,
                horizon,
                Duration::from_secs_f64(self.signal.step_seconds),
                self.signal.ramp_limit,
                split_seed(self.run.seed, "signal"),
            ),
            SourceKind::File => {
                let path = resolve(base_dir, self.signal.path.as_ref().unwrap());
                match import_series(&path, SeriesSchema::Signal)? {
                    ImportedSeries::Signal(sig) => {
                        if sig.duration() + Duration::from_secs(1) < horizon {
                            return Err(Error::Config(format!(
                                "signal file covers {:.0} s but the horizon needs {:.0} s",
                                sig.duration().as_secs_f64(),
                                horizon.as_secs_f64()
                            )));
                        }
                        Ok(sig)
                    }
                    ImportedSeries::Trace(_) => unreachable!(),
                }
            }
        }
    }

    /// The LC utilization trace for this scenario, covering the horizon.
    pub fn load_trace(&self, base_dir: &Path) -> Result<LoadTrace> {
        let horizon = Duration::from_secs(3600 * self.run.horizon_hours as u64);
        match self.trace.source {
            SourceKind::Generate => {
                let mut trace = generate_load_trace(
                    self.trace.mean_pct,
                    self.trace.variance,
                    self.trace.min_pct,
                    self.trace.max_pct,
                    horizon,
                    Duration::from_secs_f64(self.trace.step_seconds),
                    split_seed(self.run.seed, "trace"),
                )?;
                if let Some(label) = &self.trace.label {
                    trace.label = label.clone();
                }
                Ok(trace)
            }
            SourceKind::File => {
                let path = resolve(base_dir, self.trace.path.as_ref().unwrap());
                match import_series(&path, SeriesSchema::Trace)? {
                    ImportedSeries::Trace(trace) => {
                        if trace.duration() + Duration::from_secs(1) < horizon {
                            return Err(Error::Config(format!(
                                "trace file covers {:.0} s but the horizon needs {:.0} s",
                                trace.duration().as_secs_f64(),
                                horizon.as_secs_f64()
                            )));
                        }
                        Ok(trace)
                    }
                    ImportedSeries::Signal(_) => unreachable!(),
                }
            }
        }
    }
}

fn resolve(base_dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

/// Assign `raw` at a dotted path inside a TOML tree, inferring the scalar
/// type from the existing value when present.
fn set_path(root: &mut toml::Value, key: &str, raw: &str) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node.as_table_mut().ok_or_else(|| {
            Error::Config(format!("override path '{key}' does not name a table entry"))
        })?;
        if i == parts.len() - 1 {
            let parsed = parse_scalar(raw);
            table.insert((*part).to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry((*part).to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    Err(Error::Config(format!("empty override path '{key}'")))
}

fn parse_scalar(raw: &str) -> toml::Value {
    if let Ok(v) = raw.parse::<i64>() {
        return toml::Value::Integer(v);
    }
    if let Ok(v) = raw.parse::<f64>() {
        return toml::Value::Float(v);
    }
    if let Ok(v) = raw.parse::<bool>() {
        return toml::Value::Boolean(v);
    }
    toml::Value::String(raw.to_string())
}
