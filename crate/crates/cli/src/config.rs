//! Flat `section.key = value` run configuration.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use bathtub::demand::{DistanceDistribution, InfluxProfile, InitialCondition, SurvivalTable};
use bathtub::diagrams::FundamentalDiagram;
use bathtub::pwl::{Outside, PiecewiseLinear};
use bathtub::solver::{GridSpec, Horizon, Scenario};
use bathtub::special::{DeterministicConfig, VickreyConfig};

use crate::error::{invalid, CliError, Result};

const KEYS: &[&str] = &[
    "network.L",
    "fd.variant",
    "fd.u",
    "fd.w",
    "fd.kappa",
    "fd.C",
    "fd.table",
    "fd.allow_increasing",
    "demand.influx.kind",
    "demand.influx.rate",
    "demand.influx.ramp",
    "demand.influx.plateau",
    "demand.influx.end",
    "demand.influx.rate_nodes",
    "demand.distance.kind",
    "demand.distance.B",
    "demand.distance.Btilde_nodes",
    "demand.distance.table",
    "ic.kind",
    "ic.lambda0",
    "ic.B",
    "ic.table",
    "grid.dx",
    "grid.X",
    "grid.stop",
    "grid.dt",
    "grid.v_min",
    "grid.allow_truncation",
    "grid.snapshot_every",
    "model.kind",
    "model.scheme",
    "outputs",
    "output_dir",
];

/// Keys a sweep may vary.
pub const NUMERIC_KEYS: &[&str] = &[
    "network.L",
    "fd.u",
    "fd.w",
    "fd.kappa",
    "fd.C",
    "demand.influx.rate",
    "demand.influx.ramp",
    "demand.influx.plateau",
    "demand.influx.end",
    "demand.distance.B",
    "ic.lambda0",
    "ic.B",
    "grid.dx",
    "grid.X",
    "grid.dt",
    "grid.v_min",
];

#[derive(Debug, Clone, PartialEq)]
struct Setting {
    line: usize,
    value: String,
}

/// Parsed but not yet interpreted configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RawConfig {
    settings: BTreeMap<String, Vec<Setting>>,
    base_dir: PathBuf,
}

impl RawConfig {
    /// Reads lines of `key = value`; `#` starts a comment. Keys ending in
    /// `_nodes` may repeat and accumulate; any other repeat is an error.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut settings: BTreeMap<String, Vec<Setting>> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| CliError::Syntax { line, message: format!("expected `key = value`, got `{content}`") })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(CliError::UnknownKey { key: key.to_string(), line });
            }
            if value.is_empty() {
                return Err(CliError::Syntax { line, message: format!("`{key}` has no value") });
            }
            let entry = settings.entry(key.to_string()).or_default();
            if let Some(first) = entry.first() {
                if !key.ends_with("_nodes") {
                    return Err(CliError::Duplicate { key: key.to_string(), first: first.line, second: line });
                }
            }
            entry.push(Setting { line, value: value.to_string() });
        }
        Ok(Self { settings, base_dir: base_dir.to_path_buf() })
    }

    /// Replaces a numeric setting, as a sweep does.
    pub fn set_numeric(&mut self, key: &str, value: f64) -> Result<()> {
        if !NUMERIC_KEYS.contains(&key) {
            return Err(invalid(key, "not a numeric key that can be swept"));
        }
        self.settings.insert(key.to_string(), vec![Setting { line: 0, value: value.to_string() }]);
        Ok(())
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn build(&self) -> Result<RunConfig> {
        let r = Reader { raw: self, used: RefCell::new(BTreeSet::new()) };
        let config = r.run_config()?;
        let used = r.used.borrow();
        if let Some(key) = self.settings.keys().find(|k| !used.contains(k.as_str())) {
            return Err(invalid(key, "does not apply to this model configuration"));
        }
        Ok(config)
    }
}

/// Parses and interprets a configuration; relative table paths resolve
/// against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig> {
    RawConfig::parse(text, base_dir)?.build()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Output {
    Series,
    KSurface,
    Audit,
    TravelTimes,
}

impl Output {
    pub fn file_name(self) -> &'static str {
        match self {
            Output::Series => "series.csv",
            Output::KSurface => "ksurface.csv",
            Output::Audit => "audit.csv",
            Output::TravelTimes => "traveltimes.csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeChoice {
    Characteristic,
    Integral,
}

/// The solver a configuration selects, with its inputs.
#[derive(Debug, Clone)]
pub enum ModelSetup {
    Generalized { scenario: Scenario, scheme: SchemeChoice },
    Vickrey(VickreyConfig),
    Deterministic(DeterministicConfig),
    Constant(DeterministicConfig),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelSetup,
    pub outputs: BTreeSet<Output>,
    pub output_dir: PathBuf,
}

struct Reader<'a> {
    raw: &'a RawConfig,
    used: RefCell<BTreeSet<&'static str>>,
}

fn model_err(key: &str) -> impl FnOnce(bathtub::Error) -> CliError + '_ {
    move |source| CliError::Model { key: key.to_string(), source }
}

impl Reader<'_> {
    fn text(&self, key: &'static str) -> Option<&str> {
        debug_assert!(KEYS.contains(&key));
        self.used.borrow_mut().insert(key);
        self.raw.settings.get(key).and_then(|s| s.first()).map(|s| s.value.as_str())
    }

    fn require(&self, key: &'static str) -> Result<&str> {
        self.text(key).ok_or_else(|| CliError::Missing(key.to_string()))
    }

    fn number(&self, key: &'static str) -> Result<Option<f64>> {
        self.text(key)
            .map(|s| {
                let v: f64 = s.parse().map_err(|_| invalid(key, format!("`{s}` is not a number")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(invalid(key, "must be finite"))
                }
            })
            .transpose()
    }

    fn positive(&self, key: &'static str) -> Result<f64> {
        let v = self.number(key)?.ok_or_else(|| CliError::Missing(key.to_string()))?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(invalid(key, format!("must be positive, got {v}")))
        }
    }

    fn optional_positive(&self, key: &'static str) -> Result<Option<f64>> {
        if self.raw.settings.contains_key(key) {
            self.positive(key).map(Some)
        } else {
            self.used.borrow_mut().insert(key);
            Ok(None)
        }
    }

    fn non_negative(&self, key: &'static str) -> Result<f64> {
        let v = self.number(key)?.ok_or_else(|| CliError::Missing(key.to_string()))?;
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(invalid(key, format!("must be non-negative, got {v}")))
        }
    }

    fn flag(&self, key: &'static str) -> Result<bool> {
        match self.text(key) {
            None | Some("false") => Ok(false),
            Some("true") => Ok(true),
            Some(other) => Err(invalid(key, format!("expected true or false, got `{other}`"))),
        }
    }

    /// `t:value` pairs from every line of a `_nodes` key.
    fn nodes(&self, key: &'static str) -> Result<Option<Vec<(f64, f64)>>> {
        self.used.borrow_mut().insert(key);
        let Some(lines) = self.raw.settings.get(key) else { return Ok(None) };
        let mut out = Vec::new();
        for s in lines {
            for pair in s.value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                let parsed = pair
                    .split_once(':')
                    .and_then(|(a, b)| Some((a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?)));
                match parsed {
                    Some(node) => out.push(node),
                    None => return Err(invalid(key, format!("line {}: `{pair}` is not a `t:value` pair", s.line))),
                }
            }
        }
        Ok(Some(out))
    }

    fn path(&self, key: &'static str) -> Result<PathBuf> {
        Ok(self.raw.base_dir.join(self.require(key)?))
    }

    fn run_config(&self) -> Result<RunConfig> {
        let lane_miles = self.positive("network.L")?;
        let fd = self.diagram()?;
        let influx = self.influx()?;
        let distance = self.distance()?;
        let ic = self.initial_condition()?;
        let horizon = self.horizon()?;
        let kind = self.text("model.kind").unwrap_or("generalized");
        if kind != "generalized" && self.raw.settings.contains_key("model.scheme") {
            return Err(invalid("model.scheme", "applies only to model.kind = generalized"));
        }
        let model = match kind {
            "generalized" => self.generalized(lane_miles, fd, influx, distance, ic, horizon)?,
            "vickrey" => self.vickrey(lane_miles, fd, influx, distance, ic, horizon)?,
            "deterministic" | "constant" => {
                let mean = match distance {
                    DistanceDistribution::Deterministic { mean } => mean,
                    _ => return Err(invalid("demand.distance.kind", format!("model.kind = {kind} needs deterministic"))),
                };
                let dz = self.positive("grid.dx")?;
                let mut c = DeterministicConfig::new(lane_miles, fd, mean, influx, ic, dz, horizon)
                    .map_err(model_err("model.kind"))?;
                if let Some(v_min) = self.optional_positive("grid.v_min")? {
                    c.v_min = v_min;
                }
                if kind == "constant" {
                    ModelSetup::Constant(c)
                } else {
                    ModelSetup::Deterministic(c)
                }
            }
            other => return Err(invalid("model.kind", format!("unknown model `{other}`"))),
        };
        let outputs = self.outputs(&model)?;
        let output_dir = self.raw.base_dir.join(self.text("output_dir").unwrap_or("output"));
        Ok(RunConfig { model, outputs, output_dir })
    }

    fn diagram(&self) -> Result<FundamentalDiagram> {
        let variant = self.require("fd.variant")?;
        let fd = match variant {
            "triangular" => FundamentalDiagram::triangular(
                self.positive("fd.u")?,
                self.positive("fd.w")?,
                self.positive("fd.kappa")?,
            ),
            "trapezoidal" => FundamentalDiagram::trapezoidal(
                self.positive("fd.u")?,
                self.positive("fd.C")?,
                self.positive("fd.w")?,
                self.positive("fd.kappa")?,
            ),
            "greenshields" => FundamentalDiagram::greenshields(self.positive("fd.u")?, self.positive("fd.kappa")?),
            "piecewise_constant" | "tabulated" => {
                let pts = read_pairs(&self.path("fd.table")?)?;
                let allow = self.flag("fd.allow_increasing")?;
                if variant == "tabulated" {
                    FundamentalDiagram::tabulated(pts, allow)
                } else {
                    FundamentalDiagram::piecewise_constant(pts, allow)
                }
            }
            other => return Err(invalid("fd.variant", format!("unknown variant `{other}`"))),
        };
        fd.map_err(model_err("fd"))
    }

    fn influx(&self) -> Result<InfluxProfile> {
        let key = "demand.influx.kind";
        match self.text(key).unwrap_or("zero") {
            "zero" => Ok(InfluxProfile::zero()),
            "constant" => InfluxProfile::constant(self.non_negative("demand.influx.rate")?).map_err(model_err(key)),
            "pulse" => InfluxProfile::trapezoidal_pulse(
                self.positive("demand.influx.ramp")?,
                self.positive("demand.influx.plateau")?,
                self.positive("demand.influx.end")?,
            )
            .map_err(model_err(key)),
            "nodes" => {
                let nodes = self
                    .nodes("demand.influx.rate_nodes")?
                    .ok_or_else(|| CliError::Missing("demand.influx.rate_nodes".into()))?;
                InfluxProfile::piecewise_linear(&nodes).map_err(model_err("demand.influx.rate_nodes"))
            }
            other => Err(invalid(key, format!("unknown kind `{other}`"))),
        }
    }

    /// A constant `B` or a piecewise-linear `Btilde_nodes` profile, exactly one.
    fn mean_profile(&self) -> Result<PiecewiseLinear> {
        let nodes = self.nodes("demand.distance.Btilde_nodes")?;
        match (self.optional_positive("demand.distance.B")?, nodes) {
            (Some(b), None) => Ok(PiecewiseLinear::constant(b)),
            (None, Some(n)) => {
                PiecewiseLinear::new(&n, Outside::Clamp).map_err(model_err("demand.distance.Btilde_nodes"))
            }
            (Some(_), Some(_)) => Err(invalid("demand.distance.B", "give either B or Btilde_nodes, not both")),
            (None, None) => Err(CliError::Missing("demand.distance.B".into())),
        }
    }

    fn distance(&self) -> Result<DistanceDistribution> {
        let key = "demand.distance.kind";
        let d = match self.require(key)? {
            "exponential" => DistanceDistribution::exponential_varying(self.mean_profile()?),
            "uniform" => DistanceDistribution::uniform(self.mean_profile()?),
            "deterministic" => DistanceDistribution::deterministic(self.mean_profile()?),
            "tabulated" => return Ok(DistanceDistribution::tabulated(read_survival(&self.path("demand.distance.table")?)?)),
            other => return Err(invalid(key, format!("unknown kind `{other}`"))),
        };
        d.map_err(model_err(key))
    }

    fn initial_condition(&self) -> Result<InitialCondition> {
        let key = "ic.kind";
        match self.text(key).unwrap_or("empty") {
            "empty" => Ok(InitialCondition::Empty),
            "exponential" => InitialCondition::exponential(self.non_negative("ic.lambda0")?, self.positive("ic.B")?)
                .map_err(model_err(key)),
            "tabulated" => {
                let path = self.path("ic.table")?;
                let (xs, counts) = read_pairs(&path)?.into_iter().unzip();
                InitialCondition::tabulated(xs, counts).map_err(model_err("ic.table"))
            }
            other => Err(invalid(key, format!("unknown kind `{other}`"))),
        }
    }

    fn horizon(&self) -> Result<Horizon> {
        let key = "grid.stop";
        let text = self.require(key)?;
        let parsed = text.split_once(':').and_then(|(kind, v)| Some((kind.trim(), v.trim().parse::<f64>().ok()?)));
        match parsed {
            Some(("z", v)) if v > 0.0 && v.is_finite() => Ok(Horizon::MaxDistance(v)),
            Some(("t", v)) if v > 0.0 && v.is_finite() => Ok(Horizon::MaxTime(v)),
            _ => Err(invalid(key, format!("expected `z:<miles>` or `t:<hours>` with a positive value, got `{text}`"))),
        }
    }

    fn generalized(
        &self,
        lane_miles: f64,
        fd: FundamentalDiagram,
        influx: InfluxProfile,
        distance: DistanceDistribution,
        ic: InitialCondition,
        horizon: Horizon,
    ) -> Result<ModelSetup> {
        let scheme = match self.text("model.scheme").unwrap_or("characteristic") {
            "characteristic" => SchemeChoice::Characteristic,
            "integral" => SchemeChoice::Integral,
            other => return Err(invalid("model.scheme", format!("unknown scheme `{other}`"))),
        };
        let mut grid = GridSpec::new(self.positive("grid.dx")?, self.positive("grid.X")?, horizon)
            .map_err(model_err("grid"))?
            .allowing_truncation(self.flag("grid.allow_truncation")?);
        if let Some(dt) = self.optional_positive("grid.dt")? {
            if scheme == SchemeChoice::Characteristic {
                return Err(invalid("grid.dt", "the characteristic scheme sets its own step"));
            }
            grid = grid.with_dt(dt).map_err(model_err("grid.dt"))?;
        }
        if let Some(v_min) = self.optional_positive("grid.v_min")? {
            grid = grid.with_v_min(v_min).map_err(model_err("grid.v_min"))?;
        }
        if let Some(text) = self.text("grid.snapshot_every") {
            let n: usize = text.parse().map_err(|_| invalid("grid.snapshot_every", "expected a positive integer"))?;
            grid = grid.with_snapshot_every(n).map_err(model_err("grid.snapshot_every"))?;
        }
        let scenario = Scenario::new(lane_miles, fd, influx, distance, ic, grid).map_err(model_err("scenario"))?;
        Ok(ModelSetup::Generalized { scenario, scheme })
    }

    fn vickrey(
        &self,
        lane_miles: f64,
        fd: FundamentalDiagram,
        influx: InfluxProfile,
        distance: DistanceDistribution,
        ic: InitialCondition,
        horizon: Horizon,
    ) -> Result<ModelSetup> {
        let mean = match distance {
            DistanceDistribution::Exponential { mean } if mean.is_constant() => mean.eval(0.0),
            _ => return Err(invalid("demand.distance.kind", "model.kind = vickrey needs a constant exponential B")),
        };
        let lambda0 = match ic {
            InitialCondition::Empty => 0.0,
            InitialCondition::Exponential { lambda0, mean: b } if b == mean => lambda0,
            _ => return Err(invalid("ic.kind", "Vickrey's model needs an empty or exponential start with the demand's B")),
        };
        let dt = match (self.optional_positive("grid.dt")?, self.optional_positive("grid.dx")?) {
            (Some(dt), _) => dt,
            (None, Some(dx)) => dx / fd.free_flow_speed(),
            (None, None) => return Err(CliError::Missing("grid.dt".into())),
        };
        let mut c = VickreyConfig::new(lane_miles, fd, mean, lambda0, influx, dt, horizon).map_err(model_err("model"))?;
        if let Some(v_min) = self.optional_positive("grid.v_min")? {
            c.v_min = v_min;
        }
        Ok(ModelSetup::Vickrey(c))
    }

    fn outputs(&self, model: &ModelSetup) -> Result<BTreeSet<Output>> {
        let key = "outputs";
        let mut out = BTreeSet::new();
        for name in self.text(key).unwrap_or("series").split(',').map(str::trim).filter(|s| !s.is_empty()) {
            out.insert(match name {
                "series" => Output::Series,
                "ksurface" => Output::KSurface,
                "audit" => Output::Audit,
                "traveltimes" => Output::TravelTimes,
                other => return Err(invalid(key, format!("unknown output `{other}`"))),
            });
        }
        if matches!(model, ModelSetup::Vickrey(_)) && out.contains(&Output::KSurface) {
            return Err(invalid(key, "Vickrey's model has no distance grid for a ksurface"));
        }
        Ok(out)
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn parse_cell(path: &Path, row: usize, cell: &str) -> Result<f64> {
    cell.parse().map_err(|_| CliError::Invalid {
        key: path.display().to_string(),
        reason: format!("row {row}: `{cell}` is not a number"),
    })
}

/// Two-column numeric table with a header row.
fn read_pairs(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = open_csv(path)?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|source| CliError::Csv { path: path.to_path_buf(), source })?;
        if record.len() != 2 {
            return Err(invalid(&path.display().to_string(), format!("row {} needs two columns", i + 1)));
        }
        out.push((parse_cell(path, i + 1, &record[0])?, parse_cell(path, i + 1, &record[1])?));
    }
    Ok(out)
}

/// Header `x,<t_1>,...,<t_m>`; each row an `x` followed by survival values at those times.
fn read_survival(path: &Path) -> Result<SurvivalTable> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|source| CliError::Csv { path: path.to_path_buf(), source })?.clone();
    let times = headers.iter().skip(1).map(|h| parse_cell(path, 0, h)).collect::<Result<Vec<f64>>>()?;
    let mut xs = Vec::new();
    let mut rows = vec![Vec::new(); times.len()];
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|source| CliError::Csv { path: path.to_path_buf(), source })?;
        xs.push(parse_cell(path, i + 1, &record[0])?);
        for (k, cell) in record.iter().skip(1).enumerate() {
            rows[k].push(parse_cell(path, i + 1, cell)?);
        }
    }
    SurvivalTable::new(xs, times, rows).map_err(model_err("demand.distance.table"))
}
