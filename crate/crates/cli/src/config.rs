//! Line-oriented configuration files: `key = value` pairs with optional
//! `[social]`, `[delays]`, and `[stations]` sections, `#` comments, and
//! fail-fast validation. Unknown keys are rejected with their line number.

use std::fmt;
use std::str::FromStr;

use gstr_core::engine::{CaseKind, Protocol, ScenarioConfig};
use gstr_core::social::GraphModel;

/// Configuration error with the offending line when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub msg: String,
}

impl ConfigError {
    fn at(line: usize, msg: impl Into<String>) -> ConfigError {
        ConfigError {
            line: Some(line),
            msg: msg.into(),
        }
    }

    fn general(msg: impl Into<String>) -> ConfigError {
        ConfigError {
            line: None,
            msg: msg.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.msg),
            None => write!(f, "{}", self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

/// A density sweep: one run per (protocol, case, density, seed).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub densities: Vec<u32>,
    pub protocols: Vec<Protocol>,
    pub cases: Vec<CaseKind>,
    pub seeds_per_point: u32,
    pub base: ScenarioConfig,
}

impl Default for SweepSpec {
    fn default() -> SweepSpec {
        SweepSpec {
            densities: vec![40, 80, 120, 160, 200],
            protocols: vec![Protocol::Gstr],
            cases: vec![CaseKind::Free],
            seeds_per_point: 10,
            base: ScenarioConfig::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.densities.is_empty() {
            return Err(ConfigError::general("densities must not be empty"));
        }
        if self.densities.iter().any(|&d| d < 2) {
            return Err(ConfigError::general("densities must all be at least 2"));
        }
        if self.protocols.is_empty() {
            return Err(ConfigError::general("protocols must not be empty"));
        }
        if self.cases.is_empty() {
            return Err(ConfigError::general("cases must not be empty"));
        }
        if self.seeds_per_point == 0 {
            return Err(ConfigError::general("seeds_per_point must be at least 1"));
        }
        Ok(())
    }
}

struct Line<'a> {
    number: usize,
    section: &'static str,
    key: &'a str,
    value: &'a str,
}

fn split_lines(text: &str) -> Result<Vec<Line<'_>>, ConfigError> {
    let mut out = Vec::new();
    let mut section: &'static str = "";
    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(number, "unterminated section header"))?
                .trim();
            section = match name {
                "social" => "social",
                "delays" => "delays",
                "stations" => "stations",
                other => {
                    return Err(ConfigError::at(
                        number,
                        format!(
                            "unknown section `[{other}]` (expected [social], [delays], or [stations])"
                        ),
                    ))
                }
            };
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            ConfigError::at(number, format!("expected `key = value`, got `{line}`"))
        })?;
        out.push(Line {
            number,
            section,
            key: key.trim(),
            value: value.trim(),
        });
    }
    Ok(out)
}

fn parse_value<T: FromStr>(line: &Line<'_>, what: &str) -> Result<T, ConfigError> {
    line.value.parse().map_err(|_| {
        ConfigError::at(
            line.number,
            format!("key `{}`: expected {what}, got `{}`", line.key, line.value),
        )
    })
}

fn parse_list<T: FromStr>(line: &Line<'_>, what: &str) -> Result<Vec<T>, ConfigError> {
    line.value
        .split(',')
        .map(|tok| {
            tok.trim().parse().map_err(|_| {
                ConfigError::at(
                    line.number,
                    format!(
                        "key `{}`: expected a list of {what}, got `{}`",
                        line.key,
                        tok.trim()
                    ),
                )
            })
        })
        .collect()
}

/// Keys understood only by [`parse_sweep_spec`].
const SWEEP_KEYS: [&str; 4] = ["densities", "protocols", "cases", "seeds_per_point"];

fn apply_scenario_key(
    cfg: &mut ScenarioConfig,
    ws: &mut (u32, f64),
    line: &Line<'_>,
) -> Result<bool, ConfigError> {
    match (line.section, line.key) {
        ("", "protocol") => cfg.protocol = parse_value(line, "a protocol name")?,
        ("", "num_nodes") => cfg.num_nodes = parse_value(line, "an integer")?,
        ("", "area_width") => cfg.area_width = parse_value(line, "a number")?,
        ("", "area_height") => cfg.area_height = parse_value(line, "a number")?,
        ("", "grid_spacing") => cfg.grid_spacing = parse_value(line, "a number")?,
        ("", "tx_range") => cfg.tx_range = parse_value(line, "a number")?,
        ("", "beacon_interval") => cfg.beacon_interval = parse_value(line, "a number")?,
        ("", "mobility_step") => cfg.mobility_step = parse_value(line, "a number")?,
        ("", "sim_duration") => cfg.sim_duration = parse_value(line, "a number")?,
        ("", "msg_rate") => cfg.msg_rate = parse_value(line, "a number")?,
        ("", "ttl") => cfg.ttl = parse_value(line, "a number")?,
        ("", "v_min") => cfg.v_min = parse_value(line, "a number")?,
        ("", "v_max") => cfg.v_max = parse_value(line, "a number")?,
        ("", "seed") => cfg.seed = parse_value(line, "an integer")?,
        ("", "case") => cfg.case = parse_value(line, "a case name")?,
        ("", "trace") => cfg.trace_path = Some(line.value.to_string()),
        ("", "tgpsr_threshold") => cfg.tgpsr_threshold = parse_value(line, "a number")?,
        ("", "gtlr_load_weight") => cfg.gtlr_load_weight = parse_value(line, "a number")?,
        ("social", "model") => match line.value {
            "watts_strogatz" => cfg.social_model = GraphModel::WattsStrogatz { k: ws.0, p: ws.1 },
            "erdos_renyi" => cfg.social_model = GraphModel::ErdosRenyi { p: ws.1 },
            other => {
                return Err(ConfigError::at(
                    line.number,
                    format!(
                        "unknown social model `{other}` (expected watts_strogatz or erdos_renyi)"
                    ),
                ))
            }
        },
        ("social", "k") => ws.0 = parse_value(line, "an integer")?,
        ("social", "p") => ws.1 = parse_value(line, "a number")?,
        ("delays", "v2v_hop_delay") => cfg.delays.v2v_hop_delay = parse_value(line, "a number")?,
        ("delays", "cloud_uplink") => cfg.delays.cloud_uplink = parse_value(line, "a number")?,
        ("delays", "cloud_downlink") => cfg.delays.cloud_downlink = parse_value(line, "a number")?,
        ("delays", "cloud_lookup") => cfg.delays.cloud_lookup = parse_value(line, "a number")?,
        ("stations", "rows") => cfg.station_rows = parse_value(line, "an integer")?,
        ("stations", "cols") => cfg.station_cols = parse_value(line, "an integer")?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn finish_social_model(cfg: &mut ScenarioConfig, ws: (u32, f64)) {
    // Re-apply collected k/p to whichever model was chosen, so key order
    // inside [social] does not matter.
    cfg.social_model = match cfg.social_model {
        GraphModel::WattsStrogatz { .. } => GraphModel::WattsStrogatz { k: ws.0, p: ws.1 },
        GraphModel::ErdosRenyi { .. } => GraphModel::ErdosRenyi { p: ws.1 },
    };
}

fn default_ws(cfg: &ScenarioConfig) -> (u32, f64) {
    match cfg.social_model {
        GraphModel::WattsStrogatz { k, p } => (k, p),
        GraphModel::ErdosRenyi { p } => (8, p),
    }
}

fn unknown_key(line: &Line<'_>) -> ConfigError {
    let scope = if line.section.is_empty() {
        String::new()
    } else {
        format!(" in section [{}]", line.section)
    };
    ConfigError::at(line.number, format!("unknown key `{}`{scope}", line.key))
}

/// Parse a single-scenario configuration. Sweep keys are rejected here.
pub fn parse_scenario_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::default();
    let mut ws = default_ws(&cfg);
    for line in split_lines(text)? {
        if SWEEP_KEYS.contains(&line.key) {
            return Err(ConfigError::at(
                line.number,
                format!("key `{}` is only valid in a sweep configuration", line.key),
            ));
        }
        if !apply_scenario_key(&mut cfg, &mut ws, &line)? {
            return Err(unknown_key(&line));
        }
    }
    finish_social_model(&mut cfg, ws);
    cfg.validate()
        .map_err(|e| ConfigError::general(e.to_string()))?;
    Ok(cfg)
}

/// Parse a sweep configuration: scenario keys set the base run, sweep keys
/// define the grid.
pub fn parse_sweep_spec(text: &str) -> Result<SweepSpec, ConfigError> {
    let mut spec = SweepSpec::default();
    let mut ws = default_ws(&spec.base);
    for line in split_lines(text)? {
        match line.key {
            "densities" => spec.densities = parse_list(&line, "integers")?,
            "protocols" => spec.protocols = parse_list(&line, "protocol names")?,
            "cases" => spec.cases = parse_list(&line, "case names")?,
            "seeds_per_point" => spec.seeds_per_point = parse_value(&line, "an integer")?,
            _ => {
                if !apply_scenario_key(&mut spec.base, &mut ws, &line)? {
                    return Err(unknown_key(&line));
                }
            }
        }
    }
    finish_social_model(&mut spec.base, ws);
    spec.validate()?;
    // Validate the base against the largest density so bad parameters fail
    // before any run starts.
    let mut probe = spec.base.clone();
    probe.num_nodes = *spec.densities.iter().max().unwrap();
    probe
        .validate()
        .map_err(|e| ConfigError::general(e.to_string()))?;
    Ok(spec)
}

/// Serialize a scenario so that reparsing yields an equal configuration.
pub fn scenario_to_text(cfg: &ScenarioConfig) -> String {
    let mut s = String::new();
    s.push_str(&format!("protocol = {}\n", cfg.protocol.as_str()));
    s.push_str(&format!("num_nodes = {}\n", cfg.num_nodes));
    s.push_str(&format!("area_width = {}\n", cfg.area_width));
    s.push_str(&format!("area_height = {}\n", cfg.area_height));
    s.push_str(&format!("grid_spacing = {}\n", cfg.grid_spacing));
    s.push_str(&format!("tx_range = {}\n", cfg.tx_range));
    s.push_str(&format!("beacon_interval = {}\n", cfg.beacon_interval));
    s.push_str(&format!("mobility_step = {}\n", cfg.mobility_step));
    s.push_str(&format!("sim_duration = {}\n", cfg.sim_duration));
    s.push_str(&format!("msg_rate = {}\n", cfg.msg_rate));
    s.push_str(&format!("ttl = {}\n", cfg.ttl));
    s.push_str(&format!("v_min = {}\n", cfg.v_min));
    s.push_str(&format!("v_max = {}\n", cfg.v_max));
    s.push_str(&format!("seed = {}\n", cfg.seed));
    s.push_str(&format!("case = {}\n", cfg.case.as_str()));
    if let Some(trace) = &cfg.trace_path {
        s.push_str(&format!("trace = {trace}\n"));
    }
    s.push_str(&format!("tgpsr_threshold = {}\n", cfg.tgpsr_threshold));
    s.push_str(&format!("gtlr_load_weight = {}\n", cfg.gtlr_load_weight));
    s.push_str("\n[social]\n");
    match cfg.social_model {
        GraphModel::WattsStrogatz { k, p } => {
            s.push_str("model = watts_strogatz\n");
            s.push_str(&format!("k = {k}\n"));
            s.push_str(&format!("p = {p}\n"));
        }
        GraphModel::ErdosRenyi { p } => {
            s.push_str("model = erdos_renyi\n");
            s.push_str(&format!("p = {p}\n"));
        }
    }
    s.push_str("\n[delays]\n");
    s.push_str(&format!("v2v_hop_delay = {}\n", cfg.delays.v2v_hop_delay));
    s.push_str(&format!("cloud_uplink = {}\n", cfg.delays.cloud_uplink));
    s.push_str(&format!("cloud_downlink = {}\n", cfg.delays.cloud_downlink));
    s.push_str(&format!("cloud_lookup = {}\n", cfg.delays.cloud_lookup));
    s.push_str("\n[stations]\n");
    s.push_str(&format!("rows = {}\n", cfg.station_rows));
    s.push_str(&format!("cols = {}\n", cfg.station_cols));
    s
}
