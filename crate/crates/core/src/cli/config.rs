//! Flat `key = value` configuration with optional `[scenario]` sections.
//!
//! Top-level keys apply to every scenario; keys in the section named after
//! the running scenario override them. Every knob has a default and a doc
//! line (see [`KNOBS`]); unknown keys are rejected with a suggestion.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::dynamics::{Diffeo, TorusPoint};
use crate::error::{DomlabError, Result};
use crate::measures::irrational_offsets;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Lyapunov,
    Dominate,
    Entropy,
    PesinGap,
    SrbLike,
    RateBound,
    GraphTransform,
    BasinSweep,
    PropertySuite,
}

impl Scenario {
    pub const ALL: [Scenario; 9] = [
        Scenario::Lyapunov,
        Scenario::Dominate,
        Scenario::Entropy,
        Scenario::PesinGap,
        Scenario::SrbLike,
        Scenario::RateBound,
        Scenario::GraphTransform,
        Scenario::BasinSweep,
        Scenario::PropertySuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Lyapunov => "lyapunov",
            Scenario::Dominate => "dominate",
            Scenario::Entropy => "entropy",
            Scenario::PesinGap => "pesin-gap",
            Scenario::SrbLike => "srb-like",
            Scenario::RateBound => "rate-bound",
            Scenario::GraphTransform => "graph-transform",
            Scenario::BasinSweep => "basin-sweep",
            Scenario::PropertySuite => "property-suite",
        }
    }

    pub fn from_name(name: &str) -> std::result::Result<Scenario, Finding> {
        Scenario::ALL.into_iter().find(|s| s.name() == name).ok_or_else(|| Finding {
            key: name.to_string(),
            line: None,
            message: format!("unknown scenario `{name}`"),
            suggestion: suggest(name, Scenario::ALL.iter().map(|s| s.name())),
        })
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Kind {
    Choice(&'static [&'static str]),
    Float { min: f64, max: f64 },
    UInt { min: u64, max: u64 },
    Bool,
    FloatList { min: f64, max: f64 },
    UIntList { min: u64, max: u64 },
    /// `auto`, `origin` or comma-separated coordinates.
    Point,
    /// `auto` or a float in range.
    FloatOrAuto { min: f64, max: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct Knob {
    pub key: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub doc: &'static str,
    /// Scenarios the knob applies to; empty for global knobs.
    pub scope: &'static [Scenario],
}

use Scenario::*;

const MEASURE_SCOPE: &[Scenario] = &[Entropy, PesinGap, SrbLike, RateBound, BasinSweep];
const METRIC_SCOPE: &[Scenario] = &[SrbLike, RateBound, BasinSweep];
const ENTROPY_SCOPE: &[Scenario] = &[Entropy, PesinGap, RateBound];

pub static KNOBS: &[Knob] = &[
    Knob { key: "map", kind: Kind::Choice(&["cat", "perturbed_cat", "identity", "cat_circle"]), default: "cat", doc: "catalog map", scope: &[] },
    Knob { key: "map_eps", kind: Kind::Float { min: -0.1, max: 0.1 }, default: "0.05", doc: "shear strength of perturbed_cat", scope: &[] },
    Knob { key: "kappa", kind: Kind::Float { min: -10.0, max: 10.0 }, default: "0.3", doc: "fibre coupling of cat_circle", scope: &[] },
    Knob { key: "dim", kind: Kind::UInt { min: 2, max: 3 }, default: "2", doc: "torus dimension of identity", scope: &[] },
    Knob { key: "dim_f", kind: Kind::UInt { min: 1, max: 2 }, default: "1", doc: "dimension of the dominating bundle F", scope: &[] },
    Knob { key: "seed", kind: Kind::UInt { min: 0, max: u64::MAX }, default: "0", doc: "master seed", scope: &[] },
    Knob { key: "x0", kind: Kind::Point, default: "auto", doc: "base point; auto = fractional parts of sqrt(2), sqrt(3), sqrt(5)", scope: &[Lyapunov, GraphTransform] },
    Knob { key: "n", kind: Kind::UInt { min: 1, max: 1_000_000_000 }, default: "2000", doc: "orbit length", scope: &[Lyapunov] },
    Knob { key: "reorth_every", kind: Kind::UInt { min: 1, max: 1000 }, default: "1", doc: "QR re-orthonormalization period", scope: &[Lyapunov] },
    Knob { key: "transient", kind: Kind::UInt { min: 0, max: 1_000_000 }, default: "100", doc: "discarded warm-up steps", scope: &[Lyapunov] },
    Knob { key: "n_max", kind: Kind::UInt { min: 3, max: 500 }, default: "20", doc: "largest n in the domination fit", scope: &[Dominate] },
    Knob { key: "points_per_axis", kind: Kind::UInt { min: 1, max: 64 }, default: "4", doc: "sample grid for the domination fit", scope: &[Dominate] },
    Knob { key: "measure", kind: Kind::Choice(&["lebesgue", "dirac"]), default: "lebesgue", doc: "target or analysed measure", scope: MEASURE_SCOPE },
    Knob { key: "atom", kind: Kind::Point, default: "origin", doc: "atom of the dirac measure", scope: MEASURE_SCOPE },
    Knob { key: "k_axis", kind: Kind::UInt { min: 1, max: 1024 }, default: "16", doc: "partition cells per axis", scope: ENTROPY_SCOPE },
    Knob { key: "q", kind: Kind::UInt { min: 1, max: 64 }, default: "8", doc: "itinerary word length", scope: ENTROPY_SCOPE },
    Knob { key: "samples_per_axis", kind: Kind::UInt { min: 1, max: 10_000 }, default: "1000", doc: "Lebesgue grid per axis for entropy", scope: ENTROPY_SCOPE },
    Knob { key: "miller_madow", kind: Kind::Bool, default: "false", doc: "add the Miller-Madow correction", scope: ENTROPY_SCOPE },
    Knob { key: "strict", kind: Kind::Bool, default: "false", doc: "fail on severe undersampling", scope: ENTROPY_SCOPE },
    Knob { key: "exponent_per_axis", kind: Kind::UInt { min: 1, max: 256 }, default: "16", doc: "points per axis averaging the exponents", scope: &[PesinGap] },
    Knob { key: "lyapunov_n", kind: Kind::UInt { min: 1, max: 1_000_000 }, default: "2000", doc: "orbit length for exponents", scope: &[PesinGap] },
    Knob { key: "eps", kind: Kind::Float { min: 0.0, max: 10.0 }, default: "0.05", doc: "basin radius", scope: &[SrbLike] },
    Knob { key: "eps_list", kind: Kind::FloatList { min: 0.0, max: 10.0 }, default: "0.05", doc: "basin radii, decreasing", scope: &[RateBound, BasinSweep] },
    Knob { key: "ns", kind: Kind::UIntList { min: 1, max: 10_000_000 }, default: "10,50", doc: "orbit lengths, increasing", scope: METRIC_SCOPE },
    Knob { key: "grid", kind: Kind::UInt { min: 1, max: 4096 }, default: "64", doc: "initial-condition grid per axis", scope: METRIC_SCOPE },
    Knob { key: "sample", kind: Kind::Choice(&["grid", "halton"]), default: "grid", doc: "initial-condition sample", scope: METRIC_SCOPE },
    Knob { key: "halton_count", kind: Kind::UInt { min: 1, max: 10_000_000 }, default: "4096", doc: "points of the halton sample", scope: METRIC_SCOPE },
    Knob { key: "n_trunc", kind: Kind::UInt { min: 1, max: 30 }, default: "16", doc: "test-function truncation N", scope: METRIC_SCOPE },
    Knob { key: "psi", kind: Kind::Bool, default: "true", doc: "include the psi term in dist*", scope: METRIC_SCOPE },
    Knob { key: "tolerance", kind: Kind::Float { min: 0.0, max: 10.0 }, default: "0.05", doc: "slack in the rate bound", scope: &[RateBound] },
    Knob { key: "recipe", kind: Kind::Choice(&["random", "zero", "linear", "bilinear"]), default: "random", doc: "initial graph", scope: &[GraphTransform] },
    Knob { key: "slope", kind: Kind::Float { min: -0.49, max: 0.49 }, default: "0.3", doc: "slope of the linear recipe", scope: &[GraphTransform] },
    Knob { key: "bilinear_a", kind: Kind::Float { min: -100.0, max: 100.0 }, default: "2.0", doc: "coefficient of the bilinear recipe", scope: &[GraphTransform] },
    Knob { key: "disp", kind: Kind::Float { min: 0.0, max: 0.49 }, default: "0.2", doc: "dispersion of the random recipe", scope: &[GraphTransform] },
    Knob { key: "steps", kind: Kind::UInt { min: 1, max: 100 }, default: "10", doc: "number of graph transforms", scope: &[GraphTransform] },
    Knob { key: "nodes", kind: Kind::UInt { min: 33, max: 257 }, default: "33", doc: "grid nodes per axis (odd)", scope: &[GraphTransform, PropertySuite] },
    Knob { key: "delta", kind: Kind::FloatOrAuto { min: 0.0, max: 0.25 }, default: "auto", doc: "chart radius; auto = measured from the nonlinearity", scope: &[GraphTransform] },
    Knob { key: "nonlinearity_tol", kind: Kind::Float { min: 0.0, max: 1.0 }, default: "0.001", doc: "Jacobian variation allowed over a chart", scope: &[GraphTransform] },
    Knob { key: "ratio_eps", kind: Kind::Float { min: 0.0, max: 10.0 }, default: "0.2", doc: "epsilon of the Jacobian-ratio check", scope: &[GraphTransform] },
    Knob { key: "measure_pairs", kind: Kind::UInt { min: 1, max: 100_000 }, default: "100", doc: "random measure triples", scope: &[PropertySuite] },
    Knob { key: "shannon_trials", kind: Kind::UInt { min: 1, max: 1_000_000 }, default: "100", doc: "random joint distributions", scope: &[PropertySuite] },
    Knob { key: "graphs", kind: Kind::UInt { min: 2, max: 10_000 }, default: "50", doc: "seeded graphs", scope: &[PropertySuite] },
    Knob { key: "graph_steps", kind: Kind::UInt { min: 1, max: 100 }, default: "10", doc: "transforms per seeded graph", scope: &[PropertySuite] },
    Knob { key: "round_trip_points", kind: Kind::UInt { min: 1, max: 1_000_000 }, default: "1000", doc: "points per map for inverse and chain-rule checks", scope: &[PropertySuite] },
    Knob { key: "cocycle_points", kind: Kind::UInt { min: 1, max: 100_000 }, default: "100", doc: "points per map for the psi cocycle check", scope: &[PropertySuite] },
];

fn knob(key: &str) -> Option<&'static Knob> {
    KNOBS.iter().find(|k| k.key == key)
}

fn applies(k: &Knob, s: Scenario) -> bool {
    k.scope.is_empty() || k.scope.contains(&s)
}

/// A problem found in a config, with an optional replacement suggestion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Finding {
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
    pub suggestion: Option<String>,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        write!(f, "{}", self.message)?;
        if let Some(s) = &self.suggestion {
            write!(f, " (did you mean `{s}`?)")?;
        }
        Ok(())
    }
}

fn suggest<'a>(word: &str, candidates: impl Iterator<Item = &'a str>) -> Option<String> {
    candidates
        .map(|c| (strsim::jaro_winkler(word, c), c))
        .filter(|(s, _)| *s >= 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(a.1)))
        .map(|(_, c)| c.to_string())
}

/// Checks one raw value against its kind; `None` means valid.
fn check_value(k: &Knob, raw: &str) -> Option<String> {
    let float = |s: &str, min: f64, max: f64| -> Option<String> {
        match s.trim().parse::<f64>() {
            Ok(v) if v.is_finite() && v >= min && v <= max => None,
            Ok(v) => Some(format!("{v} outside [{min}, {max}]")),
            Err(_) => Some(format!("`{s}` is not a number")),
        }
    };
    let uint = |s: &str, min: u64, max: u64| -> Option<String> {
        match s.trim().parse::<u64>() {
            Ok(v) if v >= min && v <= max => None,
            Ok(v) => Some(format!("{v} outside [{min}, {max}]")),
            Err(_) => Some(format!("`{s}` is not a nonnegative integer")),
        }
    };
    let list = |f: &dyn Fn(&str) -> Option<String>| -> Option<String> {
        let items: Vec<&str> = raw.split(',').map(str::trim).collect();
        if items.iter().any(|s| s.is_empty()) {
            return Some("empty list entry".into());
        }
        items.iter().find_map(|s| f(s))
    };
    match k.kind {
        Kind::Choice(options) => (!options.contains(&raw)).then(|| format!("must be one of {options:?}")),
        Kind::Float { min, max } => float(raw, min, max),
        Kind::UInt { min, max } => uint(raw, min, max),
        Kind::Bool => (!matches!(raw, "true" | "false")).then(|| "must be true or false".into()),
        Kind::FloatList { min, max } => list(&|s| float(s, min, max)),
        Kind::UIntList { min, max } => list(&|s| uint(s, min, max)),
        Kind::Point => {
            if raw == "auto" || raw == "origin" {
                None
            } else {
                list(&|s| float(s, f64::MIN, f64::MAX))
            }
        }
        Kind::FloatOrAuto { min, max } => (raw != "auto").then(|| float(raw, min, max)).flatten(),
    }
}

/// Resolved configuration for one scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    values: BTreeMap<String, String>,
    explicit: BTreeSet<String>,
}

struct RawEntry {
    key: String,
    value: String,
    line: usize,
    section: Option<String>,
}

fn parse_lines(text: &str) -> (Vec<RawEntry>, Vec<Finding>) {
    let mut entries = Vec::new();
    let mut findings = Vec::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.split('#').next().unwrap_or("").trim();
        if t.is_empty() {
            continue;
        }
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let name = name.trim();
            if let Err(mut f) = Scenario::from_name(name) {
                f.line = Some(line);
                f.message = format!("unknown section [{name}]");
                findings.push(f);
            }
            section = Some(name.to_string());
            continue;
        }
        match t.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => entries.push(RawEntry {
                key: k.trim().to_string(),
                value: v.trim().to_string(),
                line,
                section: section.clone(),
            }),
            _ => findings.push(Finding {
                key: String::new(),
                line: Some(line),
                message: format!("expected `key = value`, got `{t}`"),
                suggestion: None,
            }),
        }
    }
    (entries, findings)
}

/// Every finding for `text` when run as `scenario`: syntax, unknown keys and
/// sections, duplicates, per-key ranges and cross-key checks.
pub fn validate_text(text: &str, scenario: Scenario) -> Vec<Finding> {
    match ExperimentConfig::parse(text, scenario) {
        Ok(cfg) => validate(&cfg),
        Err(findings) => findings,
    }
}

impl ExperimentConfig {
    /// All defaults for `scenario`.
    pub fn defaults(scenario: Scenario) -> ExperimentConfig {
        let values = KNOBS
            .iter()
            .filter(|k| applies(k, scenario))
            .map(|k| (k.key.to_string(), k.default.to_string()))
            .collect();
        ExperimentConfig { scenario, values, explicit: BTreeSet::new() }
    }

    /// Parses and validates; returns every finding on failure.
    pub fn parse(text: &str, scenario: Scenario) -> std::result::Result<ExperimentConfig, Vec<Finding>> {
        let (entries, mut findings) = parse_lines(text);
        let mut cfg = ExperimentConfig::defaults(scenario);
        let mut seen: BTreeSet<(Option<String>, String)> = BTreeSet::new();
        // Top level first, then the matching section, so sections override.
        let ordered = entries
            .iter()
            .filter(|e| e.section.is_none())
            .chain(entries.iter().filter(|e| e.section.as_deref() == Some(scenario.name())));
        for e in entries.iter() {
            if !seen.insert((e.section.clone(), e.key.clone())) {
                findings.push(Finding {
                    key: e.key.clone(),
                    line: Some(e.line),
                    message: format!("duplicate key `{}`", e.key),
                    suggestion: None,
                });
            }
            let section_scenario = e.section.as_deref().and_then(|s| Scenario::from_name(s).ok());
            let known = match (knob(&e.key), section_scenario) {
                (Some(k), Some(s)) => applies(k, s),
                (Some(_), None) => true,
                (None, _) => false,
            };
            if !known {
                let pool: Vec<&str> = KNOBS
                    .iter()
                    .filter(|k| section_scenario.is_none_or(|s| applies(k, s)))
                    .map(|k| k.key)
                    .collect();
                findings.push(Finding {
                    key: e.key.clone(),
                    line: Some(e.line),
                    message: match &e.section {
                        Some(s) => format!("unknown key `{}` in [{s}]", e.key),
                        None => format!("unknown key `{}`", e.key),
                    },
                    suggestion: suggest(&e.key, pool.into_iter()),
                });
            } else if let Some(msg) = knob(&e.key).and_then(|k| check_value(k, &e.value)) {
                findings.push(Finding { key: e.key.clone(), line: Some(e.line), message: format!("{}: {msg}", e.key), suggestion: None });
            }
        }
        for e in ordered {
            if let Some(k) = knob(&e.key) {
                if applies(k, scenario) {
                    cfg.values.insert(e.key.clone(), e.value.clone());
                    cfg.explicit.insert(e.key.clone());
                }
            }
        }
        if findings.is_empty() {
            findings = validate(&cfg);
        }
        if findings.is_empty() {
            Ok(cfg)
        } else {
            Err(findings)
        }
    }

    /// Overrides one knob (used for `--seed`).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = knob(key).ok_or_else(|| DomlabError::Config(format!("unknown key `{key}`")))?;
        if let Some(msg) = check_value(k, value) {
            return Err(DomlabError::Config(format!("{key}: {msg}")));
        }
        self.values.insert(key.to_string(), value.to_string());
        self.explicit.insert(key.to_string());
        Ok(())
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    pub fn raw(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| DomlabError::Config(format!("`{key}` does not apply to {}", self.scenario)))
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key)?;
        raw.trim().parse().map_err(|_| DomlabError::Config(format!("{key}: cannot parse `{raw}`")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.parse_as(key)
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.parse_as(key)
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.parse_as(key)
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        self.parse_as(key)
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.raw(key)
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.raw(key)?
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| DomlabError::Config(format!("{key}: bad entry `{s}`"))))
            .collect()
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>> {
        self.raw(key)?
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| DomlabError::Config(format!("{key}: bad entry `{s}`"))))
            .collect()
    }

    /// `None` for `auto`.
    pub fn f64_or_auto(&self, key: &str) -> Result<Option<f64>> {
        match self.raw(key)? {
            "auto" => Ok(None),
            _ => self.f64(key).map(Some),
        }
    }

    pub fn point(&self, key: &str, dim: usize) -> Result<TorusPoint> {
        match self.raw(key)? {
            "auto" => Ok(TorusPoint::new(&irrational_offsets()[..dim])),
            "origin" => Ok(TorusPoint::origin(dim)),
            _ => {
                let c = self.f64_list(key)?;
                if c.len() != dim {
                    return Err(DomlabError::Config(format!("{key} has {} coordinates, the map needs {dim}", c.len())));
                }
                Ok(TorusPoint::new(&c))
            }
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.u64("seed")
    }

    pub fn map(&self) -> Result<Diffeo> {
        let name = self.str("map")?;
        let mut params = BTreeMap::new();
        match name {
            "perturbed_cat" => {
                params.insert("eps".to_string(), self.f64("map_eps")?);
            }
            "cat_circle" => {
                params.insert("kappa".to_string(), self.f64("kappa")?);
            }
            "identity" => {
                params.insert("dim".to_string(), self.f64("dim")?);
            }
            _ => {}
        }
        Diffeo::from_spec(name, &params)
    }

    /// `scenario=…` followed by every resolved `key=value`, sorted.
    pub fn canonical_text(&self) -> String {
        let mut s = format!("scenario={}\n", self.scenario);
        for (k, v) in &self.values {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }
}

/// Cross-key checks on a parsed config.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut push = |key: &str, message: String| {
        out.push(Finding { key: key.to_string(), line: None, message, suggestion: None });
    };
    for (key, raw) in cfg.values() {
        if let Some(msg) = knob(key).and_then(|k| check_value(k, raw)) {
            push(key, format!("{key}: {msg}"));
        }
    }
    let map = match cfg.map() {
        Ok(m) => Some(m),
        Err(e) => {
            push("map", e.to_string());
            None
        }
    };
    if let (Some(m), Ok(df)) = (&map, cfg.usize("dim_f")) {
        if df >= m.dim() {
            push("dim_f", format!("dim_f = {df} leaves no room for E on T^{}", m.dim()));
        }
        for key in ["x0", "atom"] {
            if let Ok(raw) = cfg.raw(key) {
                if raw != "auto" && raw != "origin" && raw.split(',').count() != m.dim() {
                    push(key, format!("{key} needs {} coordinates", m.dim()));
                }
            }
        }
    }
    if let Ok(n) = cfg.usize("n_trunc") {
        let bound = 2.0 * 0.5f64.powi(n as i32);
        let mut check = |key: &str, eps: f64| {
            if !(eps > bound) {
                push(key, format!("eps below metric truncation error: {eps:e} <= 2*2^-{n} = {bound:e}"));
            }
        };
        if let Ok(e) = cfg.f64("eps") {
            check("eps", e);
        }
        if let Ok(list) = cfg.f64_list("eps_list") {
            for e in list {
                check("eps_list", e);
            }
        }
    }
    if let Ok(list) = cfg.f64_list("eps_list") {
        if list.windows(2).any(|w| w[0] <= w[1]) {
            push("eps_list", "eps_list must be strictly decreasing".into());
        }
    }
    if let Ok(ns) = cfg.usize_list("ns") {
        if ns.windows(2).any(|w| w[0] >= w[1]) {
            push("ns", "ns must be strictly increasing".into());
        }
    }
    if let Ok(nodes) = cfg.usize("nodes") {
        if nodes % 2 == 0 {
            push("nodes", format!("nodes must be odd, got {nodes}"));
        }
    }
    out
}

/// Documentation of every knob, one line each.
pub fn knob_reference() -> String {
    let mut s = String::new();
    for k in KNOBS {
        let scope = if k.scope.is_empty() {
            "all".to_string()
        } else {
            k.scope.iter().map(|s| s.name()).collect::<Vec<_>>().join(",")
        };
        s.push_str(&format!("{:<18} default {:<10} [{scope}] {}\n", k.key, k.default, k.doc));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_config_has_no_findings() {
        assert!(validate_text("map = cat\n[lyapunov]\nn = 2000\n", Scenario::Lyapunov).is_empty());
    }

    #[test]
    fn typo_gets_suggestion() {
        let f = validate_text("[srb-like]\nepsilom = 0.05\n", Scenario::SrbLike);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].suggestion.as_deref(), Some("eps"));
    }

    #[test]
    fn eps_below_truncation_is_reported() {
        let f = validate_text("[srb-like]\neps = 1e-6\nn_trunc = 16\n", Scenario::SrbLike);
        assert!(f.iter().any(|x| x.message.contains("eps below metric truncation error")));
    }

    #[test]
    fn section_overrides_top_level() {
        let cfg = ExperimentConfig::parse("n = 10\n[lyapunov]\nn = 20\n", Scenario::Lyapunov).unwrap();
        assert_eq!(cfg.usize("n").unwrap(), 20);
    }

    #[test]
    fn unknown_section_is_rejected() {
        let f = validate_text("[lyapunow]\nn = 5\n", Scenario::Lyapunov);
        assert_eq!(f[0].suggestion.as_deref(), Some("lyapunov"));
    }
}
