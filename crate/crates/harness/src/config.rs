//! Experiment configuration files.
//!
//! The format is TOML restricted to flat `key = value` pairs grouped in
//! sections:
//!
//! ```toml
//! [experiment]
//! model = "ou2d"
//! schemes = ["P", "W"]
//! steps = 1000000
//! replicas = 10
//! seed = 42
//! functions = ["phi"]
//!
//! [measure]
//! kind = "isotropic-power-law"
//! alpha = 1.0
//!
//! [schedule]
//! mode = "auto"
//!
//! [checkpoints]
//! per_decade = 25
//!
//! [targets]
//! phi = 3.9269908169872414
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use ergolevy::levy::{Atom, FiniteActivityMeasure, IsotropicPowerLaw, LevyMeasure};
use ergolevy::rates::{geometric_grid, DEFAULT_GAMMA1};
use ergolevy::{InnovationLaw, SchemeKind};
use toml::{Table, Value};

use crate::error::{HarnessError, Result};

/// A parsed document together with its source, for line lookups.
#[derive(Debug, Clone)]
pub struct Document {
    text: String,
    table: Table,
}

impl Document {
    pub fn parse(text: &str) -> Result<Document> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Config {
            line: e.span().map(|s| line_of(text, s.start)),
            msg: e.message().to_string(),
        })?;
        for (name, v) in &table {
            match v {
                Value::Table(section) => {
                    if let Some((key, _)) = section.iter().find(|(_, v)| v.is_table()) {
                        return Err(HarnessError::Config {
                            line: locate(text, Some(name), key),
                            msg: format!("nested table `{name}.{key}` is not allowed"),
                        });
                    }
                }
                _ => {
                    return Err(HarnessError::Config {
                        line: locate(text, None, name),
                        msg: format!("key `{name}` must be inside a section"),
                    })
                }
            }
        }
        Ok(Document { text: text.to_string(), table })
    }

    pub fn section(&self, name: &str) -> Option<Section<'_>> {
        match self.table.get_key_value(name) {
            Some((k, Value::Table(t))) => Some(Section { doc: self, name: k.as_str(), table: t }),
            _ => None,
        }
    }

    pub fn require(&self, name: &str) -> Result<Section<'_>> {
        self.section(name).ok_or_else(|| HarnessError::config(format!("missing section [{name}]")))
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.table.keys().map(String::as_str)
    }

    /// Every `section.key = value` in sorted order.
    pub fn flattened(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (name, v) in &self.table {
            if let Value::Table(t) = v {
                for (k, v) in t {
                    out.push((format!("{name}.{k}"), v.to_string()));
                }
            }
        }
        out
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Line of `key = …` in `[section]` (top level when `None`).
fn locate(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.split(']').next().map(|s| s.trim().to_string());
            continue;
        }
        if current.as_deref() != section {
            continue;
        }
        if let Some(rest) = line.strip_prefix(key) {
            let rest = rest.trim_start();
            if rest.starts_with('=') {
                return Some(i + 1);
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy)]
pub struct Section<'a> {
    doc: &'a Document,
    name: &'a str,
    table: &'a Table,
}

impl<'a> Section<'a> {
    fn err(&self, key: &str, msg: impl Into<String>) -> HarnessError {
        HarnessError::Config {
            line: locate(&self.doc.text, Some(self.name), key),
            msg: format!("{}.{key}: {}", self.name, msg.into()),
        }
    }

    /// Rejects keys outside `allowed`.
    pub fn only(&self, allowed: &[&str]) -> Result<()> {
        for key in self.table.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(self.err(key, format!("unknown key (expected one of: {})", allowed.join(", "))));
            }
        }
        Ok(())
    }

    pub fn keys(&self) -> impl Iterator<Item = &'a str> {
        self.table.keys().map(String::as_str)
    }

    pub fn has(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(v) => as_f64(v).map(Some).ok_or_else(|| self.err(key, "expected a number")),
        }
    }

    pub fn req_f64(&self, key: &str) -> Result<f64> {
        self.f64(key)?.ok_or_else(|| self.err(key, "missing"))
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(v) => as_u64(v).map(Some).ok_or_else(|| self.err(key, "expected a nonnegative integer")),
        }
    }

    pub fn str(&self, key: &str) -> Result<Option<&'a str>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(self.err(key, "expected a string")),
        }
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(self.err(key, "expected true or false")),
        }
    }

    pub fn strings(&self, key: &str) -> Result<Option<Vec<String>>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(vec![s.clone()])),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| v.as_str().map(str::to_string))
                .collect::<Option<Vec<_>>>()
                .map(Some)
                .ok_or_else(|| self.err(key, "expected an array of strings")),
            Some(_) => Err(self.err(key, "expected a string or an array of strings")),
        }
    }

    pub fn f64s(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(as_f64)
                .collect::<Option<Vec<_>>>()
                .map(Some)
                .ok_or_else(|| self.err(key, "expected an array of numbers")),
            Some(_) => Err(self.err(key, "expected an array of numbers")),
        }
    }

    pub fn u64s(&self, key: &str) -> Result<Option<Vec<u64>>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(as_u64)
                .collect::<Option<Vec<_>>>()
                .map(Some)
                .ok_or_else(|| self.err(key, "expected an array of nonnegative integers")),
            Some(_) => Err(self.err(key, "expected an array of nonnegative integers")),
        }
    }

    pub fn rows(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Array(rows)) => rows
                .iter()
                .map(|r| r.as_array().and_then(|r| r.iter().map(as_f64).collect::<Option<Vec<_>>>()))
                .collect::<Option<Vec<_>>>()
                .map(Some)
                .ok_or_else(|| self.err(key, "expected an array of numeric arrays")),
            Some(_) => Err(self.err(key, "expected an array of numeric arrays")),
        }
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_u64(v: &Value) -> Option<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Some(*i as u64),
        Value::Float(f) if *f >= 0.0 && f.fract() == 0.0 && *f < 9.007_199_254_740_992e15 => Some(*f as u64),
        _ => None,
    }
}

/// A measure declaration.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSpec {
    /// `kind = "isotropic-power-law"`, `alpha`, optional `tail_exponent`.
    PowerLaw { alpha: f64, tail_exponent: f64 },
    /// `kind = "finite-activity-atoms"`, `atoms = [[mass, y…], …]`.
    Atoms(Vec<Atom>),
    /// `kind = "isotropic-tail"`, optional `radius` and `exponent`.
    IsotropicTail { radius: f64, exponent: f64 },
}

impl MeasureSpec {
    pub fn from_section(s: &Section<'_>) -> Result<MeasureSpec> {
        let kind = s.str("kind")?.ok_or_else(|| s.err("kind", "missing"))?;
        match kind {
            "isotropic-power-law" => {
                s.only(&["kind", "alpha", "tail_exponent"])?;
                Ok(MeasureSpec::PowerLaw {
                    alpha: s.req_f64("alpha")?,
                    tail_exponent: s.f64("tail_exponent")?.unwrap_or(IsotropicPowerLaw::DEFAULT_TAIL_EXPONENT),
                })
            }
            "finite-activity-atoms" => {
                s.only(&["kind", "atoms"])?;
                let rows = s.rows("atoms")?.ok_or_else(|| s.err("atoms", "missing"))?;
                let atoms = rows
                    .into_iter()
                    .map(|r| match r.split_first() {
                        Some((&mass, jump)) if !jump.is_empty() => Ok(Atom { mass, jump: jump.to_vec() }),
                        _ => Err(s.err("atoms", "each atom is [mass, y1, y2, …]")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(MeasureSpec::Atoms(atoms))
            }
            "isotropic-tail" => {
                s.only(&["kind", "radius", "exponent"])?;
                Ok(MeasureSpec::IsotropicTail {
                    radius: s.f64("radius")?.unwrap_or(1.0),
                    exponent: s.f64("exponent")?.unwrap_or(8.0),
                })
            }
            other => Err(s.err(
                "kind",
                format!("unknown measure `{other}` (isotropic-power-law, finite-activity-atoms, isotropic-tail)"),
            )),
        }
    }

    pub fn build(&self) -> Result<Arc<dyn LevyMeasure>> {
        Ok(match self {
            MeasureSpec::PowerLaw { alpha, tail_exponent } => {
                Arc::new(IsotropicPowerLaw::with_tail_exponent(*alpha, *tail_exponent)?)
            }
            MeasureSpec::Atoms(atoms) => Arc::new(FiniteActivityMeasure::atoms(atoms.clone())?),
            MeasureSpec::IsotropicTail { radius, exponent } => {
                Arc::new(FiniteActivityMeasure::isotropic_tail(*radius, *exponent)?)
            }
        })
    }

    pub fn describe(&self) -> String {
        match self {
            MeasureSpec::PowerLaw { alpha, tail_exponent } => {
                format!("isotropic-power-law alpha={alpha} tail_exponent={tail_exponent}")
            }
            MeasureSpec::Atoms(atoms) => format!("finite-activity-atoms n_atoms={}", atoms.len()),
            MeasureSpec::IsotropicTail { radius, exponent } => {
                format!("isotropic-tail radius={radius} exponent={exponent}")
            }
        }
    }
}

/// Parses a document holding just a `[measure]` section.
pub fn parse_measure(text: &str) -> Result<MeasureSpec> {
    let doc = Document::parse(text)?;
    MeasureSpec::from_section(&doc.require("measure")?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleSpec {
    /// Resolved per scheme by the planner.
    Auto { gamma1: f64 },
    Explicit { gamma1: f64, zeta: f64, r: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckpointSpec {
    Geometric { per_decade: u32, first: u64 },
    List(Vec<u64>),
}

impl CheckpointSpec {
    pub const DEFAULT_PER_DECADE: u32 = 25;

    /// Checkpoints within `[1, n_steps]`; always ends at `n_steps`.
    pub fn resolve(&self, n_steps: u64) -> Vec<u64> {
        let mut out: Vec<u64> = match self {
            CheckpointSpec::Geometric { per_decade, first } => {
                geometric_grid((*first).clamp(1, n_steps), n_steps, *per_decade)
            }
            CheckpointSpec::List(l) => l.iter().copied().filter(|&n| n >= 1 && n <= n_steps).collect(),
        };
        out.sort_unstable();
        out.dedup();
        if out.last() != Some(&n_steps) {
            out.push(n_steps);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: String,
    pub measure: MeasureSpec,
    pub schemes: Vec<SchemeKind>,
    pub schedule: ScheduleSpec,
    /// `None` disables the cap.
    pub u_cap: Option<f64>,
    pub steps: u64,
    pub replicas: u64,
    pub checkpoints: CheckpointSpec,
    pub seed: u64,
    pub functions: Vec<String>,
    pub targets: BTreeMap<String, f64>,
    pub x0: Option<Vec<f64>>,
    pub innovation: InnovationLaw,
    /// Run even if the resolved schedule fails the complexity guard.
    pub allow_guard_violation: bool,
    /// Entries of the source file, echoed into outputs.
    pub source: Vec<(String, String)>,
}

const EXPERIMENT_KEYS: &[&str] = &[
    "model",
    "scheme",
    "schemes",
    "steps",
    "replicas",
    "seed",
    "functions",
    "x0",
    "innovation",
    "allow_guard_violation",
];

impl ExperimentConfig {
    pub fn from_document(doc: &Document) -> Result<ExperimentConfig> {
        for name in doc.section_names() {
            if !["experiment", "measure", "schedule", "checkpoints", "targets"].contains(&name) {
                return Err(HarnessError::Config {
                    line: doc.text.lines().position(|l| l.trim().starts_with(&format!("[{name}"))).map(|i| i + 1),
                    msg: format!("unknown section [{name}]"),
                });
            }
        }
        let e = doc.require("experiment")?;
        e.only(EXPERIMENT_KEYS)?;
        let model = e.str("model")?.unwrap_or("ou2d").to_string();
        let scheme_names = match (e.strings("schemes")?, e.strings("scheme")?) {
            (Some(_), Some(_)) => return Err(e.err("scheme", "give either `scheme` or `schemes`")),
            (Some(s), None) | (None, Some(s)) => s,
            (None, None) => return Err(e.err("schemes", "missing")),
        };
        let mut schemes = Vec::new();
        for name in &scheme_names {
            let kind: SchemeKind = name.parse().map_err(|err: ergolevy::Error| e.err("schemes", err.to_string()))?;
            if schemes.contains(&kind) {
                return Err(e.err("schemes", format!("scheme {kind} listed twice")));
            }
            schemes.push(kind);
        }
        if schemes.is_empty() {
            return Err(e.err("schemes", "at least one scheme is required"));
        }
        let steps = e.u64("steps")?.unwrap_or(1_000_000);
        if steps == 0 {
            return Err(e.err("steps", "must be at least 1"));
        }
        let replicas = e.u64("replicas")?.unwrap_or(10);
        if replicas == 0 {
            return Err(e.err("replicas", "must be at least 1"));
        }
        let innovation = match e.str("innovation")?.unwrap_or("gaussian") {
            "gaussian" => InnovationLaw::Gaussian,
            "rademacher-product" => InnovationLaw::RademacherProduct,
            other => return Err(e.err("innovation", format!("unknown law `{other}`"))),
        };
        let x0 = e.f64s("x0")?;
        if x0.as_ref().is_some_and(|x| x.iter().any(|v| !v.is_finite())) {
            return Err(e.err("x0", "must be finite"));
        }

        let measure = MeasureSpec::from_section(&doc.require("measure")?)?;

        let (schedule, u_cap) = match doc.section("schedule") {
            None => (ScheduleSpec::Auto { gamma1: DEFAULT_GAMMA1 }, Some(1.0)),
            Some(s) => {
                s.only(&["mode", "gamma1", "zeta", "r", "u_cap"])?;
                let gamma1 = s.f64("gamma1")?;
                if gamma1.is_some_and(|g| !(g > 0.0 && g.is_finite())) {
                    return Err(s.err("gamma1", "must be positive"));
                }
                let mode = s.str("mode")?.unwrap_or(if s.has("zeta") { "explicit" } else { "auto" });
                let schedule = match mode {
                    "auto" => {
                        if s.has("zeta") || s.has("r") {
                            return Err(s.err("mode", "auto schedules take no `zeta` or `r`"));
                        }
                        ScheduleSpec::Auto { gamma1: gamma1.unwrap_or(DEFAULT_GAMMA1) }
                    }
                    "explicit" => ScheduleSpec::Explicit {
                        gamma1: gamma1.unwrap_or(1.0),
                        zeta: s.req_f64("zeta")?,
                        r: s.req_f64("r")?,
                    },
                    other => return Err(s.err("mode", format!("expected auto or explicit, got `{other}`"))),
                };
                let u_cap = match s.table.get("u_cap") {
                    Some(Value::String(v)) if v == "none" => None,
                    Some(_) => {
                        let c = s.req_f64("u_cap")?;
                        if !(c > 0.0) {
                            return Err(s.err("u_cap", "must be positive"));
                        }
                        Some(c)
                    }
                    None => Some(1.0),
                };
                (schedule, u_cap)
            }
        };

        let checkpoints = match doc.section("checkpoints") {
            None => CheckpointSpec::Geometric { per_decade: CheckpointSpec::DEFAULT_PER_DECADE, first: 1 },
            Some(c) => {
                c.only(&["per_decade", "first", "list"])?;
                match c.u64s("list")? {
                    Some(list) => {
                        if c.has("per_decade") || c.has("first") {
                            return Err(c.err("list", "an explicit list excludes per_decade and first"));
                        }
                        if list.windows(2).any(|w| w[0] >= w[1]) || list.first() == Some(&0) {
                            return Err(c.err("list", "must be positive and strictly increasing"));
                        }
                        CheckpointSpec::List(list)
                    }
                    None => {
                        let per_decade = c.u64("per_decade")?.unwrap_or(CheckpointSpec::DEFAULT_PER_DECADE as u64);
                        if per_decade == 0 || per_decade > 1000 {
                            return Err(c.err("per_decade", "must lie in [1, 1000]"));
                        }
                        CheckpointSpec::Geometric {
                            per_decade: per_decade as u32,
                            first: c.u64("first")?.unwrap_or(1).max(1),
                        }
                    }
                }
            }
        };

        let mut targets = BTreeMap::new();
        if let Some(t) = doc.section("targets") {
            for key in t.keys() {
                let v = t.req_f64(key)?;
                if !v.is_finite() {
                    return Err(t.err(key, "target must be finite"));
                }
                targets.insert(key.to_string(), v);
            }
        }
        let functions = e.strings("functions")?.unwrap_or_else(|| vec!["phi".to_string()]);
        if functions.is_empty() {
            return Err(e.err("functions", "at least one test function is required"));
        }

        Ok(ExperimentConfig {
            model,
            measure,
            schemes,
            schedule,
            u_cap,
            steps,
            replicas,
            checkpoints,
            seed: e.u64("seed")?.unwrap_or(0),
            functions,
            targets,
            x0,
            innovation,
            allow_guard_violation: e.bool("allow_guard_violation")?.unwrap_or(false),
            source: doc.flattened(),
        })
    }

    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        Self::from_document(&Document::parse(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
[experiment]
model = "ou2d"
schemes = ["P", "W"]
steps = 1e6
replicas = 10
seed = 42
functions = ["phi", "af_phi"]

[measure]
kind = "isotropic-power-law"
alpha = 1

[schedule]
mode = "auto"

[checkpoints]
per_decade = 25

[targets]
phi = 3.9269908169872414
"#;

    #[test]
    fn full_document() {
        let c = ExperimentConfig::parse(FULL).unwrap();
        assert_eq!(c.schemes, vec![SchemeKind::P, SchemeKind::W]);
        assert_eq!(c.steps, 1_000_000);
        assert_eq!(c.measure, MeasureSpec::PowerLaw { alpha: 1.0, tail_exponent: 8.0 });
        assert_eq!(c.schedule, ScheduleSpec::Auto { gamma1: DEFAULT_GAMMA1 });
        assert_eq!(c.targets["phi"], 3.9269908169872414);
        assert!(c.source.iter().any(|(k, v)| k == "experiment.seed" && v == "42"));
    }

    #[test]
    fn atoms_and_tail() {
        let m = parse_measure("[measure]\nkind = \"finite-activity-atoms\"\natoms = [[2, 1, 0], [1, -3, 0]]\n").unwrap();
        match m {
            MeasureSpec::Atoms(a) => {
                assert_eq!(a.len(), 2);
                assert_eq!(a[1].jump, vec![-3.0, 0.0]);
            }
            other => panic!("{other:?}"),
        }
        let m = parse_measure("[measure]\nkind = \"isotropic-tail\"\n").unwrap();
        assert_eq!(m, MeasureSpec::IsotropicTail { radius: 1.0, exponent: 8.0 });
        assert!(m.build().is_ok());
    }

    fn line(err: HarnessError) -> Option<usize> {
        match err {
            HarnessError::Config { line, .. } => line,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_carry_lines() {
        let bad = "[experiment]\nschemes = [\"W\"]\nsteps = -3\n[measure]\nkind = \"isotropic-tail\"\n";
        assert_eq!(line(ExperimentConfig::parse(bad).unwrap_err()), Some(3));
        let bad = "[experiment]\nschemes = [\"Q\"]\n[measure]\nkind = \"isotropic-tail\"\n";
        assert_eq!(line(ExperimentConfig::parse(bad).unwrap_err()), Some(2));
        let bad = "[measure]\nkind = \"isotropic-power-law\"\nalpha = 1.0\nbeta = 2\n";
        assert_eq!(line(parse_measure(bad).unwrap_err()), Some(4));
        let bad = "[measure]\nkind = = 3\n";
        assert_eq!(line(parse_measure(bad).unwrap_err()), Some(2));
        let bad = "alpha = 1\n";
        assert_eq!(line(parse_measure(bad).unwrap_err()), Some(1));
        let bad = "[experiment]\nschemes = \"W\"\n[measure]\nkind = \"isotropic-tail\"\n[extra]\nx = 1\n";
        assert_eq!(line(ExperimentConfig::parse(bad).unwrap_err()), Some(5));
    }

    #[test]
    fn explicit_schedule_and_list() {
        let text = "[experiment]\nscheme = \"E\"\nsteps = 100\n[measure]\nkind = \"isotropic-tail\"\n\
                    [schedule]\ngamma1 = 0.2\nzeta = 0.5\nr = 1\nu_cap = \"none\"\n[checkpoints]\nlist = [10, 50]\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.schedule, ScheduleSpec::Explicit { gamma1: 0.2, zeta: 0.5, r: 1.0 });
        assert_eq!(c.u_cap, None);
        assert_eq!(c.checkpoints.resolve(100), vec![10, 50, 100]);
        assert_eq!(c.checkpoints.resolve(20), vec![10, 20]);
    }

    #[test]
    fn geometric_checkpoints_end_at_the_horizon() {
        let g = CheckpointSpec::Geometric { per_decade: 25, first: 1 }.resolve(1000);
        assert_eq!(g.first(), Some(&1));
        assert_eq!(g.last(), Some(&1000));
        assert_eq!(CheckpointSpec::Geometric { per_decade: 25, first: 1 }.resolve(1), vec![1]);
    }
}
