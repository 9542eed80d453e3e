//! Reproducible Monte Carlo experiments and report emission.
//!
//! Every experiment maps a sample index to an independent job (seeds come from
//! [`derive_seed`]), collects results in index order and folds them
//! sequentially, so outputs do not depend on the thread count.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::analytic::{coeff_c, func_big_l, func_l, prob_g};
use crate::error::{Error, Result};
use crate::geom::{BBox, Point};
use crate::intersection::{intersection_measure_binned, local_time, Kernel};
use crate::paths::{decompose, derive_seed, simulate_bm, ClosedCurve, PlanarPath, StreamRole};
use crate::quadrature::QuadratureConfig;
use crate::regions::{
    joint_area, joint_areas, level_set_areas, measure_from_region, piecewise_sum, sandwich_check, Floor,
    LevelMode, RegionEstimate, ResolutionPolicy,
};
use crate::sum::KahanSum;
use crate::transport::{d1, downsample};
use crate::winding::{winding_field, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    WindingField,
    Area,
    LocalTime,
    Theorem1,
    MeanStudy,
    Theorem2,
    Sandwich,
    Tabulate,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Simulate,
        Experiment::WindingField,
        Experiment::Area,
        Experiment::LocalTime,
        Experiment::Theorem1,
        Experiment::MeanStudy,
        Experiment::Theorem2,
        Experiment::Sandwich,
        Experiment::Tabulate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::WindingField => "winding-field",
            Experiment::Area => "area",
            Experiment::LocalTime => "local-time",
            Experiment::Theorem1 => "theorem1",
            Experiment::MeanStudy => "mean-study",
            Experiment::Theorem2 => "theorem2",
            Experiment::Sandwich => "sandwich",
            Experiment::Tabulate => "tabulate",
        }
    }

    fn default_samples(self) -> usize {
        match self {
            Experiment::Theorem1 => 400,
            Experiment::MeanStudy => 2000,
            Experiment::Theorem2 => 100,
            Experiment::Sandwich => 50,
            _ => 1,
        }
    }

    fn default_levels(self) -> Vec<i32> {
        match self {
            Experiment::MeanStudy => vec![8, 16],
            Experiment::Sandwich => vec![64],
            Experiment::Area | Experiment::Simulate | Experiment::WindingField | Experiment::LocalTime => vec![2],
            Experiment::Tabulate => vec![2, 4, 8, 16, 32],
            Experiment::Theorem1 | Experiment::Theorem2 => vec![4, 8, 16],
        }
    }

    /// Experiments whose `(n, m)` schedule is subject to the pairing hypotheses.
    fn paired(self, mode: StudyMode) -> bool {
        match self {
            Experiment::Theorem1 | Experiment::Theorem2 | Experiment::Sandwich => true,
            Experiment::MeanStudy => mode == StudyMode::Joint,
            _ => false,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyMode {
    Single,
    Joint,
}

/// Reference function for `tabulate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Table {
    #[serde(rename = "l")]
    SmallL,
    #[serde(rename = "L")]
    BigL,
    #[serde(rename = "g_n")]
    G,
    #[serde(rename = "C_n")]
    C,
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub kind: Experiment,
    pub seed: u64,
    pub samples: usize,
    pub steps: usize,
    pub n: Vec<i32>,
    pub m: Vec<i32>,
    /// Number of pieces; `None` means `max(2, round(m^{1/5}))`.
    pub t: Option<usize>,
    pub x: Point,
    pub y: Point,
    /// Quadtree floor as a fraction of the bounding-box diameter.
    pub resolution: f64,
    pub max_cells: usize,
    /// Kernel scale; `None` means `steps^{2/5}`.
    pub scale: Option<f64>,
    pub kernel: Kernel,
    /// Time grid used for intersection local time (paths are coarsened to it).
    pub ell_steps: usize,
    /// Atom budget per measure before transport.
    pub atoms: usize,
    /// Lattice side for binning the intersection measure.
    pub bin: f64,
    /// Sandwich parameter; `None` means `ceil(sqrt(n))`.
    pub p: Option<i32>,
    /// Random query points per sample and path for the pointwise sandwich check.
    pub points: usize,
    pub mode: StudyMode,
    pub level: LevelMode,
    pub which: Table,
    pub r_min: f64,
    pub r_max: f64,
    pub r_points: usize,
    pub grid_n: usize,
    pub c1: f64,
    pub c2: f64,
    pub record_runtime: bool,
    #[serde(skip)]
    pub out: PathBuf,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub steps: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Parses flat `key = value` text with `#` comments.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected 'key = value', got '{line}'", i + 1)));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{k}'", i + 1)));
        }
    }
    Ok(map)
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<i32>> {
    v.split(',').map(|s| parse_num(key, s.trim())).collect()
}

fn parse_point(key: &str, v: &str) -> Result<Point> {
    let parts: Vec<&str> = v.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
    if parts.len() != 2 {
        return Err(Error::Config(format!("{key}: expected two coordinates, got '{v}'")));
    }
    Ok(Point::new(parse_num(key, parts[0])?, parse_num(key, parts[1])?))
}

fn parse_auto<T: FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_num(key, v).map(Some)
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got '{v}'"))),
    }
}

impl ExperimentConfig {
    pub fn defaults(kind: Experiment) -> Self {
        let n = kind.default_levels();
        ExperimentConfig {
            kind,
            seed: 0,
            samples: kind.default_samples(),
            steps: 1 << 18,
            m: n.clone(),
            n,
            t: None,
            x: Point::ORIGIN,
            y: Point::ORIGIN,
            resolution: 2f64.powi(-14),
            max_cells: 10_000_000,
            scale: None,
            kernel: Kernel::Gaussian,
            ell_steps: 4096,
            atoms: 2000,
            bin: 1.0 / 128.0,
            p: None,
            points: 1000,
            mode: StudyMode::Single,
            level: LevelMode::AtLeast,
            which: Table::SmallL,
            r_min: 0.25,
            r_max: 2.0,
            r_points: 8,
            grid_n: 256,
            c1: 0.5,
            c2: 2.0,
            record_runtime: false,
            out: PathBuf::from("out"),
        }
    }

    /// Builds and validates a config from file text plus overrides.
    pub fn from_text(kind: Experiment, text: &str, ov: &Overrides) -> Result<Self> {
        let mut cfg = ExperimentConfig::defaults(kind);
        let mut m_given = false;
        for (k, v) in parse_key_values(text)? {
            let v = v.as_str();
            match k.as_str() {
                "seed" => cfg.seed = parse_num(&k, v)?,
                "samples" => cfg.samples = parse_num(&k, v)?,
                "steps" => cfg.steps = parse_num(&k, v)?,
                "n" => cfg.n = parse_list(&k, v)?,
                "m" => {
                    cfg.m = parse_list(&k, v)?;
                    m_given = true;
                }
                "t" => cfg.t = parse_auto(&k, v)?,
                "x" => cfg.x = parse_point(&k, v)?,
                "y" => cfg.y = parse_point(&k, v)?,
                "resolution" => cfg.resolution = parse_num(&k, v)?,
                "max_cells" => cfg.max_cells = parse_num(&k, v)?,
                "scale" => cfg.scale = parse_auto(&k, v)?,
                "kernel" => cfg.kernel = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
                "ell_steps" => cfg.ell_steps = parse_num(&k, v)?,
                "atoms" => cfg.atoms = parse_num(&k, v)?,
                "bin" => cfg.bin = parse_num(&k, v)?,
                "p" => cfg.p = parse_auto(&k, v)?,
                "points" => cfg.points = parse_num(&k, v)?,
                "mode" => {
                    cfg.mode = match v {
                        "single" => StudyMode::Single,
                        "joint" => StudyMode::Joint,
                        _ => return Err(Error::Config(format!("mode: expected single or joint, got '{v}'"))),
                    }
                }
                "level" => {
                    cfg.level = match v {
                        "at_least" => LevelMode::AtLeast,
                        "exactly" => LevelMode::Exactly,
                        "abs_at_least" => LevelMode::AbsAtLeast,
                        _ => return Err(Error::Config(format!("level: unknown mode '{v}'"))),
                    }
                }
                "which" => {
                    cfg.which = match v {
                        "l" => Table::SmallL,
                        "L" => Table::BigL,
                        "g_n" => Table::G,
                        "C_n" => Table::C,
                        _ => return Err(Error::Config(format!("which: expected l, L, g_n or C_n, got '{v}'"))),
                    }
                }
                "r_min" => cfg.r_min = parse_num(&k, v)?,
                "r_max" => cfg.r_max = parse_num(&k, v)?,
                "r_points" => cfg.r_points = parse_num(&k, v)?,
                "grid_n" => cfg.grid_n = parse_num(&k, v)?,
                "c1" => cfg.c1 = parse_num(&k, v)?,
                "c2" => cfg.c2 = parse_num(&k, v)?,
                "record_runtime" => cfg.record_runtime = parse_bool(&k, v)?,
                "out" => cfg.out = PathBuf::from(v),
                _ => return Err(Error::Config(format!("unknown key '{k}'"))),
            }
        }
        if !m_given {
            cfg.m = cfg.n.clone();
        }
        if let Some(s) = ov.seed {
            cfg.seed = s;
        }
        if let Some(s) = ov.samples {
            cfg.samples = s;
        }
        if let Some(s) = ov.steps {
            cfg.steps = s;
        }
        if let Some(o) = &ov.out {
            cfg.out = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(kind: Experiment, path: &Path, ov: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_text(kind, &text, ov)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.samples == 0 {
            return bad("samples must be positive".into());
        }
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        if self.n.is_empty() || self.m.is_empty() {
            return bad("n and m schedules must be nonempty".into());
        }
        if !(self.resolution > 0.0 && self.resolution < 1.0) {
            return bad(format!("resolution must lie in (0, 1), got {}", self.resolution));
        }
        if self.max_cells == 0 {
            return bad("max_cells must be positive".into());
        }
        if let Some(s) = self.scale {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("scale must be positive, got {s}"));
            }
        }
        if self.ell_steps == 0 || (self.steps > self.ell_steps && self.steps % self.ell_steps != 0) {
            return bad(format!("ell_steps = {} must divide steps = {}", self.ell_steps, self.steps));
        }
        if self.atoms == 0 {
            return bad("atoms must be positive".into());
        }
        if !(self.bin > 0.0 && self.bin.is_finite()) {
            return bad(format!("bin must be positive, got {}", self.bin));
        }
        if self.grid_n == 0 {
            return bad("grid_n must be positive".into());
        }

        match self.kind {
            Experiment::Tabulate => {
                if self.r_points == 0 || !(self.r_max >= self.r_min) || !self.r_max.is_finite() {
                    return bad("tabulate needs r_points >= 1 and r_min <= r_max".into());
                }
                let singular = matches!(self.which, Table::SmallL | Table::G);
                if self.r_min < 0.0 || (singular && self.r_min <= 0.0) {
                    return bad(format!("r_min = {} outside the domain of the tabulated function", self.r_min));
                }
                if self.n.iter().any(|&n| n < 2) {
                    return bad("tabulated C_n and g_n need n >= 2".into());
                }
                return Ok(());
            }
            Experiment::Area | Experiment::Simulate | Experiment::WindingField | Experiment::LocalTime => {
                if self.n.iter().chain(&self.m).any(|&k| k < 1) {
                    return bad("winding levels must be at least 1".into());
                }
            }
            _ => {
                if self.n.iter().chain(&self.m).any(|&k| k < 2) {
                    return bad("hypothesis n, m >= 2 violated".into());
                }
            }
        }

        if self.kind.paired(self.mode) || (self.kind == Experiment::Area && self.mode == StudyMode::Joint) {
            if self.n.len() != self.m.len() {
                return bad(format!("n and m schedules differ in length: {} vs {}", self.n.len(), self.m.len()));
            }
        }
        if self.kind.paired(self.mode) {
            for w in self.n.windows(2).zip(self.m.windows(2)) {
                let ((n0, n1), (m0, m1)) = ((w.0[0], w.0[1]), (w.1[0], w.1[1]));
                if n1 < n0 || m1 < m0 {
                    return bad(format!(
                        "hypothesis 'm non-decreasing in n' violated between ({n0}, {m0}) and ({n1}, {m1})"
                    ));
                }
            }
            for (&n, &m) in self.n.iter().zip(&self.m) {
                let (nf, mf) = (f64::from(n), f64::from(m));
                if !(nf.powf(self.c1) < mf && mf <= nf.powf(self.c2)) {
                    return bad(format!(
                        "hypothesis n^c1 < m <= n^c2 violated at (n, m) = ({n}, {m}) with c1 = {}, c2 = {}",
                        self.c1, self.c2
                    ));
                }
            }
        }

        if matches!(self.kind, Experiment::Sandwich) {
            for (&n, &m) in self.n.iter().zip(&self.m) {
                let t = self.pieces(m);
                if self.steps % t != 0 {
                    return bad(format!("T = {t} does not divide steps = {}", self.steps));
                }
                for (lvl, p) in [(n, self.p_for(n)), (m, self.p_for(m))] {
                    if lvl as i64 <= 3 * t as i64 * (i64::from(p) + 1) {
                        return bad(format!(
                            "precondition n/3 > T(p+1) violated: level {lvl}, T = {t}, p = {p}"
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// `T` for a given `m`.
    pub fn pieces(&self, m: i32) -> usize {
        self.t.unwrap_or_else(|| (f64::from(m).powf(0.2).round() as usize).max(2))
    }

    fn p_for(&self, n: i32) -> i32 {
        self.p.unwrap_or_else(|| f64::from(n).sqrt().ceil() as i32)
    }

    pub fn pairs(&self) -> Vec<(i32, i32)> {
        self.n.iter().copied().zip(self.m.iter().copied()).collect()
    }

    pub fn kernel_scale(&self) -> f64 {
        self.scale.unwrap_or_else(|| (self.steps as f64).powf(0.4))
    }

    fn policy(&self) -> ResolutionPolicy {
        ResolutionPolicy { floor: Floor::Relative(self.resolution), max_cells: self.max_cells, ..Default::default() }
    }

    /// Canonical JSON of the settings, with a SHA-256 `hash` of that JSON.
    pub fn to_json(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let digest = Sha256::digest(v.to_string().as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        v["hash"] = Value::String(hex);
        v
    }
}

/// Output of one experiment: the rows plus any extra files, not yet written.
#[derive(Debug, Clone)]
pub struct Report {
    pub config: Value,
    pub rows: Vec<Map<String, Value>>,
    /// Per-sample values, ordered by sample index.
    pub per_sample: Vec<Map<String, Value>>,
    /// Extra artifacts as `(file name, bytes)`.
    pub files: Vec<(String, Vec<u8>)>,
    pub runtime_s: f64,
}

impl Report {
    /// `{config, rows, runtime_s}`; `runtime_s` is null unless requested.
    pub fn results_json(&self, with_runtime: bool) -> Value {
        json!({
            "config": self.config,
            "rows": self.rows,
            "runtime_s": if with_runtime { json!(self.runtime_s) } else { Value::Null },
        })
    }

    /// Writes results.json, rows.csv, samples.csv (if any), timing.json and
    /// the extra files into `dir`.
    pub fn write(&self, dir: &Path, with_runtime: bool) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut text = serde_json::to_string_pretty(&self.results_json(with_runtime))?;
        text.push('\n');
        std::fs::write(dir.join("results.json"), text)?;
        std::fs::write(dir.join("rows.csv"), rows_csv(&self.rows))?;
        if !self.per_sample.is_empty() {
            std::fs::write(dir.join("samples.csv"), rows_csv(&self.per_sample))?;
        }
        std::fs::write(dir.join("timing.json"), format!("{{\"runtime_s\": {}}}\n", self.runtime_s))?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}

/// CSV with the union of keys as header (sorted); nested values as JSON text.
pub fn rows_csv(rows: &[Map<String, Value>]) -> String {
    let mut keys: Vec<&String> = rows.iter().flat_map(|r| r.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut out = keys.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(",");
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = keys
            .iter()
            .map(|k| match r.get(*k) {
                None | Some(Value::Null) => String::new(),
                Some(Value::String(s)) => csv_escape(s),
                Some(v) => csv_escape(&v.to_string()),
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Sample mean and standard error (`None` below two samples).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub se: Option<f64>,
}

pub fn stats(xs: &[f64]) -> Stats {
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<KahanSum>().value() / n;
    let se = (xs.len() > 1).then(|| {
        let ss: KahanSum = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        (ss.value() / (n - 1.0)).sqrt() / n.sqrt()
    });
    Stats { mean, se }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Least-squares slope of `ln y` against `ln x`; `None` without two usable points.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Row builder that refuses non-finite numbers.
struct Row(Map<String, Value>);

impl Row {
    fn new() -> Self {
        Row(Map::new())
    }

    fn num(mut self, k: &str, v: f64) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::Numeric(format!("{k} is not finite ({v})")));
        }
        self.0.insert(k.to_string(), json!(v));
        Ok(self)
    }

    fn opt(self, k: &str, v: Option<f64>) -> Result<Self> {
        match v {
            Some(v) => self.num(k, v),
            None => Ok(self.val(k, Value::Null)),
        }
    }

    fn val(mut self, k: &str, v: impl Into<Value>) -> Self {
        self.0.insert(k.to_string(), v.into());
        self
    }

    fn stat(self, k: &str, s: Stats) -> Result<Self> {
        self.num(&format!("mean_{k}"), s.mean)?.opt(&format!("se_{k}"), s.se)
    }

    /// Seed range, steps and sample count.
    fn meta(self, cfg: &ExperimentConfig) -> Self {
        self.val("seed", cfg.seed)
            .val("sample_first", 0)
            .val("sample_last", cfg.samples as u64 - 1)
            .val("samples", cfg.samples as u64)
            .val("steps", cfg.steps as u64)
            .val("resolution_rel", cfg.resolution)
            .val("se_defined", cfg.samples > 1)
    }

    fn finish(self) -> Map<String, Value> {
        self.0
    }
}

/// Masked fraction `sum masked / sum (area + masked)` over estimates.
fn pooled_masked_fraction(area: &[f64], masked: &[f64]) -> f64 {
    let a: KahanSum = area.iter().copied().collect();
    let m: KahanSum = masked.iter().copied().collect();
    let tot = a.value() + m.value();
    if tot > 0.0 {
        m.value() / tot
    } else {
        0.0
    }
}

fn sample_paths(cfg: &ExperimentConfig, s: u64) -> Result<(PlanarPath, PlanarPath)> {
    let x = simulate_bm(cfg.steps, derive_seed(cfg.seed, s, StreamRole::PathX), cfg.x)?;
    let y = simulate_bm(cfg.steps, derive_seed(cfg.seed, s, StreamRole::PathY), cfg.y)?;
    Ok((x, y))
}

/// `y - x`, rejected when it overflows.
fn start_offset(cfg: &ExperimentConfig) -> Result<Point> {
    let d = cfg.y - cfg.x;
    if d.x.is_finite() && d.y.is_finite() {
        Ok(d)
    } else {
        Err(Error::Numeric(format!("start-point offset y - x overflows: {d:?}")))
    }
}

fn ell_grid(cfg: &ExperimentConfig, p: &PlanarPath) -> Result<PlanarPath> {
    if p.steps() > cfg.ell_steps {
        p.coarsen(p.steps() / cfg.ell_steps)
    } else {
        Ok(p.clone())
    }
}

/// Runs the experiment selected by `cfg.kind`.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let start = Instant::now();
    let (rows, per_sample, files) = match cfg.kind {
        Experiment::Simulate => run_simulate(cfg)?,
        Experiment::WindingField => run_winding_field(cfg)?,
        Experiment::Area => run_area(cfg)?,
        Experiment::LocalTime => run_local_time(cfg)?,
        Experiment::Theorem1 => run_theorem1(cfg)?,
        Experiment::MeanStudy => run_mean_study(cfg)?,
        Experiment::Theorem2 => run_theorem2(cfg)?,
        Experiment::Sandwich => run_sandwich(cfg)?,
        Experiment::Tabulate => tabulate_analytic(cfg)?,
    };
    Ok(Report { config: cfg.to_json(), rows, per_sample, files, runtime_s: start.elapsed().as_secs_f64() })
}

type Output = (Vec<Map<String, Value>>, Vec<Map<String, Value>>, Vec<(String, Vec<u8>)>);

fn run_simulate(cfg: &ExperimentConfig) -> Result<Output> {
    let paths = (0..cfg.samples as u64).into_par_iter().map(|s| sample_paths(cfg, s)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut files = Vec::new();
    for (s, (x, y)) in paths.iter().enumerate() {
        for (role, p) in [("x", x), ("y", y)] {
            let mut buf = Vec::new();
            p.write_csv(&mut buf)?;
            files.push((format!("path_{role}_{s}.csv"), buf));
            let (bb, end) = (p.bbox(), p.end());
            rows.push(
                Row::new()
                    .meta(cfg)
                    .val("sample", s as u64)
                    .val("role", role)
                    .num("end_x", end.x)?
                    .num("end_y", end.y)?
                    .num("diameter", bb.diameter())?
                    .finish(),
            );
        }
    }
    Ok((rows, Vec::new(), files))
}

fn run_winding_field(cfg: &ExperimentConfig) -> Result<Output> {
    let (x, _) = sample_paths(cfg, 0)?;
    let curve = x.close();
    let bb = curve.bbox();
    let side = (bb.max.x - bb.min.x).max(bb.max.y - bb.min.y).max(1e-9) * 1.05;
    let c = Point::new(0.5 * (bb.min.x + bb.max.x), 0.5 * (bb.min.y + bb.max.y));
    let d = side / cfg.grid_n as f64;
    let grid = GridSpec::new(c.x - 0.5 * side, c.y - 0.5 * side, d, d, cfg.grid_n, cfg.grid_n)?;
    let field = winding_field(&curve, &grid);
    let mut buf = Vec::new();
    field.write_csv(&mut buf)?;
    let mut counts: BTreeMap<i32, u64> = BTreeMap::new();
    for (v, &masked) in field.values.iter().zip(&field.degenerate_mask) {
        if !masked {
            *counts.entry(*v).or_default() += 1;
        }
    }
    let masked = field.masked_count() as u64;
    let rows = counts
        .into_iter()
        .map(|(w, k)| {
            Row::new()
                .meta(cfg)
                .val("winding", w)
                .val("count", k)
                .val("masked", masked)
                .val("grid_n", cfg.grid_n as u64)
                .val("cell", d)
                .finish()
        })
        .collect();
    Ok((rows, Vec::new(), vec![("field.csv".into(), buf)]))
}

fn region_row(cfg: &ExperimentConfig, n: i32, m: Option<i32>, est: &RegionEstimate) -> Result<Map<String, Value>> {
    Ok(Row::new()
        .meta(cfg)
        .val("n", n)
        .val("m", m.map_or(Value::Null, Value::from))
        .num("area", est.area)?
        .num("masked_area", est.masked_area)?
        .num("masked_fraction", est.masked_fraction())?
        .num("resolution", est.resolution)?
        .val("n_cells", est.cells.len() as u64)
        .finish())
}

fn run_area(cfg: &ExperimentConfig) -> Result<Output> {
    let (x, y) = sample_paths(cfg, 0)?;
    let cx = x.close();
    let policy = cfg.policy();
    let (labels, ests): (Vec<(i32, Option<i32>)>, Vec<RegionEstimate>) = match cfg.mode {
        StudyMode::Single => {
            let e = level_set_areas(&cx, &cfg.n, cfg.level, &policy)?;
            (cfg.n.iter().map(|&n| (n, None)).collect(), e)
        }
        StudyMode::Joint => {
            let cy = y.close();
            let pairs = cfg.pairs();
            let e = joint_areas(&cx, &cy, &pairs, &policy)?;
            (pairs.into_iter().map(|(n, m)| (n, Some(m))).collect(), e)
        }
    };
    let mut rows = Vec::new();
    let mut files = Vec::new();
    for (k, ((n, m), est)) in labels.into_iter().zip(&ests).enumerate() {
        rows.push(region_row(cfg, n, m, est)?);
        let mut json = serde_json::to_vec_pretty(&est.to_json())?;
        json.push(b'\n');
        files.push((format!("region_{k}.json"), json));
        let mut buf = Vec::new();
        est.write_cells_csv(&mut buf)?;
        files.push((format!("cells_{k}.csv"), buf));
    }
    Ok((rows, Vec::new(), files))
}

fn run_local_time(cfg: &ExperimentConfig) -> Result<Output> {
    let scale = cfg.kernel_scale();
    let per = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|s| {
            let (x, y) = sample_paths(cfg, s)?;
            let (xe, ye) = (ell_grid(cfg, &x)?, ell_grid(cfg, &y)?);
            let est = local_time(&xe, &ye, scale, cfg.kernel)?;
            let atoms = if s == 0 { Some(intersection_measure_binned(&xe, &ye, scale, cfg.kernel, cfg.bin)?) } else { None };
            Ok((est, atoms))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut files = Vec::new();
    for (s, (est, atoms)) in per.into_iter().enumerate() {
        rows.push(
            Row::new()
                .meta(cfg)
                .val("sample", s as u64)
                .num("ell", est.value)?
                .num("ell_over_4pi2", est.value / (4.0 * PI * PI))?
                .num("se_proxy", est.se_proxy)?
                .val("pairs", est.pairs)
                .num("scale", est.scale)?
                .val("kernel", serde_json::to_value(est.kernel)?)
                .num("dropped_mass_bound", est.dropped_mass_bound)?
                .val("ell_steps", cfg.ell_steps.min(cfg.steps) as u64)
                .finish(),
        );
        if let Some(a) = atoms {
            let mut buf = Vec::new();
            a.write_csv(&mut buf)?;
            files.push(("ell_atoms.csv".into(), buf));
        }
    }
    Ok((rows, Vec::new(), files))
}

struct JointSample {
    scaled: Vec<f64>,
    area: Vec<f64>,
    masked: Vec<f64>,
    cell: f64,
    ell: f64,
}

/// `nm D_{n,m}` for every pair (one quadtree pass) and `ell / 4 pi^2`.
fn joint_sample(cfg: &ExperimentConfig, s: u64, with_ell: bool) -> Result<JointSample> {
    let (x, y) = sample_paths(cfg, s)?;
    let ell = if with_ell {
        local_time(&ell_grid(cfg, &x)?, &ell_grid(cfg, &y)?, cfg.kernel_scale(), cfg.kernel)?.value / (4.0 * PI * PI)
    } else {
        0.0
    };
    let pairs = cfg.pairs();
    let ests = joint_areas(&x.close(), &y.close(), &pairs, &cfg.policy())?;
    Ok(JointSample {
        scaled: pairs.iter().zip(&ests).map(|(&(n, m), e)| f64::from(n) * f64::from(m) * e.area).collect(),
        area: ests.iter().map(|e| e.area).collect(),
        masked: ests.iter().map(|e| e.masked_area).collect(),
        cell: ests.first().map_or(0.0, |e| e.resolution),
        ell,
    })
}

fn column(samples: &[JointSample], k: usize, f: impl Fn(&JointSample, usize) -> f64) -> Vec<f64> {
    samples.iter().map(|s| f(s, k)).collect()
}

/// Theorem 1 study: per-sample gap `nm D_{n,m} - ell / 4 pi^2`.
pub fn run_theorem1(cfg: &ExperimentConfig) -> Result<Output> {
    let samples = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|s| joint_sample(cfg, s, true))
        .collect::<Result<Vec<_>>>()?;
    let l_ref = func_big_l(start_offset(cfg)?, &QuadratureConfig::default())?;
    let cells: Vec<f64> = samples.iter().map(|s| s.cell).collect();
    let ell = stats(&samples.iter().map(|s| s.ell).collect::<Vec<_>>());
    let pairs = cfg.pairs();
    let mut rows = Vec::new();
    let mut abs_means = Vec::new();
    for (k, &(n, m)) in pairs.iter().enumerate() {
        let scaled = column(&samples, k, |s, k| s.scaled[k]);
        let gap = column(&samples, k, |s, k| s.scaled[k] - s.ell);
        let abs_gap: Vec<f64> = gap.iter().map(|g| g.abs()).collect();
        let abs = stats(&abs_gap);
        abs_means.push(abs.mean);
        let mf = pooled_masked_fraction(&column(&samples, k, |s, k| s.area[k]), &column(&samples, k, |s, k| s.masked[k]));
        rows.push(
            Row::new()
                .meta(cfg)
                .val("n", n)
                .val("m", m)
                .stat("nm_d", stats(&scaled))?
                .stat("ell_over_4pi2", ell)?
                .stat("gap", stats(&gap))?
                .stat("abs_gap", abs)?
                .num("l_ref", l_ref)?
                .num("masked_fraction", mf)?
                .num("resolution", stats(&cells).mean)?
                .num("scale", cfg.kernel_scale())?
                .val("ell_steps", cfg.ell_steps.min(cfg.steps) as u64),
        );
    }
    let ms: Vec<f64> = pairs.iter().map(|&(_, m)| f64::from(m)).collect();
    let slope = log_log_slope(&ms, &abs_means);
    let rows = rows.into_iter().map(|r| r.opt("slope_abs_gap_vs_m", slope).map(Row::finish)).collect::<Result<_>>()?;
    let per_sample = samples
        .iter()
        .enumerate()
        .map(|(s, smp)| {
            let mut r = Row::new().val("sample", s as u64).num("ell_over_4pi2", smp.ell)?;
            for (k, &(n, m)) in pairs.iter().enumerate() {
                r = r.num(&format!("nm_d_{n}_{m}"), smp.scaled[k])?;
            }
            Ok(r.finish())
        })
        .collect::<Result<_>>()?;
    Ok((rows, per_sample, Vec::new()))
}

/// Monte Carlo means of `n D_n` (single) or `nm D_{n,m}` (joint) against the
/// analytic limits.
pub fn run_mean_study(cfg: &ExperimentConfig) -> Result<Output> {
    let policy = cfg.policy();
    let mut rows = Vec::new();
    let mut per_sample = Vec::new();
    match cfg.mode {
        StudyMode::Single => {
            let per = (0..cfg.samples as u64)
                .into_par_iter()
                .map(|s| {
                    let x = simulate_bm(cfg.steps, derive_seed(cfg.seed, s, StreamRole::PathX), cfg.x)?;
                    level_set_areas(&x.close(), &cfg.n, LevelMode::AtLeast, &policy)
                })
                .collect::<Result<Vec<_>>>()?;
            let inv = 1.0 / (2.0 * PI);
            for (k, &n) in cfg.n.iter().enumerate() {
                let scaled: Vec<f64> = per.iter().map(|e| f64::from(n) * e[k].area).collect();
                let st = stats(&scaled);
                let target = f64::from(n) * coeff_c(n as u32)? / (2.0 * PI);
                let area: Vec<f64> = per.iter().map(|e| e[k].area).collect();
                let masked: Vec<f64> = per.iter().map(|e| e[k].masked_area).collect();
                let res: Vec<f64> = per.iter().map(|e| e[k].resolution).collect();
                rows.push(
                    Row::new()
                        .meta(cfg)
                        .val("mode", "single")
                        .val("n", n)
                        .stat("n_d", st)?
                        .num("reference", target)?
                        .opt("rel_dev_reference", (target != 0.0).then(|| (st.mean - target) / target))?
                        .num("inv_2pi", inv)?
                        .num("abs_dev_inv_2pi", (st.mean - inv).abs())?
                        .num("masked_fraction", pooled_masked_fraction(&area, &masked))?
                        .num("resolution", stats(&res).mean)?
                        .finish(),
                );
            }
            for (s, e) in per.iter().enumerate() {
                let mut r = Row::new().val("sample", s as u64);
                for (k, &n) in cfg.n.iter().enumerate() {
                    r = r.num(&format!("n_d_{n}"), f64::from(n) * e[k].area)?;
                }
                per_sample.push(r.finish());
            }
        }
        StudyMode::Joint => {
            let samples = (0..cfg.samples as u64)
                .into_par_iter()
                .map(|s| joint_sample(cfg, s, false))
                .collect::<Result<Vec<_>>>()?;
            let target = func_big_l(start_offset(cfg)?, &QuadratureConfig::default())?;
            let cells: Vec<f64> = samples.iter().map(|s| s.cell).collect();
            for (k, &(n, m)) in cfg.pairs().iter().enumerate() {
                let st = stats(&column(&samples, k, |s, k| s.scaled[k]));
                let mf = pooled_masked_fraction(
                    &column(&samples, k, |s, k| s.area[k]),
                    &column(&samples, k, |s, k| s.masked[k]),
                );
                rows.push(
                    Row::new()
                        .meta(cfg)
                        .val("mode", "joint")
                        .val("n", n)
                        .val("m", m)
                        .stat("nm_d", st)?
                        .num("reference", target)?
                        .opt("rel_dev_reference", (target != 0.0).then(|| (st.mean - target) / target))?
                        .num("masked_fraction", mf)?
                        .num("resolution", stats(&cells).mean)?
                        .finish(),
                );
            }
            for (s, smp) in samples.iter().enumerate() {
                let mut r = Row::new().val("sample", s as u64);
                for (k, &(n, m)) in cfg.pairs().iter().enumerate() {
                    r = r.num(&format!("nm_d_{n}_{m}"), smp.scaled[k])?;
                }
                per_sample.push(r.finish());
            }
        }
    }
    Ok((rows, per_sample, Vec::new()))
}

struct Theorem2Sample {
    d1: Vec<f64>,
    mass_mu: Vec<f64>,
    area: Vec<f64>,
    masked: Vec<f64>,
    mass_ell: f64,
    clipped: f64,
}

/// Theorem 2 study: transport distance between `mu_{n,m}` and the
/// intersection measure over `4 pi^2`.
pub fn run_theorem2(cfg: &ExperimentConfig) -> Result<Output> {
    let pairs = cfg.pairs();
    let samples = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|s| -> Result<Theorem2Sample> {
            let (x, y) = sample_paths(cfg, s)?;
            let bx: BBox = x.bbox().union(&y.bbox());
            let ell = intersection_measure_binned(
                &ell_grid(cfg, &x)?,
                &ell_grid(cfg, &y)?,
                cfg.kernel_scale(),
                cfg.kernel,
                cfg.bin,
            )?
            .scaled(1.0 / (4.0 * PI * PI))?;
            let (ell, clipped) = ell.clip(&bx);
            let (ell, _) = downsample(&ell, cfg.atoms)?;
            let ests = joint_areas(&x.close(), &y.close(), &pairs, &cfg.policy())?;
            let mut out = Theorem2Sample {
                d1: Vec::new(),
                mass_mu: Vec::new(),
                area: Vec::new(),
                masked: Vec::new(),
                mass_ell: ell.total_mass(),
                clipped,
            };
            for (&(n, m), est) in pairs.iter().zip(&ests) {
                let (mu, _) = downsample(&measure_from_region(est, n, m), cfg.atoms)?;
                out.d1.push(d1(&mu, &ell)?.distance);
                out.mass_mu.push(mu.total_mass());
                out.area.push(est.area);
                out.masked.push(est.masked_area);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let ell_mass = stats(&samples.iter().map(|s| s.mass_ell).collect::<Vec<_>>());
    let clipped = stats(&samples.iter().map(|s| s.clipped).collect::<Vec<_>>());
    let mut rows = Vec::new();
    for (k, &(n, m)) in pairs.iter().enumerate() {
        let d = column_t2(&samples, |s| s.d1[k]);
        let mf = pooled_masked_fraction(&column_t2(&samples, |s| s.area[k]), &column_t2(&samples, |s| s.masked[k]));
        rows.push(
            Row::new()
                .meta(cfg)
                .val("n", n)
                .val("m", m)
                .num("median_d1", median(&d))?
                .stat("d1", stats(&d))?
                .stat("mass_mu", stats(&column_t2(&samples, |s| s.mass_mu[k])))?
                .stat("mass_ell", ell_mass)?
                .num("mean_clipped_mass", clipped.mean)?
                .num("masked_fraction", mf)?
                .val("atoms", cfg.atoms as u64)
                .val("solver", "exact")
                .finish(),
        );
    }
    let per_sample = samples
        .iter()
        .enumerate()
        .map(|(s, smp)| {
            let mut r = Row::new().val("sample", s as u64).num("mass_ell", smp.mass_ell)?;
            for (k, &(n, m)) in pairs.iter().enumerate() {
                r = r.num(&format!("d1_{n}_{m}"), smp.d1[k])?;
            }
            Ok(r.finish())
        })
        .collect::<Result<_>>()?;
    Ok((rows, per_sample, Vec::new()))
}

fn column_t2(samples: &[Theorem2Sample], f: impl Fn(&Theorem2Sample) -> f64) -> Vec<f64> {
    samples.iter().map(f).collect()
}

#[derive(Default)]
struct SandwichSample {
    sigma: f64,
    upper: f64,
    lower: f64,
    area_violation: bool,
    pointwise_violations: usize,
    checked: usize,
    active_upper: usize,
    active_lower: usize,
    masked: f64,
    nonzero: bool,
}

fn random_points(bx: &BBox, k: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| Point::new(rng.gen_range(bx.min.x..=bx.max.x), rng.gen_range(bx.min.y..=bx.max.y)))
        .collect()
}

/// Piece-decomposition sandwich: area bounds on `Sigma_{n,m,T} / nm` and the
/// pointwise inclusions.
pub fn run_sandwich(cfg: &ExperimentConfig) -> Result<Output> {
    let pairs = cfg.pairs();
    let policy = cfg.policy();
    let mut rows = Vec::new();
    let mut per_sample = Vec::new();
    for &(n, m) in &pairs {
        let t = cfg.pieces(m);
        let (p, q) = (cfg.p_for(n), cfg.p_for(m));
        let (sn, sm) = (t as i32 * (p + 1), t as i32 * (q + 1));
        let samples = (0..cfg.samples as u64)
            .into_par_iter()
            .map(|s| -> Result<SandwichSample> {
                let (x, y) = sample_paths(cfg, s)?;
                let (psx, psy) = (decompose(&x, t)?, decompose(&y, t)?);
                let diameter = x.bbox().diameter().max(y.bbox().diameter());
                let pinned = policy.pinned(diameter);
                let (cx, cy): (ClosedCurve, ClosedCurve) = (x.clone().close(), y.clone().close());
                let hi = joint_area(&cx, &cy, n + sn, m + sm, &pinned)?;
                let lo = joint_area(&cx, &cy, n - sn, m - sm, &pinned)?;
                let sigma = piecewise_sum(&psx, &psy, n, m, &policy)?;
                let sig_area = sigma.value / (f64::from(n) * f64::from(m));
                let lower_ok = hi.area - (hi.masked_area + sigma.masked_area) <= sig_area;
                let upper_ok = sig_area <= lo.area + lo.masked_area + sigma.masked_area;
                let seed = derive_seed(cfg.seed, s, StreamRole::QueryPoints);
                let rx = sandwich_check(&psx, n, p, t, &random_points(&x.bbox(), cfg.points, seed))?;
                let ry = sandwich_check(&psy, m, q, t, &random_points(&y.bbox(), cfg.points, seed ^ 1))?;
                Ok(SandwichSample {
                    sigma: sig_area,
                    upper: lo.area,
                    lower: hi.area,
                    area_violation: !(lower_ok && upper_ok),
                    pointwise_violations: rx.violations() + ry.violations(),
                    checked: rx.checked + ry.checked,
                    active_upper: rx.active_upper + ry.active_upper,
                    active_lower: rx.active_lower + ry.active_lower,
                    masked: hi.masked_area + lo.masked_area + sigma.masked_area,
                    nonzero: sig_area > 0.0 || lo.area > 0.0 || hi.area > 0.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let col = |f: &dyn Fn(&SandwichSample) -> f64| samples.iter().map(f).collect::<Vec<f64>>();
        let count = |f: &dyn Fn(&SandwichSample) -> usize| samples.iter().map(f).sum::<usize>() as u64;
        let sig = col(&|s| s.sigma);
        let total = col(&|s| s.sigma + s.upper + s.lower);
        rows.push(
            Row::new()
                .meta(cfg)
                .val("n", n)
                .val("m", m)
                .val("t", t as u64)
                .val("p", p)
                .val("q", q)
                .val("area_violations", count(&|s| usize::from(s.area_violation)))
                .val("pointwise_violations", count(&|s| s.pointwise_violations))
                .val("points_checked", count(&|s| s.checked))
                .val("active_upper", count(&|s| s.active_upper))
                .val("active_lower", count(&|s| s.active_lower))
                .val("nonzero_samples", count(&|s| usize::from(s.nonzero)))
                .stat("sigma_over_nm", stats(&sig))?
                .stat("upper_area", stats(&col(&|s| s.upper)))?
                .stat("lower_area", stats(&col(&|s| s.lower)))?
                .num("masked_fraction", pooled_masked_fraction(&total, &col(&|s| s.masked)))?
                .finish(),
        );
        for (s, smp) in samples.iter().enumerate() {
            per_sample.push(
                Row::new()
                    .val("sample", s as u64)
                    .val("n", n)
                    .val("m", m)
                    .num("sigma_over_nm", smp.sigma)?
                    .num("upper_area", smp.upper)?
                    .num("lower_area", smp.lower)?
                    .val("area_violation", smp.area_violation)
                    .val("pointwise_violations", smp.pointwise_violations as u64)
                    .finish(),
            );
        }
    }
    Ok((rows, per_sample, Vec::new()))
}

/// Tables of `l`, `L`, `g_n` or `C_n`; the CSV is also returned as `table.csv`.
pub fn tabulate_analytic(cfg: &ExperimentConfig) -> Result<Output> {
    let qc = QuadratureConfig::default();
    let rs: Vec<f64> = (0..cfg.r_points)
        .map(|i| {
            if cfg.r_points == 1 {
                cfg.r_min
            } else {
                cfg.r_min + (cfg.r_max - cfg.r_min) * i as f64 / (cfg.r_points - 1) as f64
            }
        })
        .collect();
    let mut rows = Vec::new();
    let mut csv = String::new();
    match cfg.which {
        Table::SmallL | Table::BigL => {
            let name = if cfg.which == Table::SmallL { "l" } else { "L" };
            csv.push_str(&format!("r,{name}\n"));
            for &r in &rs {
                let z = Point::new(r, 0.0);
                let v = if cfg.which == Table::SmallL { func_l(z)? } else { func_big_l(z, &qc)? };
                csv.push_str(&format!("{r:.17e},{v:.17e}\n"));
                rows.push(Row::new().val("function", name).num("r", r)?.num("value", v)?.finish());
            }
        }
        Table::G => {
            csv.push_str("n,r,g\n");
            for &n in &cfg.n {
                for &r in &rs {
                    let v = prob_g(n as u32, Point::new(r, 0.0), &qc)?;
                    csv.push_str(&format!("{n},{r:.17e},{v:.17e}\n"));
                    rows.push(Row::new().val("function", "g_n").val("n", n).num("r", r)?.num("value", v)?.finish());
                }
            }
        }
        Table::C => {
            csv.push_str("n,C\n");
            for &n in &cfg.n {
                let v = coeff_c(n as u32)?;
                csv.push_str(&format!("{n},{v:.17e}\n"));
                rows.push(Row::new().val("function", "C_n").val("n", n).num("value", v)?.finish());
            }
        }
    }
    Ok((rows, Vec::new(), vec![("table.csv".into(), csv.into_bytes())]))
}
