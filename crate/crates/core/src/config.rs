//! Run configuration: line-based `key = value` files with `#` comments.
//! Unknown keys and repeated keys are errors.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{NeumannConfig, DEFAULT_BAND_TOL};
use crate::grid::{GridSpec, WeightedGrid};
use crate::group::{DunklStructure, RootSystem};
use crate::lp::ScaleWindow;

/// Every knob of a run. `Default` is the desk-scale configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    /// Preset name, or `custom` when `roots` is set.
    pub group: String,
    /// Explicit roots, one per entry; overrides the preset.
    pub roots: Option<Vec<Vec<f64>>>,
    pub kappa: f64,
    pub half_width: f64,
    pub points: Option<usize>,
    pub k_min: i32,
    pub k_max: i32,
    pub m: u32,
    pub band_tol: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub subspace: bool,
    pub seed: u64,
    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let w = ScaleWindow::default();
        let n = NeumannConfig::default();
        Self {
            group: "z2".into(),
            roots: None,
            kappa: 0.5,
            half_width: 8.0,
            points: None,
            k_min: w.k_min,
            k_max: w.k_max,
            m: w.m,
            band_tol: DEFAULT_BAND_TOL,
            tol: n.tol,
            max_iter: n.max_iter,
            subspace: n.subspace,
            seed: 0,
            output_dir: ".".into(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "group",
    "roots",
    "kappa",
    "half_width",
    "points",
    "k_min",
    "k_max",
    "m",
    "band_tol",
    "tol",
    "max_iter",
    "subspace",
    "seed",
    "output_dir",
];

fn parse_num<T: std::str::FromStr>(key: &str, v: &str, line: usize) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("line {line}: `{key}` cannot take the value `{v}`")))
}

/// `1.4142, 0; 0, 1.4142` style root lists.
fn parse_roots(v: &str, line: usize) -> Result<Vec<Vec<f64>>> {
    v.split(';')
        .map(|r| {
            r.split(',')
                .map(|x| parse_num::<f64>("roots", x.trim(), line))
                .collect()
        })
        .collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("line {line}: unknown key `{key}`")));
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {line}: `{key}` set twice")));
            }
            match key {
                "group" => cfg.group = value.to_string(),
                "roots" => cfg.roots = Some(parse_roots(value, line)?),
                "kappa" => cfg.kappa = parse_num(key, value, line)?,
                "half_width" => cfg.half_width = parse_num(key, value, line)?,
                "points" => cfg.points = Some(parse_num(key, value, line)?),
                "k_min" => cfg.k_min = parse_num(key, value, line)?,
                "k_max" => cfg.k_max = parse_num(key, value, line)?,
                "m" => cfg.m = parse_num(key, value, line)?,
                "band_tol" => cfg.band_tol = parse_num(key, value, line)?,
                "tol" => cfg.tol = parse_num(key, value, line)?,
                "max_iter" => cfg.max_iter = parse_num(key, value, line)?,
                "subspace" => cfg.subspace = parse_num(key, value, line)?,
                "seed" => cfg.seed = parse_num(key, value, line)?,
                "output_dir" => cfg.output_dir = value.to_string(),
                _ => unreachable!(),
            }
        }
        if cfg.roots.is_some() {
            cfg.group = "custom".into();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.structure()?;
        self.grid_spec()?.validate()?;
        self.window()?;
        self.neumann().validate()?;
        if !(self.band_tol > 0.0 && self.band_tol < 1.0) {
            return Err(Error::Config(format!("band_tol must lie in (0, 1), got {}", self.band_tol)));
        }
        Ok(())
    }

    pub fn root_system(&self) -> Result<RootSystem> {
        match &self.roots {
            Some(roots) => {
                let dim = roots.first().map_or(0, Vec::len);
                RootSystem::new(dim, roots.clone(), vec![self.kappa; roots.len()])
            }
            None => RootSystem::preset(&self.group, self.kappa),
        }
    }

    pub fn structure(&self) -> Result<DunklStructure> {
        DunklStructure::new(self.root_system()?)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let n = self.root_system()?.dimension();
        let mut spec = GridSpec::default_for(n);
        spec.half_width = self.half_width;
        if let Some(m) = self.points {
            spec.points_per_axis = m;
        }
        Ok(spec)
    }

    pub fn grid(&self) -> Result<WeightedGrid> {
        WeightedGrid::new(self.grid_spec()?, self.structure()?)
    }

    pub fn window(&self) -> Result<ScaleWindow> {
        ScaleWindow::new(self.k_min, self.k_max, self.m)
    }

    pub fn neumann(&self) -> NeumannConfig {
        NeumannConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            subspace: self.subspace,
        }
    }

    /// The resolved configuration as `key = value` lines, parseable by
    /// [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match &self.roots {
            Some(r) => {
                let rows: Vec<String> = r
                    .iter()
                    .map(|v| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", "))
                    .collect();
                s.push_str(&format!("roots = {}\n", rows.join("; ")));
            }
            None => s.push_str(&format!("group = {}\n", self.group)),
        }
        s.push_str(&format!("kappa = {:?}\n", self.kappa));
        s.push_str(&format!("half_width = {:?}\n", self.half_width));
        if let Some(m) = self.points {
            s.push_str(&format!("points = {m}\n"));
        }
        s.push_str(&format!(
            "k_min = {}\nk_max = {}\nm = {}\nband_tol = {:?}\ntol = {:?}\nmax_iter = {}\nsubspace = {}\nseed = {}\noutput_dir = {}\n",
            self.k_min, self.k_max, self.m, self.band_tol, self.tol, self.max_iter, self.subspace, self.seed, self.output_dir
        ));
        s
    }
}
