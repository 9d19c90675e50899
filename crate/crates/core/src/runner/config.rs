//! Plain-text case files: `[section]` headers followed by `key = value`
//! lines, `#` starts a comment. Parsing reports every violation at once.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::closed_forms::{lambda_of_alpha, ProblemParams};
use crate::error::{Error, Result};
use crate::field::{FSpec, HSpec};
use crate::sphere::multiplicity;

/// Pipeline stages in dependency order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Spectrum,
    Solve,
    Almgren,
    Fourier,
    Inequalities,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Spectrum,
        Stage::Solve,
        Stage::Almgren,
        Stage::Fourier,
        Stage::Inequalities,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Spectrum => "spectrum",
            Stage::Solve => "solve",
            Stage::Almgren => "almgren",
            Stage::Fourier => "fourier",
            Stage::Inequalities => "inequalities",
        }
    }

    fn requires(self) -> &'static [Stage] {
        match self {
            Stage::Spectrum => &[],
            Stage::Solve => &[Stage::Spectrum],
            Stage::Almgren => &[Stage::Solve],
            Stage::Fourier => &[Stage::Almgren],
            Stage::Inequalities => &[Stage::Solve],
        }
    }

    /// `stages` plus everything they depend on, in execution order.
    pub fn closure(stages: &[Stage]) -> Vec<Stage> {
        let mut out: Vec<Stage> = Vec::new();
        let mut todo = stages.to_vec();
        while let Some(s) = todo.pop() {
            if !out.contains(&s) {
                out.push(s);
                todo.extend_from_slice(s.requires());
            }
        }
        out.sort();
        out
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage '{s}'"))
    }
}

/// How the Hardy coupling is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Coupling {
    Lambda(f64),
    /// lambda = lambda(alpha)
    Alpha(f64),
}

/// Named boundary data on the outer half sphere, as a degree-`ell` profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BoundarySpec {
    /// The `index`-th (1-based) eigenprofile of the degree block.
    Mode {
        ell: u32,
        index: usize,
        scale: f64,
    },
    /// sum of weight * eigenprofile(index).
    Mixed {
        ell: u32,
        terms: Vec<(usize, f64)>,
        scale: f64,
    },
    /// Samples at equally spaced polar angles on [0, pi/2], linearly interpolated.
    Custom {
        ell: u32,
        samples: Vec<f64>,
        scale: f64,
    },
    Zero {
        ell: u32,
    },
}

impl BoundarySpec {
    pub fn ell(&self) -> u32 {
        match *self {
            BoundarySpec::Mode { ell, .. }
            | BoundarySpec::Mixed { ell, .. }
            | BoundarySpec::Custom { ell, .. }
            | BoundarySpec::Zero { ell } => ell,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub outer_radius: f64,
    pub r_min: f64,
    pub radial_cells: usize,
    pub angular_nodes: usize,
    pub grading: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            outer_radius: 1.0,
            r_min: 1e-4,
            radial_cells: 160,
            angular_nodes: 128,
            grading: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub pipeline: Vec<Stage>,
    /// Degrees 0..=ell_max enter the spectrum.
    pub ell_max: u32,
    pub modes_per_ell: usize,
    /// Truncation of the mode path; all modes of the degree when absent.
    pub fourier_modes: Option<usize>,
    pub picard_tol: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            pipeline: Stage::ALL.to_vec(),
            ell_max: 2,
            modes_per_ell: 4,
            fourier_modes: None,
            picard_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub id: String,
    pub output_dir: Option<PathBuf>,
    pub n: u32,
    pub s: f64,
    pub coupling: Coupling,
    pub h: Option<HSpec>,
    pub f: Option<FSpec>,
    pub boundary: BoundarySpec,
    pub grid: GridSpec,
    pub run: RunSettings,
}

impl CaseConfig {
    /// A case with default grid and run settings.
    pub fn new(id: &str, n: u32, s: f64, coupling: Coupling, boundary: BoundarySpec) -> Self {
        Self {
            id: id.to_string(),
            output_dir: None,
            n,
            s,
            coupling,
            h: None,
            f: None,
            boundary,
            grid: GridSpec::default(),
            run: RunSettings::default(),
        }
    }

    pub fn params(&self) -> Result<ProblemParams> {
        match self.coupling {
            Coupling::Lambda(l) => ProblemParams::new(self.n, self.s, l),
            Coupling::Alpha(a) => {
                ProblemParams::new(self.n, self.s, lambda_of_alpha(self.n, self.s, a)?)
            }
        }
    }

    /// Canonical text form; `parse_config(c.to_text())` returns `c`.
    pub fn to_text(&self) -> String {
        let mut t = String::new();
        let _ = writeln!(t, "[case]\nid = {}", self.id);
        if let Some(dir) = &self.output_dir {
            let _ = writeln!(t, "output_dir = {}", dir.display());
        }
        let _ = writeln!(t, "\n[params]\nn = {}\ns = {}", self.n, self.s);
        let _ = match self.coupling {
            Coupling::Lambda(l) => writeln!(t, "lambda = {l}"),
            Coupling::Alpha(a) => writeln!(t, "alpha = {a}"),
        };
        if self.h.is_some() || self.f.is_some() {
            t.push_str("\n[perturbation]\n");
        }
        if let Some(h) = self.h {
            let _ = writeln!(
                t,
                "h_coefficient = {}\nh_exponent = {}",
                h.coefficient, h.exponent
            );
        }
        if let Some(f) = self.f {
            let _ = writeln!(
                t,
                "f_coefficient = {}\nf_power = {}",
                f.coefficient, f.power
            );
        }
        t.push_str("\n[boundary]\n");
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
        let _ = match &self.boundary {
            BoundarySpec::Mode { ell, index, scale } => {
                writeln!(
                    t,
                    "kind = mode\nell = {ell}\nindex = {index}\nscale = {scale}"
                )
            }
            BoundarySpec::Mixed { ell, terms, scale } => {
                let terms: Vec<String> = terms.iter().map(|(k, w)| format!("{k}:{w}")).collect();
                writeln!(
                    t,
                    "kind = mixed\nell = {ell}\nterms = {}\nscale = {scale}",
                    terms.join(", ")
                )
            }
            BoundarySpec::Custom {
                ell,
                samples,
                scale,
            } => writeln!(
                t,
                "kind = custom\nell = {ell}\nsamples = {}\nscale = {scale}",
                list(samples)
            ),
            BoundarySpec::Zero { ell } => writeln!(t, "kind = zero\nell = {ell}"),
        };
        let g = &self.grid;
        let _ = writeln!(
            t,
            "\n[grid]\nR = {}\nr_min = {}\nm = {}\nn = {}\ngrading = {}",
            g.outer_radius, g.r_min, g.radial_cells, g.angular_nodes, g.grading
        );
        let r = &self.run;
        let stages: Vec<&str> = r.pipeline.iter().map(|s| s.name()).collect();
        let _ = writeln!(
            t,
            "\n[run]\npipeline = {}\nell_max = {}\nmodes_per_ell = {}\npicard_tol = {}",
            stages.join(", "),
            r.ell_max,
            r.modes_per_ell,
            r.picard_tol
        );
        if let Some(k) = r.fourier_modes {
            let _ = writeln!(t, "fourier_modes = {k}");
        }
        t
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("case", &["id", "output_dir"]),
    ("params", &["n", "s", "lambda", "alpha"]),
    (
        "perturbation",
        &["h_coefficient", "h_exponent", "f_coefficient", "f_power"],
    ),
    (
        "boundary",
        &["kind", "ell", "index", "terms", "samples", "scale"],
    ),
    ("grid", &["R", "r_min", "m", "n", "grading"]),
    (
        "run",
        &[
            "pipeline",
            "ell_max",
            "modes_per_ell",
            "fourier_modes",
            "picard_tol",
        ],
    ),
];

struct Fields {
    map: BTreeMap<(String, String), (usize, String)>,
    errors: Vec<String>,
}

impl Fields {
    fn raw(&self, section: &str, key: &str) -> Option<&(usize, String)> {
        self.map.get(&(section.to_string(), key.to_string()))
    }

    fn get<T: FromStr>(&mut self, section: &str, key: &str) -> Option<T> {
        let (line, text) = self.raw(section, key)?.clone();
        match text.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.errors.push(format!(
                    "line {line}: [{section}] {key} = '{text}' is not a valid value"
                ));
                None
            }
        }
    }

    fn require<T: FromStr>(&mut self, section: &str, key: &str) -> Option<T> {
        if self.raw(section, key).is_none() {
            self.errors
                .push(format!("missing required key [{section}] {key}"));
            return None;
        }
        self.get(section, key)
    }

    fn list<T: FromStr>(&mut self, section: &str, key: &str) -> Option<Vec<T>> {
        let (line, text) = self.raw(section, key)?.clone();
        let mut out = Vec::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.parse::<T>() {
                Ok(v) => out.push(v),
                Err(_) => {
                    self.errors.push(format!(
                        "line {line}: [{section}] {key}: bad entry '{item}'"
                    ));
                    return None;
                }
            }
        }
        Some(out)
    }
}

fn tokenize(text: &str) -> Fields {
    let mut fields = Fields {
        map: BTreeMap::new(),
        errors: Vec::new(),
    };
    let mut section: Option<String> = None;
    for (no, raw) in text.lines().enumerate() {
        let no = no + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if SCHEMA.iter().any(|(s, _)| *s == name) {
                section = Some(name.to_string());
            } else {
                fields
                    .errors
                    .push(format!("line {no}: unknown section [{name}]"));
                section = None;
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            fields
                .errors
                .push(format!("line {no}: expected 'key = value', got '{line}'"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = section.clone() else {
            fields
                .errors
                .push(format!("line {no}: key '{key}' outside a known section"));
            continue;
        };
        let known = SCHEMA
            .iter()
            .any(|(s, keys)| *s == sec && keys.contains(&key));
        if !known {
            fields
                .errors
                .push(format!("line {no}: unknown key '{key}' in [{sec}]"));
            continue;
        }
        if fields
            .map
            .insert((sec.clone(), key.to_string()), (no, value.to_string()))
            .is_some()
        {
            fields
                .errors
                .push(format!("line {no}: duplicate key [{sec}] {key}"));
        }
    }
    fields
}

/// Parse and validate a case file.
pub fn parse_config(text: &str) -> Result<CaseConfig> {
    let mut fl = tokenize(text);
    let id: Option<String> = fl.require("case", "id");
    let output_dir: Option<PathBuf> = fl.get("case", "output_dir");
    let n: Option<u32> = fl.require("params", "n");
    let s: Option<f64> = fl.require("params", "s");
    let lambda: Option<f64> = fl.get("params", "lambda");
    let alpha: Option<f64> = fl.get("params", "alpha");
    let coupling = match (lambda, alpha) {
        (Some(l), None) => Some(Coupling::Lambda(l)),
        (None, Some(a)) => Some(Coupling::Alpha(a)),
        (Some(_), Some(_)) => {
            fl.errors
                .push("over-determined coupling: give either lambda or alpha, not both".into());
            None
        }
        (None, None) => {
            if fl.raw("params", "lambda").is_none() && fl.raw("params", "alpha").is_none() {
                fl.errors
                    .push("missing required key [params] lambda (or alpha)".into());
            }
            None
        }
    };

    let pair = |fl: &mut Fields, a: &str, b: &str| -> Option<(f64, f64)> {
        let x: Option<f64> = fl.get("perturbation", a);
        let y: Option<f64> = fl.get("perturbation", b);
        match (
            fl.raw("perturbation", a).is_some(),
            fl.raw("perturbation", b).is_some(),
        ) {
            (false, false) => None,
            (true, true) => x.zip(y),
            _ => {
                fl.errors
                    .push(format!("[perturbation] {a} and {b} must be given together"));
                None
            }
        }
    };
    let h = pair(&mut fl, "h_coefficient", "h_exponent").map(|(c, e)| HSpec {
        coefficient: c,
        exponent: e,
    });
    let f = pair(&mut fl, "f_coefficient", "f_power").map(|(c, p)| FSpec {
        coefficient: c,
        power: p,
    });

    let kind: Option<String> = fl.require("boundary", "kind");
    let ell: u32 = fl.get("boundary", "ell").unwrap_or(0);
    let scale: f64 = fl.get("boundary", "scale").unwrap_or(1.0);
    let boundary = match kind.as_deref() {
        Some("mode") => fl
            .require("boundary", "index")
            .map(|index| BoundarySpec::Mode { ell, index, scale }),
        Some("mixed") => {
            if fl.raw("boundary", "terms").is_none() {
                fl.errors
                    .push("missing required key [boundary] terms for mixed data".into());
            }
            fl.list::<String>("boundary", "terms").and_then(|items| {
                let mut terms = Vec::new();
                for it in items {
                    let parsed = it.split_once(':').and_then(|(k, w)| {
                        Some((
                            k.trim().parse::<usize>().ok()?,
                            w.trim().parse::<f64>().ok()?,
                        ))
                    });
                    match parsed {
                        Some(t) => terms.push(t),
                        None => {
                            fl.errors.push(format!(
                                "[boundary] terms: expected 'index:weight', got '{it}'"
                            ));
                            return None;
                        }
                    }
                }
                Some(BoundarySpec::Mixed { ell, terms, scale })
            })
        }
        Some("custom") => {
            if fl.raw("boundary", "samples").is_none() {
                fl.errors
                    .push("missing required key [boundary] samples for custom data".into());
            }
            fl.list("boundary", "samples")
                .map(|samples| BoundarySpec::Custom {
                    ell,
                    samples,
                    scale,
                })
        }
        Some("zero") => Some(BoundarySpec::Zero { ell }),
        Some(other) => {
            fl.errors.push(format!(
                "[boundary] kind '{other}' is not one of mode, mixed, custom, zero"
            ));
            None
        }
        None => None,
    };

    let d = GridSpec::default();
    let grid = GridSpec {
        outer_radius: fl.get("grid", "R").unwrap_or(d.outer_radius),
        r_min: fl.get("grid", "r_min").unwrap_or(d.r_min),
        radial_cells: fl.get("grid", "m").unwrap_or(d.radial_cells),
        angular_nodes: fl.get("grid", "n").unwrap_or(d.angular_nodes),
        grading: fl.get("grid", "grading").unwrap_or(d.grading),
    };
    let dr = RunSettings::default();
    let run = RunSettings {
        pipeline: fl.list("run", "pipeline").unwrap_or(dr.pipeline),
        ell_max: fl.get("run", "ell_max").unwrap_or(dr.ell_max),
        modes_per_ell: fl.get("run", "modes_per_ell").unwrap_or(dr.modes_per_ell),
        fourier_modes: fl.get("run", "fourier_modes"),
        picard_tol: fl.get("run", "picard_tol").unwrap_or(dr.picard_tol),
    };

    let mut errors = std::mem::take(&mut fl.errors);
    let complete = id.is_some() && coupling.is_some() && boundary.is_some();
    let (Some(n), Some(s)) = (n, s) else {
        return Err(Error::Config(errors));
    };
    // Missing pieces get neutral stand-ins so the remaining keys are still checked.
    let config = CaseConfig {
        id: id.unwrap_or_else(|| "unnamed".into()),
        output_dir,
        n,
        s,
        coupling: coupling.unwrap_or(Coupling::Lambda(0.0)),
        h,
        f,
        boundary: boundary.unwrap_or(BoundarySpec::Zero { ell }),
        grid,
        run,
    };
    errors.extend(validate(&config));
    if errors.is_empty() && complete {
        Ok(config)
    } else {
        Err(Error::Config(errors))
    }
}

/// Every constraint violated by `c`.
pub fn validate(c: &CaseConfig) -> Vec<String> {
    let mut e = Vec::new();
    if c.id.is_empty()
        || !c
            .id
            .chars()
            .all(|ch| ch.is_ascii_alphanumeric() || "-_.".contains(ch))
    {
        e.push(format!(
            "[case] id '{}' must be nonempty and use only letters, digits, '-', '_', '.'",
            c.id
        ));
    }
    let params = match c.params() {
        Ok(p) => Some(p),
        Err(err) => {
            e.push(format!("[params] {err}"));
            None
        }
    };
    if let Some(h) = c.h {
        if !(h.exponent > 0.0) || !h.coefficient.is_finite() {
            e.push(format!(
                "[perturbation] h_exponent = {} violates eps > 0 in |h| + |x.grad h| <= C_h |x|^(-2s+eps)",
                h.exponent
            ));
        } else if let Some(p) = params {
            let load = p.lambda + h.coefficient.abs() * c.grid.outer_radius.powf(h.exponent);
            if load >= p.hardy_constant() {
                e.push(format!(
                    "[perturbation] lambda + |C_h| R^eps = {load} is not below the Hardy constant {}",
                    p.hardy_constant()
                ));
            }
        }
    }
    if let Some(f) = c.f {
        if c.s > 0.0 && c.s < 1.0 && c.n as f64 > 2.0 * c.s {
            let crit = crate::closed_forms::critical_exponent(c.n, c.s);
            if !(f.power > 2.0 && f.power <= crit + 1e-12) {
                e.push(format!(
                    "[perturbation] f_power = {} violates 2 < p <= 2*(s) = {crit} in |f(x,t)t| <= C_f |t|^p",
                    f.power
                ));
            }
        }
        if !f.coefficient.is_finite() {
            e.push("[perturbation] f_coefficient must be finite".into());
        }
        if c.boundary.ell() != 0 && f.coefficient != 0.0 {
            e.push(
                "[perturbation] the power nonlinearity needs degree-0 boundary data (ell = 0)"
                    .into(),
            );
        }
    }
    if multiplicity(c.n, c.boundary.ell()) == 0 {
        e.push(format!(
            "[boundary] no degree-{} harmonics in dimension {}",
            c.boundary.ell(),
            c.n
        ));
    }
    if c.boundary.ell() > c.run.ell_max {
        e.push(format!(
            "[run] ell_max = {} must cover the boundary degree {}",
            c.run.ell_max,
            c.boundary.ell()
        ));
    }
    match &c.boundary {
        BoundarySpec::Mode { index, scale, .. } => {
            if *index == 0 {
                e.push("[boundary] index is 1-based".into());
            }
            if !scale.is_finite() {
                e.push("[boundary] scale must be finite".into());
            }
        }
        BoundarySpec::Mixed { terms, .. } => {
            if terms.is_empty() || terms.iter().any(|(k, w)| *k == 0 || !w.is_finite()) {
                e.push("[boundary] terms need 1-based indices and finite weights".into());
            }
        }
        BoundarySpec::Custom { samples, .. } => {
            if samples.len() < 2 || samples.iter().any(|v| !v.is_finite()) {
                e.push("[boundary] samples need at least two finite values".into());
            }
        }
        BoundarySpec::Zero { .. } => {}
    }
    let g = &c.grid;
    if !(g.r_min > 0.0 && g.outer_radius > g.r_min && g.outer_radius.is_finite()) {
        e.push(format!(
            "[grid] need 0 < r_min < R, got r_min = {}, R = {}",
            g.r_min, g.outer_radius
        ));
    } else if g.r_min / g.outer_radius > 1e-4 * (1.0 + 1e-12) {
        e.push(format!(
            "[grid] r_min/R = {} must be at most 1e-4 (four decades)",
            g.r_min / g.outer_radius
        ));
    }
    if g.radial_cells < 4 {
        e.push("[grid] m must be at least 4".into());
    }
    if g.angular_nodes < crate::sphere::MIN_INTERIOR_NODES + 2 {
        e.push(format!(
            "[grid] n must be at least {}",
            crate::sphere::MIN_INTERIOR_NODES + 2
        ));
    }
    if !(g.grading >= 1.0 && g.grading.is_finite()) {
        e.push("[grid] grading must be >= 1".into());
    }
    if c.run.pipeline.is_empty() {
        e.push("[run] pipeline is empty".into());
    }
    if c.run.modes_per_ell == 0 {
        e.push("[run] modes_per_ell must be at least 1".into());
    }
    if c.run.fourier_modes == Some(0) {
        e.push("[run] fourier_modes must be at least 1".into());
    }
    if !(c.run.picard_tol > 0.0) {
        e.push("[run] picard_tol must be positive".into());
    }
    e
}
