//! Run configuration files.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use hj_core::analytic::NamedData;
use hj_core::characteristics::TraceOptions;
use hj_core::data::BoundaryData;
use hj_core::domain::Domain;
use hj_core::hopf::{HopfOptions, WindowOptions};
use hj_core::superdiff::SuperDiffOptions;
use hj_core::{Problem, SpdForm};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub form: FormSpec,
    #[serde(default)]
    pub domain: Option<Domain>,
    pub data: NamedData,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub verify: VerifySpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormSpec {
    pub n: usize,
    /// Row-major n×n.
    pub matrix: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub singular_tol: f64,
    pub energy_tol: f64,
    pub cluster_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let sd = SuperDiffOptions::default();
        Self {
            singular_tol: sd.singular_tol,
            energy_tol: sd.energy_tol,
            cluster_tol: HopfOptions::default().cluster_tol,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Solver {
    pub resolution: usize,
    pub refine_steps: usize,
    pub dt: f64,
    pub horizon: f64,
}

impl Default for Solver {
    fn default() -> Self {
        let h = HopfOptions::default();
        Self {
            resolution: h.resolution,
            refine_steps: h.refine_steps,
            dt: TraceOptions::default().dt,
            horizon: 10.0,
        }
    }
}

/// Region sampled by `solve` and `singular-scan`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    /// (t₀, x₀…) for trajectory suites.
    pub start: Option<Vec<f64>>,
    pub t_max: Option<f64>,
    pub t_bar: Option<f64>,
    pub pairs: Option<usize>,
    /// (t′, x′…) for the monotonicity window.
    pub window: Option<Vec<f64>>,
}

/// A validated configuration with everything built.
pub struct Loaded {
    pub config: RunConfig,
    pub problem: Problem,
    pub form: SpdForm,
    pub hopf: HopfOptions,
    pub superdiff: SuperDiffOptions,
    pub trace: TraceOptions,
    pub window: WindowOptions,
    path: PathBuf,
    text: String,
}

impl Loaded {
    /// A config error anchored at `key` in `section`.
    pub fn error_at(&self, section: &str, key: &str, msg: impl std::fmt::Display) -> CliError {
        anchored(&self.path, &self.text, section, key, msg)
    }
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: cannot read config: {e}", path.display())))?;
    parse(path, text)
}

pub fn parse(path: &Path, text: String) -> Result<Loaded, CliError> {
    let config: RunConfig = toml::from_str(&text).map_err(|e| {
        let line = e.span().map_or(1, |s| line_of(&text, s.start));
        CliError::Config(format!("{}:{line}: {}", path.display(), e.message()))
    })?;
    let err = |section: &str, key: &str, msg: String| anchored(path, &text, section, key, msg);

    let n = config.form.n;
    if n == 0 || n > hj_core::quadform::MAX_DIM {
        return Err(err("form", "n", format!("n must be in 1..={}", hj_core::quadform::MAX_DIM)));
    }
    if config.form.matrix.len() != n * n {
        return Err(err(
            "form",
            "matrix",
            format!("matrix has {} entries, expected n² = {}", config.form.matrix.len(), n * n),
        ));
    }
    let form = SpdForm::new(n, &config.form.matrix).map_err(|e| err("form", "matrix", e.to_string()))?;

    let domain = match &config.domain {
        Some(d) => {
            d.validate().map_err(|e| err("domain", "kind", e.to_string()))?;
            if d.dim() != n {
                return Err(err("domain", "kind", format!("domain has dimension {}, form has n = {n}", d.dim())));
            }
            d.clone()
        }
        None => Domain::whole_space(n).expect("n > 0"),
    };

    let t = &config.tolerances;
    for (key, v) in [
        ("singular_tol", t.singular_tol),
        ("energy_tol", t.energy_tol),
        ("cluster_tol", t.cluster_tol),
    ] {
        if !(v > 0.0) {
            return Err(err("tolerances", key, format!("{key} must be > 0, got {v}")));
        }
    }
    let s = &config.solver;
    if s.resolution < 8 {
        return Err(err("solver", "resolution", format!("resolution must be ≥ 8, got {}", s.resolution)));
    }
    if !(s.dt > 0.0) {
        return Err(err("solver", "dt", format!("dt must be > 0, got {}", s.dt)));
    }
    if !(s.horizon > 0.0) {
        return Err(err("solver", "horizon", format!("horizon must be > 0, got {}", s.horizon)));
    }

    let base = path.parent().unwrap_or(Path::new("."));
    let data: Arc<dyn BoundaryData> = config
        .data
        .build(&form, &domain, base)
        .map_err(|e| err("data", "key", e.to_string()))?;
    let problem = Problem::new(domain, data, s.horizon).map_err(|e| err("data", "key", e.to_string()))?;

    let hopf = HopfOptions {
        resolution: s.resolution,
        refine_steps: s.refine_steps,
        cluster_tol: t.cluster_tol,
        ..HopfOptions::default()
    };
    let superdiff = SuperDiffOptions {
        singular_tol: t.singular_tol,
        energy_tol: t.energy_tol,
        ..SuperDiffOptions::default()
    };
    let trace = TraceOptions {
        dt: s.dt,
        ..TraceOptions::default()
    };
    let window = WindowOptions {
        seed: config.seed,
        ..WindowOptions::default()
    };
    Ok(Loaded {
        config,
        problem,
        form,
        hopf,
        superdiff,
        trace,
        window,
        path: path.to_path_buf(),
        text,
    })
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = …` inside `[section]`, else the section header, else line 1.
fn locate(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return i + 1;
                }
            }
        }
    }
    header.unwrap_or(1)
}

fn anchored(path: &Path, text: &str, section: &str, key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}:{}: [{section}] {key}: {msg}", path.display(), locate(text, section, key)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "seed = 3\n\n[form]\nn = 1\nmatrix = [1.0]\n\n[data]\nkey = \"eps_example\"\neps = 0.1\n";

    fn parse_str(text: &str) -> Result<Loaded, CliError> {
        parse(Path::new("run.toml"), text.to_string())
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let l = parse_str(EXAMPLE).unwrap();
        assert_eq!(l.config.seed, 3);
        assert_eq!(l.hopf.resolution, 64);
        assert_eq!(l.window.seed, 3);
        assert!(!l.problem.domain().is_bounded());
    }

    #[test]
    fn missing_matrix_entry_points_at_its_line() {
        let text = EXAMPLE.replace("n = 1", "n = 2").replace("[1.0]", "[1.0, 0.0, 1.0]");
        match parse_str(&text) {
            Err(CliError::Config(m)) => assert!(m.starts_with("run.toml:5:"), "{m}"),
            _ => panic!("expected a config error"),
        }
    }

    #[test]
    fn syntax_errors_carry_the_line() {
        let text = format!("{EXAMPLE}\n[solver]\ndt = = 1\n");
        match parse_str(&text) {
            Err(CliError::Config(m)) => assert!(m.starts_with("run.toml:12:"), "{m}"),
            _ => panic!("expected a config error"),
        }
    }

    #[test]
    fn invalid_knobs_are_rejected() {
        for (extra, line) in [
            ("[solver]\nresolution = 4\n", 12),
            ("[solver]\ndt = 0.0\n", 12),
            ("[tolerances]\nsingular_tol = -1.0\n", 12),
        ] {
            let text = format!("{EXAMPLE}\n{extra}");
            match parse_str(&text) {
                Err(CliError::Config(m)) => assert!(m.starts_with(&format!("run.toml:{line}:")), "{m}"),
                _ => panic!("expected a config error for {extra}"),
            }
        }
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = format!("{EXAMPLE}\n[solver]\nresolutoin = 16\n");
        assert!(matches!(parse_str(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn domain_dimension_must_match() {
        let text = format!("{EXAMPLE}\n[domain]\nkind = \"box\"\nlower = [0.0, 0.0]\nupper = [1.0, 1.0]\n");
        assert!(matches!(parse_str(&text), Err(CliError::Config(_))));
    }
}
