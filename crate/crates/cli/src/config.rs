//! Configuration resolution: built-in defaults, optional key=value file,
//! explicit flag overrides — in that precedence order — plus validation
//! with specific messages and the process exit-code policy.

use std::fmt;
use std::fs;
use std::path::PathBuf;

/// Failures bucketed by exit code: configuration problems (2), numerical
/// failures during computation (3), and I/O errors (4).
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    /// Wraps a library error from the computation phase.
    pub fn numerical(context: &str, err: demask_core::Error) -> Self {
        CliError::Numerical(format!("{context}: {err}"))
    }

    /// Wraps a library error caused by configuration values.
    pub fn config(context: &str, err: demask_core::Error) -> Self {
        CliError::Config(format!("{context}: {err}"))
    }

    pub fn io(context: &str, err: std::io::Error) -> Self {
        CliError::Io(format!("{context}: {err}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            CliError::Io(msg) => write!(f, "i/o: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Solver selection, as written in configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Qr,
    Regularized,
}

impl Method {
    fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "qr" => Ok(Method::Qr),
            "regularized" | "reg" => Ok(Method::Regularized),
            other => Err(CliError::Config(format!(
                "unknown method '{other}' (expected 'qr' or 'regularized')"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Qr => "qr",
            Method::Regularized => "regularized",
        }
    }
}

/// Where the signal power spectrum comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpectrumSource {
    /// The built-in flat-then-tapered spectrum.
    Tapered,
    /// A text file of `<ell> <C_ell>` lines covering 0..=L.
    File(PathBuf),
}

impl SpectrumSource {
    pub fn describe(&self) -> String {
        match self {
            SpectrumSource::Tapered => "tapered".to_string(),
            SpectrumSource::File(path) => path.display().to_string(),
        }
    }
}

/// Fully resolved, validated run configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub l_max: usize,
    pub k_deg: usize,
    pub j_max: usize,
    pub mask_a_deg: f64,
    pub mask_b_deg: f64,
    pub tau: f64,
    pub seed: u64,
    pub method: Method,
    pub nu_grid: Vec<f64>,
    pub spectrum: SpectrumSource,
    pub include_monopole_dipole: bool,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub grid_exactness: Option<usize>,
}

impl ExperimentConfig {
    /// Quadrature exactness used by the pixel masking route.
    pub fn masking_exactness(&self) -> usize {
        self.grid_exactness
            .unwrap_or(self.l_max + self.k_deg + self.j_max)
    }

    /// Canonical key=value rendering of the semantic configuration; used
    /// both for human inspection and for cache manifests. Deliberately
    /// excludes `out` and `workers`, which do not affect results.
    pub fn canonical_lines(&self) -> String {
        let nu: Vec<String> = self.nu_grid.iter().map(|v| format!("{v:e}")).collect();
        format!(
            "L={}\nK={}\nJ={}\nmask_a_deg={:.12}\nmask_b_deg={:.12}\ntau={:e}\nseed={}\n\
             method={}\nnu={}\nspectrum={}\ninclude_monopole_dipole={}\ngrid_exactness={}\n",
            self.l_max,
            self.k_deg,
            self.j_max,
            self.mask_a_deg,
            self.mask_b_deg,
            self.tau,
            self.seed,
            self.method.as_str(),
            nu.join(","),
            self.spectrum.describe(),
            self.include_monopole_dipole,
            self.masking_exactness(),
        )
    }
}

/// Unresolved option set collected from flags (and mirrored by file keys).
#[derive(Debug, Default, Clone)]
pub struct ConfigOverrides {
    pub config_file: Option<String>,
    pub preset: Option<String>,
    pub l_max: Option<usize>,
    pub k_deg: Option<usize>,
    pub j_max: Option<usize>,
    pub mask_a_deg: Option<f64>,
    pub mask_b_deg: Option<f64>,
    pub tau: Option<f64>,
    pub seed: Option<u64>,
    pub method: Option<String>,
    pub nu_grid: Option<Vec<f64>>,
    pub spectrum: Option<String>,
    pub include_monopole_dipole: Option<bool>,
    pub out: Option<String>,
    pub workers: Option<usize>,
    pub grid_exactness: Option<usize>,
}

impl ConfigOverrides {
    pub fn from_flags(f: &crate::ConfigFlags) -> Self {
        Self {
            config_file: f.config.clone(),
            preset: f.preset.clone(),
            l_max: f.l_max,
            k_deg: f.k_deg,
            j_max: f.j_max,
            mask_a_deg: f.mask_a_deg,
            mask_b_deg: f.mask_b_deg,
            tau: f.tau,
            seed: f.seed,
            method: f.method.clone(),
            nu_grid: f.nu_grid.clone(),
            spectrum: f.spectrum.clone(),
            include_monopole_dipole: f.include_monopole_dipole,
            out: f.out.clone(),
            workers: f.workers,
            grid_exactness: f.grid_exactness,
        }
    }

    /// Applies `other` on top of `self`, letting `other` win where set.
    fn overlaid(mut self, other: &ConfigOverrides) -> Self {
        macro_rules! take {
            ($field:ident) => {
                if other.$field.is_some() {
                    self.$field = other.$field.clone();
                }
            };
        }
        take!(preset);
        take!(l_max);
        take!(k_deg);
        take!(j_max);
        take!(mask_a_deg);
        take!(mask_b_deg);
        take!(tau);
        take!(seed);
        take!(method);
        take!(nu_grid);
        take!(spectrum);
        take!(include_monopole_dipole);
        take!(out);
        take!(workers);
        take!(grid_exactness);
        self
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("key '{key}': cannot parse '{value}': {e}")))
}

/// Parses a key=value configuration file into an override set. Keys match
/// the long flag names, with `-` and `_` interchangeable; `#` starts a
/// comment; unknown keys are errors so typos cannot silently vanish.
fn parse_file(path: &str) -> Result<ConfigOverrides, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("config file '{path}': {e}")))?;
    let mut o = ConfigOverrides::default();
    for (number, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "{path}:{}: expected key=value, got '{line}'",
                number + 1
            )));
        };
        let key_norm = key.trim().replace('-', "_");
        let value = value.trim();
        match key_norm.as_str() {
            "L" => o.l_max = Some(parse_value(&key_norm, value)?),
            "K" => o.k_deg = Some(parse_value(&key_norm, value)?),
            "J" => o.j_max = Some(parse_value(&key_norm, value)?),
            "mask_a_deg" => o.mask_a_deg = Some(parse_value(&key_norm, value)?),
            "mask_b_deg" => o.mask_b_deg = Some(parse_value(&key_norm, value)?),
            "tau" => o.tau = Some(parse_value(&key_norm, value)?),
            "seed" => o.seed = Some(parse_value(&key_norm, value)?),
            "method" => o.method = Some(value.to_string()),
            "nu" => {
                let mut grid = Vec::new();
                for part in value.split(',') {
                    grid.push(parse_value("nu", part.trim())?);
                }
                o.nu_grid = Some(grid);
            }
            "spectrum" => o.spectrum = Some(value.to_string()),
            "include_monopole_dipole" => {
                o.include_monopole_dipole = Some(parse_value(&key_norm, value)?)
            }
            "out" => o.out = Some(value.to_string()),
            "workers" => o.workers = Some(parse_value(&key_norm, value)?),
            "grid_exactness" => o.grid_exactness = Some(parse_value(&key_norm, value)?),
            "preset" => o.preset = Some(value.to_string()),
            other => {
                return Err(CliError::Config(format!(
                    "{path}:{}: unknown key '{other}'",
                    number + 1
                )))
            }
        }
    }
    Ok(o)
}

/// Degree-bound presets. The desk preset is the default scale; the full
/// preset matches the large production configuration.
fn preset_bounds(name: &str) -> Result<(usize, usize, usize), CliError> {
    match name {
        "desk" => Ok((32, 96, 128)),
        "full" => Ok((100, 900, 1000)),
        other => Err(CliError::Config(format!(
            "unknown preset '{other}' (expected 'desk' or 'full')"
        ))),
    }
}

/// Resolves defaults, file, and flags into a validated configuration.
pub fn resolve(flags: &ConfigOverrides) -> Result<ExperimentConfig, CliError> {
    let merged = match &flags.config_file {
        Some(path) => parse_file(path)?.overlaid(flags),
        None => flags.clone(),
    };

    let (mut l_max, mut k_deg, mut j_default) = preset_bounds("desk").unwrap();
    if let Some(name) = &merged.preset {
        let (l, k, j) = preset_bounds(name)?;
        l_max = l;
        k_deg = k;
        j_default = j;
    }
    if let Some(l) = merged.l_max {
        l_max = l;
        j_default = usize::MAX; // explicit L invalidates the preset J default
    }
    if let Some(k) = merged.k_deg {
        k_deg = k;
        j_default = usize::MAX;
    }
    if j_default == usize::MAX {
        j_default = l_max + k_deg;
    }
    let j_max = merged.j_max.unwrap_or(j_default);

    let config = ExperimentConfig {
        l_max,
        k_deg,
        j_max,
        mask_a_deg: merged.mask_a_deg.unwrap_or(10.0),
        mask_b_deg: merged.mask_b_deg.unwrap_or(20.0),
        tau: merged.tau.unwrap_or(0.0),
        seed: merged.seed.unwrap_or(0),
        method: Method::parse(merged.method.as_deref().unwrap_or("qr"))?,
        nu_grid: merged
            .nu_grid
            .unwrap_or_else(|| vec![1e-15, 1.0, 10.0, 1e2, 1e3, 1e4, 1e5]),
        spectrum: match merged.spectrum.as_deref() {
            None | Some("tapered") => SpectrumSource::Tapered,
            Some(path) => SpectrumSource::File(PathBuf::from(path)),
        },
        include_monopole_dipole: merged.include_monopole_dipole.unwrap_or(false),
        out: PathBuf::from(merged.out.as_deref().unwrap_or("demask-out")),
        workers: merged.workers,
        grid_exactness: merged.grid_exactness,
    };
    validate(&config)?;
    Ok(config)
}

fn validate(c: &ExperimentConfig) -> Result<(), CliError> {
    if c.l_max < 1 {
        return Err(CliError::Config("L must be at least 1".into()));
    }
    if c.k_deg < 1 {
        return Err(CliError::Config("K must be at least 1".into()));
    }
    if c.j_max < c.l_max || c.j_max > c.l_max + c.k_deg {
        return Err(CliError::Config(format!(
            "J must satisfy L <= J <= L+K, got L={} J={} K={}",
            c.l_max, c.j_max, c.k_deg
        )));
    }
    if !(c.mask_a_deg > 0.0 && c.mask_a_deg < c.mask_b_deg && c.mask_b_deg < 90.0) {
        return Err(CliError::Config(format!(
            "mask latitudes must satisfy 0 < a < b < 90 degrees, got a={} b={}",
            c.mask_a_deg, c.mask_b_deg
        )));
    }
    if !(c.tau >= 0.0) || !c.tau.is_finite() {
        return Err(CliError::Config(format!(
            "tau must be finite and >= 0, got {}",
            c.tau
        )));
    }
    if c.nu_grid.is_empty() {
        return Err(CliError::Config("nu grid must not be empty".into()));
    }
    if c.nu_grid.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(CliError::Config(
            "nu grid entries must be finite and >= 0".into(),
        ));
    }
    if c.workers == Some(0) {
        return Err(CliError::Config("workers must be at least 1".into()));
    }
    if let Some(e) = c.grid_exactness {
        let needed = c.l_max + c.k_deg + c.j_max;
        if e < needed {
            log::warn!(
                "grid exactness {e} is below the exact-projection requirement {needed}; \
                 masked data will carry quadrature error"
            );
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_to_the_desk_preset() {
        let cfg = resolve(&ConfigOverrides::default()).unwrap();
        assert_eq!((cfg.l_max, cfg.k_deg, cfg.j_max), (32, 96, 128));
        assert_eq!(cfg.method, Method::Qr);
        assert_eq!(cfg.nu_grid.len(), 7);
        assert_eq!(cfg.masking_exactness(), 32 + 96 + 128);
        assert!(!cfg.include_monopole_dipole);
    }

    #[test]
    fn explicit_degrees_override_the_preset_and_default_j() {
        let o = ConfigOverrides {
            l_max: Some(8),
            k_deg: Some(16),
            ..Default::default()
        };
        let cfg = resolve(&o).unwrap();
        assert_eq!((cfg.l_max, cfg.k_deg, cfg.j_max), (8, 16, 24));
        let full = ConfigOverrides {
            preset: Some("full".into()),
            ..Default::default()
        };
        let cfg = resolve(&full).unwrap();
        assert_eq!((cfg.l_max, cfg.k_deg, cfg.j_max), (100, 900, 1000));
    }

    #[test]
    fn invalid_configurations_are_rejected_specifically() {
        let bad_j = ConfigOverrides {
            l_max: Some(8),
            k_deg: Some(4),
            j_max: Some(20),
            ..Default::default()
        };
        assert!(matches!(resolve(&bad_j), Err(CliError::Config(_))));
        let bad_mask = ConfigOverrides {
            mask_a_deg: Some(30.0),
            mask_b_deg: Some(20.0),
            ..Default::default()
        };
        assert!(matches!(resolve(&bad_mask), Err(CliError::Config(_))));
        let bad_method = ConfigOverrides {
            method: Some("cholesky".into()),
            ..Default::default()
        };
        assert!(matches!(resolve(&bad_method), Err(CliError::Config(_))));
        let bad_nu = ConfigOverrides {
            nu_grid: Some(vec![]),
            ..Default::default()
        };
        assert!(matches!(resolve(&bad_nu), Err(CliError::Config(_))));
    }

    #[test]
    fn config_file_merging_and_flag_precedence() {
        let dir = std::env::temp_dir().join(format!("demask-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(
            &path,
            "# comment\nL=8\nK=16\ntau=0.01  # inline comment\nmask-a-deg=5\nnu=1,2,3\n",
        )
        .unwrap();
        let o = ConfigOverrides {
            config_file: Some(path.display().to_string()),
            tau: Some(0.5),
            ..Default::default()
        };
        let cfg = resolve(&o).unwrap();
        assert_eq!(cfg.l_max, 8);
        assert_eq!(cfg.tau, 0.5); // flag beats file
        assert_eq!(cfg.mask_a_deg, 5.0);
        assert_eq!(cfg.nu_grid, vec![1.0, 2.0, 3.0]);
        std::fs::write(&path, "unknown_key=1\n").unwrap();
        assert!(matches!(resolve(&o), Err(CliError::Config(_))));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
