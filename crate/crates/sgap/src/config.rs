//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Unknown keys are rejected. Every sweep records the full set of keys it
//! used, defaults included, so the recorded map reproduces the run.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sgap_core::completion::SolveOptions;
use sgap_core::designs::CoilConfig;
use sgap_core::experiments::{DensitySweepConfig, JitterSweepConfig, RelocationConfig};
use sgap_core::SpectralOptions;

use crate::error::{Error, Result};

/// Parsed key-value pairs with the line each came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", k + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", k + 1)));
            }
            if entries
                .insert(key.to_string(), (k + 1, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", k + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_pairs<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Self {
        Self {
            entries: pairs.into_iter().map(|(k, v)| (k.into(), (0, v.into()))).collect(),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), (0, value.into()));
    }
}

/// Value types that round-trip through their text form.
pub trait Value: Sized {
    fn parse_value(s: &str) -> Option<Self>;
    fn render(&self) -> String;
}

macro_rules! plain_value {
    ($($t:ty),*) => {$(
        impl Value for $t {
            fn parse_value(s: &str) -> Option<Self> {
                <$t as FromStr>::from_str(s).ok()
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

plain_value!(usize, u64, f64, bool, String);

impl Value for Option<usize> {
    fn parse_value(s: &str) -> Option<Self> {
        if s == "auto" {
            Some(None)
        } else {
            s.parse().ok().map(Some)
        }
    }
    fn render(&self) -> String {
        self.map_or_else(|| "auto".into(), |v| v.to_string())
    }
}

fn join<T: Display>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl Value for Vec<f64> {
    fn parse_value(s: &str) -> Option<Self> {
        s.split(',').map(|t| t.trim().parse().ok()).collect()
    }
    fn render(&self) -> String {
        join(self)
    }
}

/// Spacings written `XxY`, or a single number for square cells.
impl Value for Vec<(f64, f64)> {
    fn parse_value(s: &str) -> Option<Self> {
        s.split(',')
            .map(|t| match t.trim().split_once('x') {
                Some((a, b)) => Some((a.trim().parse().ok()?, b.trim().parse().ok()?)),
                None => {
                    let v: f64 = t.trim().parse().ok()?;
                    Some((v, v))
                }
            })
            .collect()
    }
    fn render(&self) -> String {
        join(self.iter().map(|(a, b)| format!("{a}x{b}")))
    }
}

/// Reads typed values with defaults and records what was used.
pub struct Reader {
    kv: KeyValues,
    used: BTreeSet<String>,
    effective: BTreeMap<String, String>,
}

impl Reader {
    pub fn new(kv: KeyValues) -> Self {
        Self {
            kv,
            used: BTreeSet::new(),
            effective: BTreeMap::new(),
        }
    }

    pub fn get<T: Value>(&mut self, key: &str, default: T) -> Result<T> {
        self.used.insert(key.to_string());
        let value = match self.kv.entries.get(key) {
            Some((line, raw)) => T::parse_value(raw).ok_or_else(|| {
                let at = if *line > 0 {
                    format!("line {line}: ")
                } else {
                    String::new()
                };
                Error::Config(format!("{at}invalid value `{raw}` for `{key}`"))
            })?,
            None => default,
        };
        self.effective.insert(key.to_string(), value.render());
        Ok(value)
    }

    /// Errors on keys nobody asked for; returns the effective map.
    pub fn finish(self) -> Result<BTreeMap<String, String>> {
        let unknown: Vec<&String> = self.kv.entries.keys().filter(|k| !self.used.contains(*k)).collect();
        if !unknown.is_empty() {
            return Err(Error::Config(format!(
                "unknown key(s): {}",
                unknown.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", ")
            )));
        }
        Ok(self.effective)
    }
}

pub fn read_spectral(r: &mut Reader, d: SpectralOptions) -> Result<SpectralOptions> {
    Ok(SpectralOptions {
        tol: r.get("spectral.tol", d.tol)?,
        max_iter: r.get("spectral.max_iter", d.max_iter)?,
        trim_empty: r.get("trim_empty", d.trim_empty)?,
    })
}

pub fn read_solver(r: &mut Reader, d: SolveOptions) -> Result<SolveOptions> {
    Ok(SolveOptions {
        delta: r.get("solver.delta", d.delta)?,
        tau0_rel: r.get("solver.tau0_rel", d.tau0_rel)?,
        tau_decay: r.get("solver.tau_decay", d.tau_decay)?,
        tau_floor_rel: r.get("solver.tau_floor_rel", d.tau_floor_rel)?,
        continuation: r.get("solver.continuation", d.continuation)?,
        inner_tol: r.get("solver.inner_tol", d.inner_tol)?,
        tol: r.get("solver.tol", d.tol)?,
        abs_tol: r.get("solver.abs_tol", d.abs_tol)?,
        max_iter: r.get("solver.max_iter", d.max_iter)?,
        divergence_window: r.get("solver.divergence_window", d.divergence_window)?,
        oversample: r.get("solver.oversample", d.oversample)?,
        record_history: false,
        seed: r.get("solver.seed", d.seed)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepKind {
    Relocation,
    Jitter,
    Density,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Relocation => "relocation",
            SweepKind::Jitter => "jitter",
            SweepKind::Density => "density",
        }
    }
}

/// Where the density sweep gets its point cloud.
#[derive(Debug, Clone, PartialEq)]
pub enum PointSource {
    File(PathBuf),
    Coil(CoilConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepSpec {
    Relocation(RelocationConfig),
    Jitter(JitterSweepConfig),
    Density {
        config: DensitySweepConfig,
        source: PointSource,
    },
}

/// A sweep with its seed and the effective key-value map that reproduces it.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub kind: SweepKind,
    pub seed: u64,
    pub spec: SweepSpec,
    pub effective: BTreeMap<String, String>,
}

/// Build a sweep from key-value pairs. Relative point-file paths resolve
/// against `base_dir`. `seed` and `trim_empty` from the command line win over
/// the file.
pub fn sweep_from_kv(
    kind: SweepKind,
    mut kv: KeyValues,
    base_dir: &Path,
    seed: Option<u64>,
    trim_empty: bool,
) -> Result<SweepRun> {
    if let Some(k) = kv.get("kind") {
        if k != kind.as_str() {
            return Err(Error::Config(format!(
                "config is for a `{k}` sweep, not `{}`",
                kind.as_str()
            )));
        }
    }
    if let Some(s) = seed {
        kv.set("seed", s.to_string());
    }
    if trim_empty {
        kv.set("trim_empty", "true");
    }
    let mut r = Reader::new(kv);
    r.get("kind", kind.as_str().to_string())?;
    let seed = r.get("seed", 1u64)?;
    let spec = match kind {
        SweepKind::Relocation => {
            let d = RelocationConfig::default();
            SweepSpec::Relocation(RelocationConfig {
                n_src: r.get("n_src", d.n_src)?,
                n_rec: r.get("n_rec", d.n_rec)?,
                keep_every: r.get("keep_every", d.keep_every)?,
                rank: r.get("rank", d.rank)?,
                p_grid: r.get("p_grid", d.p_grid)?,
                trials: r.get("trials", d.trials)?,
                spectral: read_spectral(&mut r, d.spectral)?,
                solver: read_solver(&mut r, d.solver)?,
            })
        }
        SweepKind::Jitter => {
            let d = JitterSweepConfig::default();
            SweepSpec::Jitter(JitterSweepConfig {
                n_src: r.get("n_src", d.n_src)?,
                n_rec: r.get("n_rec", d.n_rec)?,
                rho_grid: r.get("rho_grid", d.rho_grid)?,
                missing: r.get("missing", d.missing)?,
                trials: r.get("trials", d.trials)?,
                restrict_alternate_only: r.get("restrict_alternate_only", d.restrict_alternate_only)?,
                allow_partial_tail: r.get("allow_partial_tail", d.allow_partial_tail)?,
                spectral: read_spectral(&mut r, d.spectral)?,
            })
        }
        SweepKind::Density => {
            let d = DensitySweepConfig::new(
                Vec::new(),
                vec![(400.0, 400.0), (200.0, 200.0), (100.0, 100.0), (50.0, 50.0)],
            );
            let points: String = r.get("points", "coil".to_string())?;
            let source = if points == "coil" {
                let c = CoilConfig::default();
                PointSource::Coil(CoilConfig {
                    circles: r.get("coil.circles", c.circles)?,
                    radius: r.get("coil.radius", c.radius)?,
                    point_spacing: r.get("coil.point_spacing", c.point_spacing)?,
                    extent: r.get("coil.extent", c.extent)?,
                })
            } else {
                let p = PathBuf::from(&points);
                PointSource::File(if p.is_absolute() { p } else { base_dir.join(p) })
            };
            SweepSpec::Density {
                config: DensitySweepConfig {
                    points: Vec::new(),
                    spacings: r.get("spacings", d.spacings)?,
                    solve: r.get("solve", d.solve)?,
                    rank: r.get("rank", d.rank)?,
                    trials: r.get("trials", d.trials)?,
                    spectral: read_spectral(&mut r, d.spectral)?,
                    solver: read_solver(&mut r, d.solver)?,
                },
                source,
            }
        }
    };
    let mut effective = r.finish()?;
    // Record the resolved path so the sidecar works from any directory.
    if let SweepSpec::Density {
        source: PointSource::File(path),
        ..
    } = &spec
    {
        effective.insert("points".into(), path.display().to_string());
    }
    Ok(SweepRun {
        kind,
        seed,
        spec,
        effective,
    })
}

/// Key-value pairs from a config file, or from the `config` object of a
/// metadata sidecar written by an earlier run.
pub fn load_kv(path: &Path) -> Result<KeyValues> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim_start().starts_with('{') {
        let meta: serde_json::Value = serde_json::from_str(&text)?;
        let config = meta
            .get("config")
            .and_then(|c| c.as_object())
            .ok_or_else(|| Error::Config(format!("{}: sidecar has no `config` object", path.display())))?;
        let pairs = config
            .iter()
            .map(|(k, v)| match v.as_str() {
                Some(s) => Ok((k.clone(), s.to_string())),
                None => Err(Error::Config(format!(
                    "{}: config value for `{k}` is not a string",
                    path.display()
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(KeyValues::from_pairs(pairs));
    }
    KeyValues::parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_rejects_junk() {
        let kv = KeyValues::parse("# header\n trials = 3  # inline\n\np_grid=0,0.5,1\n").unwrap();
        assert_eq!(kv.get("trials"), Some("3"));
        assert_eq!(kv.get("p_grid"), Some("0,0.5,1"));
        assert!(KeyValues::parse("trials 3").is_err());
        assert!(KeyValues::parse("a=1\na=2").is_err());
        assert!(KeyValues::parse("=1").is_err());
    }

    #[test]
    fn effective_map_reproduces_the_config() {
        let kv = KeyValues::parse("trials = 3\nkeep_every = 4\np_grid = 0, 0.5").unwrap();
        let run = sweep_from_kv(SweepKind::Relocation, kv, Path::new("."), Some(9), false).unwrap();
        let SweepSpec::Relocation(cfg) = &run.spec else {
            panic!()
        };
        assert_eq!((cfg.trials, cfg.keep_every, run.seed), (3, 4, 9));
        assert_eq!(cfg.p_grid, vec![0.0, 0.5]);
        let again = sweep_from_kv(
            SweepKind::Relocation,
            KeyValues::from_pairs(run.effective.clone()),
            Path::new("."),
            None,
            false,
        )
        .unwrap();
        assert_eq!(again, run);
    }

    #[test]
    fn rejects_unknown_keys_bad_values_and_wrong_kind() {
        let err = |text: &str, kind| sweep_from_kv(kind, KeyValues::parse(text).unwrap(), Path::new("."), None, false);
        assert!(matches!(err("trails = 3", SweepKind::Jitter), Err(Error::Config(m)) if m.contains("trails")));
        assert!(matches!(err("trials = many", SweepKind::Jitter), Err(Error::Config(m)) if m.contains("line 1")));
        assert!(matches!(
            err("kind = jitter", SweepKind::Density),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn spacing_pairs() {
        let v = Vec::<(f64, f64)>::parse_value("400x200, 50").unwrap();
        assert_eq!(v, vec![(400.0, 200.0), (50.0, 50.0)]);
        assert_eq!(v.render(), "400x200,50x50");
        assert_eq!(Option::<usize>::parse_value("auto"), Some(None));
    }
}
