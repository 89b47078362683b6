//! Flat `key = value` configuration.
//!
//! Precedence, lowest first: built-in defaults, the config file, command-line
//! flags. Blank lines and lines starting with `#` are ignored. Relative paths
//! are taken as given, so they resolve against the working directory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::encoding::DatasetMode;
use crate::induction::InductionConfig;
use crate::kb::ConstantStyle;
use crate::som::Schedule;

/// Raw key/value pairs, ordered by key.
pub type Settings = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
}

pub const KEYS: &[&str] = &[
    "activity_sigma",
    "ancillary",
    "constants",
    "dataset",
    "eta0",
    "examples",
    "grid",
    "induction_eta0",
    "induction_steps",
    "iters",
    "k_vote",
    "kb",
    "mode",
    "out",
    "seed",
    "sigma0",
    "target",
    "tau_eta",
    "tau_sigma",
];

pub fn parse_settings(text: &str) -> Result<Settings, ConfigError> {
    let mut out = Settings::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: n + 1 })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: n + 1 });
        }
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::DuplicateKey {
                line: n + 1,
                key: k.to_string(),
            });
        }
    }
    Ok(out)
}

/// Parses `RxC` (also accepts `R×C`).
pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X', '×'])
        .ok_or_else(|| "expected ROWSxCOLS".to_string())?;
    let r: usize = r.trim().parse().map_err(|e| format!("rows: {e}"))?;
    let c: usize = c.trim().parse().map_err(|e| format!("cols: {e}"))?;
    if r == 0 || c == 0 {
        return Err("grid dimensions must be positive".into());
    }
    Ok((r, c))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    #[default]
    Som,
    Asom,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "som" => Ok(Mode::Som),
            "asom" => Ok(Mode::Asom),
            _ => Err("expected `som` or `asom`".into()),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Som => "som",
            Mode::Asom => "asom",
        })
    }
}

/// Which ancillary inputs an A-SOM receives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Ancillary {
    /// One-hot predicate-space instance vectors, row-aligned with the atoms.
    #[default]
    Predicates,
    None,
}

impl FromStr for Ancillary {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "predicates" => Ok(Ancillary::Predicates),
            "none" => Ok(Ancillary::None),
            _ => Err("expected `predicates` or `none`".into()),
        }
    }
}

impl fmt::Display for Ancillary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ancillary::Predicates => "predicates",
            Ancillary::None => "none",
        })
    }
}

/// Optional replacements for the default training schedule.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScheduleOverrides {
    pub eta0: Option<f64>,
    pub tau_eta: Option<f64>,
    pub sigma0: Option<f64>,
    pub tau_sigma: Option<f64>,
}

impl ScheduleOverrides {
    pub fn apply(&self, mut s: Schedule) -> Schedule {
        if let Some(v) = self.eta0 {
            s.eta0 = v;
        }
        if let Some(v) = self.tau_eta {
            s.tau_eta = v;
        }
        if let Some(v) = self.sigma0 {
            s.sigma0 = v;
        }
        if let Some(v) = self.tau_sigma {
            s.tau_sigma = v;
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub kb: PathBuf,
    pub examples: PathBuf,
    pub target: String,
    pub rows: usize,
    pub cols: usize,
    pub iters: usize,
    pub seed: u64,
    pub mode: Mode,
    pub out: PathBuf,
    pub constants: ConstantStyle,
    pub dataset: DatasetMode,
    pub schedule: ScheduleOverrides,
    pub activity_sigma: f64,
    pub ancillary: Ancillary,
    pub induction: InductionConfig,
}

fn get<T: FromStr>(s: &Settings, key: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    s.get(key)
        .map(|v| {
            v.parse::<T>().map_err(|e| ConfigError::InvalidValue {
                key: key.to_string(),
                value: v.clone(),
                reason: e.to_string(),
            })
        })
        .transpose()
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::InvalidValue {
            key: key.into(),
            value: v.to_string(),
            reason: "must be a positive number".into(),
        })
    }
}

fn non_negative(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::InvalidValue {
            key: key.into(),
            value: v.to_string(),
            reason: "must be a non-negative number".into(),
        })
    }
}

impl PipelineConfig {
    /// Default iteration counts: 10,000 for a SOM, 1,000 for an A-SOM.
    pub fn default_iters(mode: Mode) -> usize {
        match mode {
            Mode::Som => 10_000,
            Mode::Asom => 1_000,
        }
    }

    /// Full pipeline configuration: `kb`, `examples` and `target` are required.
    pub fn from_settings(s: &Settings) -> Result<Self, ConfigError> {
        Self::from_settings_requiring(s, &["kb", "examples", "target"])
    }

    /// Like [`Self::from_settings`] but only the listed keys among `kb`,
    /// `examples` and `target` are required; absent ones are left empty.
    pub fn from_settings_requiring(
        s: &Settings,
        required: &[&'static str],
    ) -> Result<Self, ConfigError> {
        for &k in required {
            if !s.contains_key(k) {
                return Err(ConfigError::Missing(k));
            }
        }
        if let Some(k) = s.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(ConfigError::UnknownKey(k.clone()));
        }
        let kb: PathBuf = get(s, "kb")?.unwrap_or_default();
        let examples: PathBuf = get(s, "examples")?.unwrap_or_default();
        let target: String = get(s, "target")?.unwrap_or_default();
        let (rows, cols) = match s.get("grid") {
            Some(g) => parse_grid(g).map_err(|reason| ConfigError::InvalidValue {
                key: "grid".into(),
                value: g.clone(),
                reason,
            })?,
            None => (20, 20),
        };
        let mode: Mode = get(s, "mode")?.unwrap_or_default();
        let mut induction = InductionConfig::default();
        if let Some(v) = get(s, "induction_steps")? {
            induction.steps = v;
        }
        if let Some(v) = get::<f64>(s, "induction_eta0")? {
            induction.eta0 = non_negative("induction_eta0", v)?;
        }
        if let Some(v) = get::<usize>(s, "k_vote")? {
            if v == 0 {
                return Err(ConfigError::InvalidValue {
                    key: "k_vote".into(),
                    value: "0".into(),
                    reason: "must be at least 1".into(),
                });
            }
            induction.k_vote = v;
        }
        let seed = get(s, "seed")?.unwrap_or(0);
        induction.seed = seed;
        let schedule = ScheduleOverrides {
            eta0: get::<f64>(s, "eta0")?
                .map(|v| non_negative("eta0", v))
                .transpose()?,
            tau_eta: get::<f64>(s, "tau_eta")?
                .map(|v| positive("tau_eta", v))
                .transpose()?,
            sigma0: get::<f64>(s, "sigma0")?
                .map(|v| positive("sigma0", v))
                .transpose()?,
            tau_sigma: get::<f64>(s, "tau_sigma")?
                .map(|v| positive("tau_sigma", v))
                .transpose()?,
        };
        Ok(PipelineConfig {
            kb,
            examples,
            target,
            rows,
            cols,
            iters: get(s, "iters")?.unwrap_or(Self::default_iters(mode)),
            seed,
            mode,
            out: get(s, "out")?.unwrap_or_else(|| PathBuf::from("nemus-out")),
            constants: get(s, "constants")?.unwrap_or_default(),
            dataset: get(s, "dataset")?.unwrap_or_default(),
            schedule,
            activity_sigma: positive(
                "activity_sigma",
                get(s, "activity_sigma")?.unwrap_or(1.0),
            )?,
            ancillary: get(s, "ancillary")?.unwrap_or_default(),
            induction,
        })
    }

    /// Fully resolved settings, excluding the output directory.
    pub fn canonical(&self) -> Settings {
        let mut s = Settings::new();
        let mut put = |k: &str, v: String| {
            s.insert(k.to_string(), v);
        };
        put("kb", self.kb.display().to_string());
        put("examples", self.examples.display().to_string());
        put("target", self.target.clone());
        put("grid", format!("{}x{}", self.rows, self.cols));
        put("iters", self.iters.to_string());
        put("seed", self.seed.to_string());
        put("mode", self.mode.to_string());
        put("constants", self.constants.to_string());
        put("dataset", self.dataset.to_string());
        for (k, v) in [
            ("eta0", self.schedule.eta0),
            ("tau_eta", self.schedule.tau_eta),
            ("sigma0", self.schedule.sigma0),
            ("tau_sigma", self.schedule.tau_sigma),
        ] {
            if let Some(v) = v {
                put(k, v.to_string());
            }
        }
        put("activity_sigma", self.activity_sigma.to_string());
        put("ancillary", self.ancillary.to_string());
        put("induction_steps", self.induction.steps.to_string());
        put("induction_eta0", self.induction.eta0.to_string());
        put("k_vote", self.induction.k_vote.to_string());
        s
    }

    /// SHA-256 of the canonical settings rendered as `key = value` lines.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.canonical() {
            h.update(format!("{k} = {v}\n"));
        }
        hex::encode(h.finalize())
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
            .apply(Schedule::for_grid(self.iters, self.rows, self.cols))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Settings {
        parse_settings("kb = a.kb\nexamples = a.ex\ntarget = anc\n").unwrap()
    }

    #[test]
    fn parses_comments_and_whitespace() {
        let s = parse_settings("# c\n\n  grid =  3x4 \nseed=9\n").unwrap();
        assert_eq!(s["grid"], "3x4");
        assert_eq!(s["seed"], "9");
    }

    #[test]
    fn rejects_bad_lines() {
        assert_eq!(parse_settings("grid 3x4"), Err(ConfigError::Syntax { line: 1 }));
        assert_eq!(
            parse_settings("bogus = 1"),
            Err(ConfigError::UnknownKey("bogus".into()))
        );
        assert!(matches!(
            parse_settings("seed = 1\nseed = 2"),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
    }

    #[test]
    fn defaults() {
        let c = PipelineConfig::from_settings(&base()).unwrap();
        assert_eq!((c.rows, c.cols, c.iters, c.seed), (20, 20, 10_000, 0));
        assert_eq!(c.mode, Mode::Som);
        let mut s = base();
        s.insert("mode".into(), "asom".into());
        assert_eq!(PipelineConfig::from_settings(&s).unwrap().iters, 1_000);
    }

    #[test]
    fn missing_and_invalid() {
        let mut s = base();
        s.remove("kb");
        assert_eq!(PipelineConfig::from_settings(&s), Err(ConfigError::Missing("kb")));
        let mut s = base();
        s.insert("grid".into(), "0x3".into());
        assert!(PipelineConfig::from_settings(&s).is_err());
        let mut s = base();
        s.insert("tau_eta".into(), "-1".into());
        assert!(PipelineConfig::from_settings(&s).is_err());
    }

    #[test]
    fn overrides_reach_schedule() {
        let mut s = base();
        s.insert("eta0".into(), "0.1".into());
        let c = PipelineConfig::from_settings(&s).unwrap();
        assert_eq!(c.schedule().eta0, 0.1);
        assert_eq!(c.schedule().tau_eta, 2500.0);
    }

    #[test]
    fn hash_ignores_out_dir() {
        let mut a = base();
        a.insert("out".into(), "x".into());
        let mut b = base();
        b.insert("out".into(), "y".into());
        let ha = PipelineConfig::from_settings(&a).unwrap().hash();
        let hb = PipelineConfig::from_settings(&b).unwrap().hash();
        assert_eq!(ha, hb);
        b.insert("seed".into(), "1".into());
        assert_ne!(ha, PipelineConfig::from_settings(&b).unwrap().hash());
    }

    #[test]
    fn grid_formats() {
        assert_eq!(parse_grid("20x20"), Ok((20, 20)));
        assert_eq!(parse_grid("2×3"), Ok((2, 3)));
        assert!(parse_grid("20").is_err());
    }
}
