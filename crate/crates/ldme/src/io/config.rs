//! Line-oriented `key=value` run configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::IoError;

const KEYS: [&str; 6] = ["alpha", "sigma", "eps", "delta", "seed", "flags"];

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "LDME_SEED";

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunConfig {
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub seed: Option<u64>,
    pub flags: Vec<String>,
    /// Every accepted line verbatim, for echoing into reports.
    pub raw: BTreeMap<String, String>,
}

impl RunConfig {
    /// Blank lines and `#` comments are skipped; keys are case-sensitive.
    pub fn parse(text: &str) -> Result<Self, IoError> {
        let mut cfg = Self::default();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| IoError::Config { line: line_no, message: format!("expected key=value, got {line:?}") })?;
            let (key, value) = (key.trim(), value.trim());
            cfg.set(key, value).map_err(|message| IoError::Config { line: line_no, message })?;
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(|e| IoError::Fs(path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    /// Sets one key, rejecting unknown keys and unparsable values.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        if !KEYS.contains(&key) {
            return Err(format!("unknown key {key:?} (expected one of {})", KEYS.join(", ")));
        }
        let num = |v: &str| v.parse::<f64>().map_err(|_| format!("{key}: cannot parse {v:?} as a number"));
        match key {
            "alpha" => self.alpha = Some(num(value)?),
            "sigma" => self.sigma = Some(num(value)?),
            "eps" => self.eps = Some(num(value)?),
            "delta" => self.delta = Some(num(value)?),
            "seed" => self.seed = Some(value.parse().map_err(|_| format!("seed: cannot parse {value:?}"))?),
            _ => {
                self.flags = value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
            }
        }
        self.raw.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }

    /// Applies `LDME_SEED` when set; the override is echoed in `raw`.
    pub fn apply_env(&mut self) -> Result<(), IoError> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            let s = v.trim().parse().map_err(|_| IoError::Invalid(format!("{SEED_ENV}={v:?} is not a u64")))?;
            self.seed = Some(s);
            self.raw.insert("seed".into(), v.trim().to_string());
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        KEYS.iter().filter_map(|k| self.raw.get(*k).map(|v| format!("{k}={v}\n"))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_keys() {
        let c = RunConfig::parse("# run\nalpha=0.25\nsigma = 1\nseed=7\nflags=fast, verbose\n").unwrap();
        assert_eq!(c.alpha, Some(0.25));
        assert_eq!(c.sigma, Some(1.0));
        assert_eq!(c.seed, Some(7));
        assert!(c.has_flag("verbose"));
        assert_eq!(c.raw.len(), 4);
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let e = RunConfig::parse("alpha=0.1\ngamma=3\n").unwrap_err();
        assert!(matches!(e, IoError::Config { line: 2, .. }));
        assert!(RunConfig::parse("alpha\n").is_err());
        assert!(RunConfig::parse("seed=-1\n").is_err());
    }
}
