use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{ASSET_NAMES, HEALTH_FACTORS};

/// Mean and spread change of one asset between the two census rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub mean_shift: f64,
    pub variance_shift: f64,
}

impl Drift {
    pub const NONE: Drift = Drift {
        mean_shift: 0.0,
        variance_shift: 0.0,
    };

    pub fn is_zero(&self) -> bool {
        self.mean_shift == 0.0 && self.variance_shift == 0.0
    }
}

const DEFAULT_DRIFT: [(f64, f64); 16] = [
    (0.03, 0.0),
    (0.02, 0.0),
    (0.10, 0.0),
    (0.0, 0.0),
    (-0.05, 0.0),
    (0.15, 0.1),
    (-0.08, 0.0),
    (0.20, 0.2),
    (0.60, 0.0),
    (0.10, 0.0),
    (0.15, 0.3),
    (-0.10, 0.0),
    (0.20, 0.0),
    (0.15, 0.2),
    (0.20, 0.0),
    (0.10, 0.0),
];

/// Parameters of a synthetic world. Read from and written to a plain
/// `key = value` text file; `#` starts a comment.
///
/// ```text
/// seed = 7
/// villages = 2000
/// drift.has-phone = 0.6, 0.0
/// linked_factors = 1-20, 31, 40-45
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub seed: u64,
    pub n_states: usize,
    pub n_districts: usize,
    pub n_tehsils: usize,
    pub n_villages: usize,
    pub scenes_per_year: usize,
    /// Probability that a scene carries a large cloud field.
    pub cloud_rate: f64,
    /// Probability that a post-2003 scene carries scan-line gaps.
    pub slc_rate: f64,
    pub nightlight_noise: f64,
    pub survey_missing_rate: f64,
    /// Per-asset drift from the first to the second census round, in [`ASSET_NAMES`] order.
    pub drift: [Drift; 16],
    /// 1-based ids of the health factors driven by the latent score.
    pub linked_factors: Vec<usize>,
    /// When false the scene archive is not written; scenes are rendered on demand.
    pub persist_scenes: bool,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            seed: 0,
            n_states: 2,
            n_districts: 40,
            n_tehsils: 120,
            n_villages: 2000,
            scenes_per_year: 4,
            cloud_rate: 0.25,
            slc_rate: 0.5,
            nightlight_noise: 0.03,
            survey_missing_rate: 0.01,
            drift: DEFAULT_DRIFT.map(|(m, v)| Drift {
                mean_shift: m,
                variance_shift: v,
            }),
            linked_factors: (1..=HEALTH_FACTORS).step_by(2).collect(),
            persist_scenes: true,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Spec(format!("{key}: cannot parse '{value}'")))
}

fn parse_factor_list(value: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (a, b): (usize, usize) = match part.split_once('-') {
            Some((a, b)) => (parse_num("linked_factors", a.trim())?, parse_num("linked_factors", b.trim())?),
            None => {
                let v = parse_num("linked_factors", part)?;
                (v, v)
            }
        };
        if a == 0 || b > HEALTH_FACTORS || a > b {
            return Err(Error::Spec(format!("linked_factors: bad range '{part}'")));
        }
        out.extend(a..=b);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn format_factor_list(ids: &[usize]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < ids.len() {
        let mut j = i;
        while j + 1 < ids.len() && ids[j + 1] == ids[j] + 1 {
            j += 1;
        }
        parts.push(if i == j {
            ids[i].to_string()
        } else {
            format!("{}-{}", ids[i], ids[j])
        });
        i = j + 1;
    }
    parts.join(", ")
}

impl WorldSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = WorldSpec::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Spec(format!("line {}: expected key = value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "seed" => spec.seed = parse_num(key, value)?,
                "states" => spec.n_states = parse_num(key, value)?,
                "districts" => spec.n_districts = parse_num(key, value)?,
                "tehsils" => spec.n_tehsils = parse_num(key, value)?,
                "villages" => spec.n_villages = parse_num(key, value)?,
                "scenes_per_year" => spec.scenes_per_year = parse_num(key, value)?,
                "cloud_rate" => spec.cloud_rate = parse_num(key, value)?,
                "slc_rate" => spec.slc_rate = parse_num(key, value)?,
                "nightlight_noise" => spec.nightlight_noise = parse_num(key, value)?,
                "survey_missing_rate" => spec.survey_missing_rate = parse_num(key, value)?,
                "persist_scenes" => spec.persist_scenes = parse_num(key, value)?,
                "linked_factors" => spec.linked_factors = parse_factor_list(value)?,
                "drift" => {
                    if value != "none" {
                        return Err(Error::Spec(format!("drift: only 'none' is accepted, got '{value}'")));
                    }
                    spec.drift = [Drift::NONE; 16];
                }
                _ => {
                    let Some(name) = key.strip_prefix("drift.") else {
                        return Err(Error::Spec(format!("line {}: unknown key '{key}'", n + 1)));
                    };
                    let k = ASSET_NAMES
                        .iter()
                        .position(|a| *a == name)
                        .ok_or_else(|| Error::Spec(format!("drift: unknown asset '{name}'")))?;
                    let (m, v) = value
                        .split_once(',')
                        .ok_or_else(|| Error::Spec(format!("{key}: expected 'mean_shift, variance_shift'")))?;
                    spec.drift[k] = Drift {
                        mean_shift: parse_num(key, m.trim())?,
                        variance_shift: parse_num(key, v.trim())?,
                    };
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "states = {}", self.n_states);
        let _ = writeln!(s, "districts = {}", self.n_districts);
        let _ = writeln!(s, "tehsils = {}", self.n_tehsils);
        let _ = writeln!(s, "villages = {}", self.n_villages);
        let _ = writeln!(s, "scenes_per_year = {}", self.scenes_per_year);
        let _ = writeln!(s, "cloud_rate = {}", self.cloud_rate);
        let _ = writeln!(s, "slc_rate = {}", self.slc_rate);
        let _ = writeln!(s, "nightlight_noise = {}", self.nightlight_noise);
        let _ = writeln!(s, "survey_missing_rate = {}", self.survey_missing_rate);
        let _ = writeln!(s, "persist_scenes = {}", self.persist_scenes);
        let _ = writeln!(s, "linked_factors = {}", format_factor_list(&self.linked_factors));
        for (name, d) in ASSET_NAMES.iter().zip(&self.drift) {
            let _ = writeln!(s, "drift.{name} = {}, {}", d.mean_shift, d.variance_shift);
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let (s, d, t, v) = (self.n_states, self.n_districts, self.n_tehsils, self.n_villages);
        if s == 0 || d < s || t < d || v < t {
            return Err(Error::Spec(format!(
                "hierarchy must satisfy villages >= tehsils >= districts >= states >= 1, got {v} >= {t} >= {d} >= {s}"
            )));
        }
        if self.scenes_per_year == 0 {
            return Err(Error::Spec("scenes_per_year must be positive".into()));
        }
        for (name, p) in [
            ("cloud_rate", self.cloud_rate),
            ("slc_rate", self.slc_rate),
            ("survey_missing_rate", self.survey_missing_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Spec(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !(self.nightlight_noise >= 0.0 && self.nightlight_noise.is_finite()) {
            return Err(Error::Spec("nightlight_noise must be finite and nonnegative".into()));
        }
        for (name, d) in ASSET_NAMES.iter().zip(&self.drift) {
            if !d.mean_shift.is_finite() || !d.variance_shift.is_finite() || d.variance_shift <= -1.0 {
                return Err(Error::Spec(format!("drift.{name} must be finite with variance_shift > -1")));
            }
        }
        if self.linked_factors.iter().any(|f| *f == 0 || *f > HEALTH_FACTORS) {
            return Err(Error::Spec("linked_factors must lie in 1..=93".into()));
        }
        Ok(())
    }

    pub fn is_linked(&self, factor: usize) -> bool {
        self.linked_factors.binary_search(&factor).is_ok()
    }

    /// Drift per asset name, for reporting.
    pub fn drift_table(&self) -> BTreeMap<&'static str, Drift> {
        ASSET_NAMES.iter().copied().zip(self.drift.iter().copied()).collect()
    }
}
