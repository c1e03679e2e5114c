//! Scenario description and its TOML config format.
//!
//! ```toml
//! name = "desk"
//! sample_rate = 16000
//! duration_s = 30.0
//! K = 4                 # nodes
//! N = 128               # control filter taps
//! L_s = 64              # secondary path taps
//! L_p = 64              # primary path taps
//! frame_period_s = 0.1
//! hysteresis_db = 0.0
//! cross_gain = 0.3
//! delay_s = 0.0
//! algorithms = ["pc-dmcanc", "centralized", "decentralized", "ideal-mcgd"]
//! mu = 0.0005           # or a table keyed by algorithm
//!
//! [noise]
//! kind = "band"         # "band", "white" or "file"
//! band = [200.0, 900.0]
//!
//! [seeds]
//! paths = 1
//! noise = 2
//! ```
//!
//! Optional keys: `paths_file`, `secondary_model_snr_db`,
//! `compensation_taps` (default `L_s`), `ridge`, `anse_window` (samples,
//! default one frame), `psd_segment`, `communication` (`"rnl"`,
//! `"every-tick"` or `"off"`), and `noise.path` / `noise.channel` for file
//! playback. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use toml::{Table, Value};

use crate::error::{AncError, Result};
use crate::netsim::RoundTrigger;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    PcDmcanc,
    Centralized,
    Decentralized,
    IdealMcgd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::PcDmcanc,
        Algorithm::Centralized,
        Algorithm::Decentralized,
        Algorithm::IdealMcgd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::PcDmcanc => "pc-dmcanc",
            Algorithm::Centralized => "centralized",
            Algorithm::Decentralized => "decentralized",
            Algorithm::IdealMcgd => "ideal-mcgd",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "unknown algorithm {s:?} (expected one of pc-dmcanc, centralized, decentralized, ideal-mcgd)"
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    Band { f_lo: f64, f_hi: f64 },
    White,
    File { path: PathBuf, channel: Option<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub paths: u64,
    pub noise: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub sample_rate: f64,
    pub duration_s: f64,
    pub nodes: usize,
    pub taps: usize,
    pub secondary_taps: usize,
    pub primary_taps: usize,
    pub mu: BTreeMap<Algorithm, f64>,
    pub frame_period_s: f64,
    pub hysteresis_db: f64,
    pub cross_gain: f64,
    pub delay_s: f64,
    pub noise: NoiseSpec,
    pub seeds: Seeds,
    pub algorithms: Vec<Algorithm>,
    pub communication: RoundTrigger,
    pub paths_file: Option<PathBuf>,
    pub secondary_model_snr_db: Option<f64>,
    pub compensation_taps: usize,
    pub ridge: f64,
    pub anse_window: usize,
    pub psd_segment: usize,
}

fn uniform_mu(mu: f64) -> BTreeMap<Algorithm, f64> {
    Algorithm::ALL.into_iter().map(|a| (a, mu)).collect()
}

impl Scenario {
    /// Scaled-down broadband comparison used by the acceptance suite.
    pub fn desk() -> Self {
        Self {
            name: "desk".into(),
            sample_rate: 16000.0,
            duration_s: 30.0,
            nodes: 4,
            taps: 128,
            secondary_taps: 64,
            primary_taps: 64,
            mu: uniform_mu(1e-4),
            frame_period_s: 0.1,
            hysteresis_db: 0.0,
            cross_gain: 0.3,
            delay_s: 0.0,
            noise: NoiseSpec::Band {
                f_lo: 200.0,
                f_hi: 900.0,
            },
            seeds: Seeds { paths: 1, noise: 2 },
            algorithms: Algorithm::ALL.to_vec(),
            communication: RoundTrigger::Rnl,
            paths_file: None,
            secondary_model_snr_db: None,
            compensation_taps: 64,
            ridge: 1e-9,
            anse_window: 1600,
            psd_segment: 4096,
        }
    }

    /// Six nodes, 512-tap control filters, 256-tap secondary paths at
    /// 16 kHz with a 200-900 Hz broadband primary noise.
    pub fn six_node_broadband() -> Self {
        Self {
            name: "six-node-broadband".into(),
            nodes: 6,
            taps: 512,
            secondary_taps: 256,
            primary_taps: 256,
            mu: uniform_mu(5e-7),
            compensation_taps: 256,
            duration_s: 10.0,
            ..Self::desk()
        }
    }

    /// Delay experiment: the proactive protocol under a uniform network
    /// delay, step size 1e-7.
    pub fn six_node_delay(delay_s: f64) -> Self {
        Self {
            name: format!("six-node-delay-{delay_s}s"),
            mu: uniform_mu(1e-7),
            delay_s,
            algorithms: vec![Algorithm::PcDmcanc],
            ..Self::six_node_broadband()
        }
    }

    pub fn frame_len(&self) -> usize {
        (self.frame_period_s * self.sample_rate).round() as usize
    }

    pub fn ticks(&self) -> usize {
        (self.duration_s * self.sample_rate).round() as usize
    }

    pub fn delay_samples(&self) -> u64 {
        (self.delay_s * self.sample_rate).round() as u64
    }

    pub fn mu_for(&self, alg: Algorithm) -> f64 {
        self.mu.get(&alg).copied().unwrap_or(f64::NAN)
    }

    pub fn set_mu(&mut self, mu: f64) {
        self.mu = uniform_mu(mu);
    }

    /// Range-checks every field, reporting all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                errs.push(msg);
            }
        };
        check(!self.name.trim().is_empty(), "name: must not be empty".into());
        check(
            !self.name.contains(['/', '\\']),
            format!("name: {:?} must not contain path separators", self.name),
        );
        check(
            self.sample_rate > 0.0 && self.sample_rate.is_finite(),
            format!("sample_rate: {} must be positive", self.sample_rate),
        );
        check(
            self.duration_s > 0.0 && self.duration_s.is_finite(),
            format!("duration_s: {} must be positive", self.duration_s),
        );
        check(self.nodes >= 1, "K: must be ≥ 1".into());
        check(self.taps >= 1, "N: must be ≥ 1".into());
        check(self.secondary_taps >= 8, format!("L_s: {} must be ≥ 8", self.secondary_taps));
        check(self.primary_taps >= 8, format!("L_p: {} must be ≥ 8", self.primary_taps));
        check(
            self.frame_period_s.is_finite() && self.frame_len() >= 1,
            "frame_period_s: frame_len must be ≥ 1".into(),
        );
        check(
            self.hysteresis_db >= 0.0 && self.hysteresis_db.is_finite(),
            format!("hysteresis_db: {} must be ≥ 0", self.hysteresis_db),
        );
        check(
            (0.0..=1.0).contains(&self.cross_gain),
            format!("cross_gain: {} outside [0, 1]", self.cross_gain),
        );
        check(
            self.delay_s >= 0.0 && self.delay_s.is_finite(),
            format!("delay_s: {} must be ≥ 0", self.delay_s),
        );
        check(!self.algorithms.is_empty(), "algorithms: select at least one".into());
        for alg in &self.algorithms {
            let mu = self.mu_for(*alg);
            check(
                mu.is_finite() && mu > 0.0,
                format!("mu.{alg}: step size must be positive (got {mu})"),
            );
        }
        match &self.noise {
            NoiseSpec::Band { f_lo, f_hi } => {
                let nyq = self.sample_rate / 2.0;
                check(
                    *f_lo > 0.0 && f_lo < f_hi && *f_hi < nyq,
                    format!("noise.band: [{f_lo}, {f_hi}] must satisfy 0 < f_lo < f_hi < {nyq}"),
                );
            }
            NoiseSpec::White | NoiseSpec::File { .. } => {}
        }
        check(self.compensation_taps >= 1, "compensation_taps: must be ≥ 1".into());
        check(
            self.ridge >= 0.0 && self.ridge.is_finite(),
            format!("ridge: {} must be ≥ 0", self.ridge),
        );
        check(self.anse_window >= 1, "anse_window: must be ≥ 1".into());
        check(self.psd_segment >= 2, "psd_segment: must be ≥ 2".into());
        if let Some(snr) = self.secondary_model_snr_db {
            check(snr.is_finite(), "secondary_model_snr_db: must be finite".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(AncError::Config(errs))
        }
    }
}

const TOP_KEYS: &[&str] = &[
    "name",
    "sample_rate",
    "duration_s",
    "K",
    "N",
    "L_s",
    "L_p",
    "mu",
    "frame_period_s",
    "hysteresis_db",
    "cross_gain",
    "delay_s",
    "noise",
    "seeds",
    "algorithms",
    "communication",
    "paths_file",
    "secondary_model_snr_db",
    "compensation_taps",
    "ridge",
    "anse_window",
    "psd_segment",
];
const NOISE_KEYS: &[&str] = &["kind", "band", "path", "channel"];
const SEED_KEYS: &[&str] = &["paths", "noise"];

/// Pulls typed fields out of a TOML table, collecting every problem.
struct Reader<'a> {
    errors: &'a mut Vec<String>,
}

impl Reader<'_> {
    fn unknown_keys(&mut self, table: &Table, allowed: &[&str], prefix: &str) {
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                let hint = match key.as_str() {
                    "stepsize" | "step_size" | "mu_k" => " (did you mean `mu`?)",
                    _ => "",
                };
                self.errors.push(format!("{prefix}{key}: unknown key{hint}"));
            }
        }
    }

    fn float(&mut self, table: &Table, key: &str, path: &str, default: Option<f64>) -> f64 {
        match table.get(key) {
            Some(Value::Float(f)) => *f,
            Some(Value::Integer(i)) => *i as f64,
            Some(other) => {
                self.errors.push(format!("{path}: expected a number, got {}", other.type_str()));
                f64::NAN
            }
            None => default.unwrap_or_else(|| {
                self.errors.push(format!("{path}: missing"));
                f64::NAN
            }),
        }
    }

    fn count(&mut self, table: &Table, key: &str, path: &str, default: Option<usize>) -> usize {
        match table.get(key) {
            Some(Value::Integer(i)) if *i >= 0 => *i as usize,
            Some(Value::Integer(i)) => {
                self.errors.push(format!("{path}: {i} must be ≥ 0"));
                0
            }
            Some(other) => {
                self.errors.push(format!("{path}: expected an integer, got {}", other.type_str()));
                0
            }
            None => default.unwrap_or_else(|| {
                self.errors.push(format!("{path}: missing"));
                0
            }),
        }
    }

    fn string(&mut self, table: &Table, key: &str, path: &str) -> Option<String> {
        match table.get(key) {
            Some(Value::String(s)) => Some(s.clone()),
            Some(other) => {
                self.errors.push(format!("{path}: expected a string, got {}", other.type_str()));
                None
            }
            None => None,
        }
    }
}

/// Parses and validates a scenario document. Relative file paths are
/// resolved against `base_dir`.
pub fn validate_config(raw: &str, base_dir: Option<&Path>) -> Result<Scenario> {
    let table: Table = raw
        .parse()
        .map_err(|e: toml::de::Error| AncError::config(format!("syntax: {}", e.message())))?;
    let mut errors = Vec::new();
    let mut r = Reader { errors: &mut errors };
    r.unknown_keys(&table, TOP_KEYS, "");
    let defaults = Scenario::desk();
    let resolve = |p: String| -> PathBuf {
        let p = PathBuf::from(p);
        match base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p,
        }
    };

    let name = r.string(&table, "name", "name").unwrap_or_else(|| {
        r.errors.push("name: missing".into());
        String::new()
    });
    let sample_rate = r.float(&table, "sample_rate", "sample_rate", None);
    let duration_s = r.float(&table, "duration_s", "duration_s", None);
    let nodes = r.count(&table, "K", "K", None);
    let taps = r.count(&table, "N", "N", None);
    let secondary_taps = r.count(&table, "L_s", "L_s", None);
    let primary_taps = r.count(&table, "L_p", "L_p", Some(secondary_taps));
    let frame_period_s = r.float(&table, "frame_period_s", "frame_period_s", Some(0.1));
    let hysteresis_db = r.float(&table, "hysteresis_db", "hysteresis_db", Some(0.0));
    let cross_gain = r.float(&table, "cross_gain", "cross_gain", Some(defaults.cross_gain));
    let delay_s = r.float(&table, "delay_s", "delay_s", Some(0.0));
    let compensation_taps = r.count(&table, "compensation_taps", "compensation_taps", Some(secondary_taps));
    let ridge = r.float(&table, "ridge", "ridge", Some(defaults.ridge));
    let psd_segment = r.count(&table, "psd_segment", "psd_segment", Some(defaults.psd_segment));
    let frame_len = (frame_period_s * sample_rate).round();
    let anse_window = r.count(
        &table,
        "anse_window",
        "anse_window",
        Some(if frame_len.is_finite() && frame_len >= 1.0 { frame_len as usize } else { 1 }),
    );
    let secondary_model_snr_db = table
        .get("secondary_model_snr_db")
        .map(|_| r.float(&table, "secondary_model_snr_db", "secondary_model_snr_db", None));
    let paths_file = r.string(&table, "paths_file", "paths_file").map(resolve);

    let algorithms = match table.get("algorithms") {
        None => Algorithm::ALL.to_vec(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .filter_map(|(i, v)| match v.as_str().map(str::parse::<Algorithm>) {
                Some(Ok(a)) => Some(a),
                Some(Err(e)) => {
                    r.errors.push(format!("algorithms[{i}]: {e}"));
                    None
                }
                None => {
                    r.errors.push(format!("algorithms[{i}]: expected a string"));
                    None
                }
            })
            .collect(),
        Some(other) => {
            r.errors.push(format!("algorithms: expected an array, got {}", other.type_str()));
            Vec::new()
        }
    };

    let mu = match table.get("mu") {
        None => {
            r.errors.push("mu: missing".into());
            BTreeMap::new()
        }
        Some(Value::Table(t)) => {
            let mut out = BTreeMap::new();
            for key in t.keys() {
                match key.parse::<Algorithm>() {
                    Ok(a) => {
                        out.insert(a, r.float(t, key, &format!("mu.{key}"), None));
                    }
                    Err(e) => r.errors.push(format!("mu.{key}: {e}")),
                }
            }
            out
        }
        Some(_) => uniform_mu(r.float(&table, "mu", "mu", None)),
    };

    let communication = match r.string(&table, "communication", "communication").as_deref() {
        None | Some("rnl") => RoundTrigger::Rnl,
        Some("every-tick") => RoundTrigger::EveryTick,
        Some("off") => RoundTrigger::Never,
        Some(other) => {
            r.errors.push(format!(
                "communication: {other:?} is not one of \"rnl\", \"every-tick\", \"off\""
            ));
            RoundTrigger::Rnl
        }
    };

    let noise = match table.get("noise") {
        None => {
            r.errors.push("noise: missing".into());
            NoiseSpec::White
        }
        Some(Value::Table(t)) => {
            r.unknown_keys(t, NOISE_KEYS, "noise.");
            match r.string(t, "kind", "noise.kind").as_deref() {
                Some("band") => match t.get("band").and_then(Value::as_array) {
                    Some(b) if b.len() == 2 => {
                        let num = |v: &Value| v.as_float().or_else(|| v.as_integer().map(|i| i as f64));
                        match (num(&b[0]), num(&b[1])) {
                            (Some(f_lo), Some(f_hi)) => NoiseSpec::Band { f_lo, f_hi },
                            _ => {
                                r.errors.push("noise.band: expected two numbers".into());
                                NoiseSpec::White
                            }
                        }
                    }
                    _ => {
                        r.errors.push("noise.band: expected [f_lo, f_hi]".into());
                        NoiseSpec::White
                    }
                },
                Some("white") => NoiseSpec::White,
                Some("file") => {
                    let path = r.string(t, "path", "noise.path").map(resolve);
                    let channel = t
                        .get("channel")
                        .map(|_| r.count(t, "channel", "noise.channel", None));
                    match path {
                        Some(path) => NoiseSpec::File { path, channel },
                        None => {
                            r.errors.push("noise.path: required for file noise".into());
                            NoiseSpec::White
                        }
                    }
                }
                Some(other) => {
                    r.errors.push(format!("noise.kind: {other:?} is not one of band, white, file"));
                    NoiseSpec::White
                }
                None => {
                    r.errors.push("noise.kind: missing".into());
                    NoiseSpec::White
                }
            }
        }
        Some(other) => {
            r.errors.push(format!("noise: expected a table, got {}", other.type_str()));
            NoiseSpec::White
        }
    };

    let seeds = match table.get("seeds") {
        None => defaults.seeds,
        Some(Value::Table(t)) => {
            r.unknown_keys(t, SEED_KEYS, "seeds.");
            Seeds {
                paths: r.count(t, "paths", "seeds.paths", Some(defaults.seeds.paths as usize)) as u64,
                noise: r.count(t, "noise", "seeds.noise", Some(defaults.seeds.noise as usize)) as u64,
            }
        }
        Some(other) => {
            r.errors.push(format!("seeds: expected a table, got {}", other.type_str()));
            defaults.seeds
        }
    };

    let scenario = Scenario {
        name,
        sample_rate,
        duration_s,
        nodes,
        taps,
        secondary_taps,
        primary_taps,
        mu,
        frame_period_s,
        hysteresis_db,
        cross_gain,
        delay_s,
        noise,
        seeds,
        algorithms,
        communication,
        paths_file,
        secondary_model_snr_db,
        compensation_taps,
        ridge,
        anse_window,
        psd_segment,
    };
    if let Err(AncError::Config(more)) = scenario.validate() {
        for m in more {
            // Missing fields already produced a clearer message.
            let field = m.split(':').next().unwrap_or_default().to_string();
            if !errors.iter().any(|e| e.starts_with(&format!("{field}:"))) {
                errors.push(m);
            }
        }
    }
    if errors.is_empty() {
        Ok(scenario)
    } else {
        Err(AncError::Config(errors))
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path)?;
    validate_config(&raw, path.parent())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "t"
sample_rate = 16000
duration_s = 2.0
K = 2
N = 32
L_s = 16
L_p = 16
mu = 0.001
frame_period_s = 0.1
algorithms = ["pc-dmcanc", "centralized"]

[noise]
kind = "band"
band = [200.0, 900.0]

[seeds]
paths = 3
noise = 4
"#;

    #[test]
    fn base_config_parses() {
        let s = validate_config(BASE, None).unwrap();
        assert_eq!(s.nodes, 2);
        assert_eq!(s.frame_len(), 1600);
        assert_eq!(s.anse_window, 1600);
        assert_eq!(s.compensation_taps, 16);
        assert_eq!(s.mu_for(Algorithm::Centralized), 0.001);
        assert_eq!(s.algorithms, vec![Algorithm::PcDmcanc, Algorithm::Centralized]);
        assert_eq!(s.seeds, Seeds { paths: 3, noise: 4 });
    }

    #[test]
    fn zero_frame_period_rejected() {
        let raw = BASE.replace("frame_period_s = 0.1", "frame_period_s = 0.0");
        let err = validate_config(&raw, None).unwrap_err().to_string();
        assert!(err.contains("frame_len must be ≥ 1"), "{err}");
    }

    #[test]
    fn typo_key_named() {
        let raw = BASE.replace("mu = 0.001", "stepsize = 0.001");
        let err = validate_config(&raw, None).unwrap_err().to_string();
        assert!(err.contains("stepsize: unknown key"), "{err}");
        assert!(err.contains("mu: missing"), "{err}");
    }

    #[test]
    fn inverted_band_rejected() {
        let raw = BASE.replace("[200.0, 900.0]", "[900.0, 200.0]");
        let err = validate_config(&raw, None).unwrap_err().to_string();
        assert!(err.contains("noise.band"), "{err}");
    }

    #[test]
    fn errors_are_aggregated() {
        let raw = BASE
            .replace("K = 2", "K = 0")
            .replace("duration_s = 2.0", "duration_s = -1.0")
            .replace("[seeds]", "[seeds]\nbogus = 1");
        match validate_config(&raw, None).unwrap_err() {
            AncError::Config(list) => {
                assert!(list.iter().any(|e| e.starts_with("K:")));
                assert!(list.iter().any(|e| e.starts_with("duration_s:")));
                assert!(list.iter().any(|e| e.starts_with("seeds.bogus:")));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn per_algorithm_mu_table() {
        let raw = BASE.replace("mu = 0.001", "[mu]\npc-dmcanc = 0.002\ncentralized = 0.001\n");
        // The table must come after top-level keys in TOML; rebuild in order.
        let raw = format!(
            "{}\n",
            raw.replace("[mu]\npc-dmcanc = 0.002\ncentralized = 0.001\n", "")
        ) + "[mu]\npc-dmcanc = 0.002\ncentralized = 0.001\n";
        let s = validate_config(&raw, None).unwrap();
        assert_eq!(s.mu_for(Algorithm::PcDmcanc), 0.002);
        assert_eq!(s.mu_for(Algorithm::Centralized), 0.001);
    }

    #[test]
    fn missing_mu_for_selected_algorithm() {
        let raw = BASE.replace("mu = 0.001", "") + "[mu]\ncentralized = 0.001\n";
        let err = validate_config(&raw, None).unwrap_err().to_string();
        assert!(err.contains("mu.pc-dmcanc"), "{err}");
    }

    #[test]
    fn file_noise_paths_are_resolved() {
        let raw = BASE.replace("kind = \"band\"\nband = [200.0, 900.0]", "kind = \"file\"\npath = \"rec.wav\"");
        let s = validate_config(&raw, Some(Path::new("/data"))).unwrap();
        assert_eq!(
            s.noise,
            NoiseSpec::File {
                path: PathBuf::from("/data/rec.wav"),
                channel: None
            }
        );
    }

    #[test]
    fn presets_validate() {
        Scenario::desk().validate().unwrap();
        Scenario::six_node_broadband().validate().unwrap();
        Scenario::six_node_delay(3.0).validate().unwrap();
        assert_eq!(Scenario::six_node_delay(0.5).delay_samples(), 8000);
    }
}
