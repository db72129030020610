//! Campaign configuration: built-in defaults, a flat JSON file, the
//! `QRDV_SEED` environment variable and command-line flags, applied in that
//! order.

use std::path::{Path, PathBuf};

use clap::Args;
use qrdv_core::channel::{sojourns_for, ChannelProcess, ChannelState, PuChannel};
use qrdv_core::engine::{ContentionPolicy, PairingPolicy};
use qrdv_core::quorum::{build_grid, AdaptiveThresholds, SelectionScheme};
use serde::Deserialize;
use thiserror::Error;

use crate::campaign::Campaign;

pub const SEED_ENV: &str = "QRDV_SEED";
pub const FULL_SCALE_SLOTS: u64 = 800_000;
pub const DESK_SCALE_SLOTS: u64 = 100_000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config file {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

/// Every campaign setting, optional so that layers can be overlaid. Field
/// names double as JSON keys and `--flag` names.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Args)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated schemes: 1x1, 2x1, 2x2, adaptive
    #[arg(long, value_delimiter = ',')]
    pub schemes: Option<Vec<String>>,
    /// Comma-separated idle probabilities
    #[arg(long, value_delimiter = ',')]
    pub pi_grid: Option<Vec<f64>>,
    /// Comma-separated user counts
    #[arg(long, value_delimiter = ',')]
    pub users: Option<Vec<usize>>,
    /// Slots per run
    #[arg(long, conflicts_with = "paper_scale")]
    pub slots: Option<u64>,
    /// Seeds (replicates) per cell
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Seed of replicate 0; replicate k uses base-seed + k
    #[arg(long)]
    pub base_seed: Option<u64>,
    /// Number of licensed channels
    #[arg(long)]
    pub channels: Option<usize>,
    /// Mean idle + busy duration in slots
    #[arg(long)]
    pub sojourn_scale: Option<f64>,
    /// all-fail | random-winner
    #[arg(long)]
    pub contention: Option<String>,
    /// persistent | per-slot
    #[arg(long)]
    pub pairing: Option<String>,
    /// on | iid
    #[arg(long)]
    pub markov: Option<String>,
    /// Load per channel below which the adaptive scheme uses 2x2
    #[arg(long)]
    pub adaptive_low: Option<f64>,
    /// Load per channel from which the adaptive scheme uses 1x1
    #[arg(long)]
    pub adaptive_high: Option<f64>,
    /// Per-slot probability that an idle transmitter starts an attempt
    #[arg(long)]
    pub attempt_rate: Option<f64>,
    /// Slots averaged by the adaptive load classifier
    #[arg(long)]
    pub load_window: Option<usize>,
    /// Worker threads (default: available cores)
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Run 800000 slots per cell
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub paper_scale: Option<bool>,
    /// csv | json | both
    #[arg(long)]
    pub format: Option<String>,
}

impl Settings {
    /// Overlays `other` on top of `self`.
    pub fn overlay(self, other: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            out,
            schemes,
            pi_grid,
            users,
            slots,
            seeds,
            base_seed,
            channels,
            sojourn_scale,
            contention,
            pairing,
            markov,
            adaptive_low,
            adaptive_high,
            attempt_rate,
            load_window,
            parallelism,
            paper_scale,
            format
        )
    }

    pub fn from_json_str(text: &str, path: &Path) -> Result<Settings, ConfigError> {
        serde_json::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn from_file(path: &Path) -> Result<Settings, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text, path)
    }

    /// Settings carried by the environment.
    pub fn from_env_value(seed: Option<&str>) -> Result<Settings, ConfigError> {
        let base_seed = seed
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| invalid("QRDV_SEED", format!("{s:?} is not an unsigned integer")))
            })
            .transpose()?;
        Ok(Settings {
            base_seed,
            ..Settings::default()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

/// Fully resolved and validated settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub out: PathBuf,
    pub schemes: Vec<SelectionScheme>,
    pub pi_grid: Vec<f64>,
    pub users: Vec<usize>,
    pub slots: u64,
    pub seeds: usize,
    pub base_seed: u64,
    pub channels: usize,
    pub sojourn_scale: f64,
    pub contention: ContentionPolicy,
    pub pairing: PairingPolicy,
    pub channel_process: ChannelProcess,
    pub attempt_rate: f64,
    pub load_window: usize,
    pub parallelism: usize,
    pub format: OutputFormat,
}

pub fn default_pi_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

pub fn parse_scheme(name: &str, thresholds: AdaptiveThresholds) -> Option<SelectionScheme> {
    match name.trim().to_ascii_lowercase().as_str() {
        "1x1" => Some(SelectionScheme::OneByOne),
        "2x1" => Some(SelectionScheme::TwoByOne),
        "2x2" => Some(SelectionScheme::TwoByTwo),
        "adaptive" => Some(SelectionScheme::Adaptive(thresholds)),
        _ => None,
    }
}

impl ResolvedConfig {
    pub fn resolve(s: Settings) -> Result<Self, ConfigError> {
        let channels = s.channels.unwrap_or(16);
        let grid = build_grid(channels).map_err(|e| invalid("channels", e.to_string()))?;

        let low = s.adaptive_low.unwrap_or(0.5);
        let high = s.adaptive_high.unwrap_or(1.5);
        let thresholds = AdaptiveThresholds::new(low, high).map_err(|e| {
            invalid(
                if s.adaptive_high.is_some() && s.adaptive_low.is_none() {
                    "adaptive-high"
                } else {
                    "adaptive-low"
                },
                e.to_string(),
            )
        })?;

        let scheme_names = s
            .schemes
            .unwrap_or_else(|| ["1x1", "2x1", "2x2", "adaptive"].map(String::from).to_vec());
        if scheme_names.is_empty() {
            return Err(invalid("schemes", "empty list"));
        }
        let mut schemes = Vec::new();
        for name in &scheme_names {
            let scheme = parse_scheme(name, thresholds).ok_or_else(|| {
                invalid(
                    "schemes",
                    format!("unknown scheme {name:?} (1x1, 2x1, 2x2, adaptive)"),
                )
            })?;
            if schemes.contains(&scheme) {
                return Err(invalid("schemes", format!("duplicate scheme {name:?}")));
            }
            schemes.push(scheme);
        }

        let sojourn_scale = s.sojourn_scale.unwrap_or(10.0);
        if !(sojourn_scale > 0.0 && sojourn_scale.is_finite()) {
            return Err(invalid(
                "sojourn-scale",
                format!("{sojourn_scale} must be positive"),
            ));
        }
        let pi_grid = s.pi_grid.unwrap_or_else(default_pi_grid);
        if pi_grid.is_empty() {
            return Err(invalid("pi-grid", "empty list"));
        }
        for &p in &pi_grid {
            if !(p > 0.0 && p < 1.0) {
                return Err(invalid("pi-grid", format!("{p} outside (0, 1)")));
            }
            let (alpha, beta) =
                sojourns_for(p, sojourn_scale).map_err(|e| invalid("pi-grid", e.to_string()))?;
            PuChannel::new(1, alpha, beta, ChannelState::Idle).map_err(|e| {
                invalid(
                    "sojourn-scale",
                    format!(
                        "{e}; p_i={p} needs sojourn-scale >= {}",
                        1.0 / p.min(1.0 - p)
                    ),
                )
            })?;
        }
        if pi_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("pi-grid", "values must be strictly increasing"));
        }

        let users = s.users.unwrap_or_else(|| vec![26, 50]);
        if users.is_empty() {
            return Err(invalid("users", "empty list"));
        }
        if let Some(u) = users.iter().find(|&&u| u < 2) {
            return Err(invalid("users", format!("{u} is below the minimum of 2")));
        }

        let slots = match (s.slots, s.paper_scale) {
            (_, Some(true)) => FULL_SCALE_SLOTS,
            (Some(n), _) => n,
            _ => DESK_SCALE_SLOTS,
        };
        if slots < grid.cycle_len() as u64 {
            return Err(invalid(
                "slots",
                format!(
                    "{slots} is shorter than one {}-slot cycle",
                    grid.cycle_len()
                ),
            ));
        }

        let seeds = s.seeds.unwrap_or(10);
        if seeds == 0 {
            return Err(invalid("seeds", "must be at least 1"));
        }

        let contention = match s.contention.as_deref().unwrap_or("random-winner") {
            "all-fail" => ContentionPolicy::AllFail,
            "random-winner" => ContentionPolicy::RandomWinner,
            other => {
                return Err(invalid(
                    "contention",
                    format!("{other:?} (all-fail | random-winner)"),
                ))
            }
        };
        let pairing = match s.pairing.as_deref().unwrap_or("persistent") {
            "persistent" => PairingPolicy::Persistent,
            "per-slot" => PairingPolicy::PerSlot,
            other => {
                return Err(invalid(
                    "pairing",
                    format!("{other:?} (persistent | per-slot)"),
                ))
            }
        };
        let channel_process = match s.markov.as_deref().unwrap_or("on") {
            "on" => ChannelProcess::Markov,
            "iid" => ChannelProcess::Iid,
            other => return Err(invalid("markov", format!("{other:?} (on | iid)"))),
        };

        let attempt_rate = s.attempt_rate.unwrap_or(1.0);
        if !(0.0..=1.0).contains(&attempt_rate) {
            return Err(invalid(
                "attempt-rate",
                format!("{attempt_rate} outside [0, 1]"),
            ));
        }
        let load_window = s
            .load_window
            .unwrap_or(qrdv_core::engine::DEFAULT_LOAD_WINDOW);
        if load_window == 0 {
            return Err(invalid("load-window", "must be at least 1"));
        }

        let parallelism = match s.parallelism {
            Some(0) => return Err(invalid("parallelism", "must be at least 1")),
            Some(p) => p,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };

        let format = match s.format.as_deref().unwrap_or("both") {
            "csv" => OutputFormat::Csv,
            "json" => OutputFormat::Json,
            "both" => OutputFormat::Both,
            other => return Err(invalid("format", format!("{other:?} (csv | json | both)"))),
        };

        Ok(Self {
            out: s.out.unwrap_or_else(|| PathBuf::from("results")),
            schemes,
            pi_grid,
            users,
            slots,
            seeds,
            base_seed: s.base_seed.unwrap_or(1),
            channels,
            sojourn_scale,
            contention,
            pairing,
            channel_process,
            attempt_rate,
            load_window,
            parallelism,
            format,
        })
    }
}

/// Builds a campaign from an optional config file, the environment's seed
/// override and command-line settings.
pub fn parse_config(
    file: Option<&Path>,
    env_seed: Option<&str>,
    flags: Settings,
) -> Result<Campaign, ConfigError> {
    let mut settings = Settings::default();
    if let Some(path) = file {
        settings = settings.overlay(Settings::from_file(path)?);
    }
    settings = settings.overlay(Settings::from_env_value(env_seed)?);
    settings = settings.overlay(flags);
    Ok(Campaign::expand(ResolvedConfig::resolve(settings)?))
}
