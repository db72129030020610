//! Parameter sweeps over the rendezvous simulator: configuration, parallel
//! execution of (scheme x users x P_I x seed) cells, aggregated tables and
//! figure data.

pub mod campaign;
pub mod config;
pub mod output;

pub use campaign::{run_campaign, Campaign, CampaignError, CampaignResult, Metric, MetricTable};
pub use config::{parse_config, ConfigError, ResolvedConfig, Settings};
