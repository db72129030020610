//! Sweep expansion and execution.

use std::sync::atomic::{AtomicUsize, Ordering};

use log::info;
use qrdv_core::engine::{self, Occupancy, SimConfig, SimError};
use qrdv_core::metrics::MetricsReport;
use qrdv_core::quorum::SelectionScheme;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::ResolvedConfig;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("cell {index} ({label}) failed: {source}")]
    Cell {
        index: usize,
        label: String,
        source: SimError,
    },
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("writing {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// One point of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub scheme: SelectionScheme,
    pub users: usize,
    pub p_i: f64,
    pub seed_index: usize,
    pub config: SimConfig,
}

impl Cell {
    pub fn label(&self) -> String {
        format!(
            "{} users={} p_i={} seed={}",
            self.scheme, self.users, self.p_i, self.config.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub settings: ResolvedConfig,
    pub cells: Vec<Cell>,
}

impl Campaign {
    /// Cross product scheme x users x p_i x seed, in that nesting order.
    /// Replicate `k` of every cell runs with seed `base_seed + k`, so all
    /// schemes and loads of one replicate see the same channel trajectories.
    pub fn expand(settings: ResolvedConfig) -> Self {
        let mut cells = Vec::new();
        for &scheme in &settings.schemes {
            for &users in &settings.users {
                for &p_i in &settings.pi_grid {
                    for seed_index in 0..settings.seeds {
                        let config = SimConfig {
                            occupancy: Occupancy::TargetPi {
                                p_i,
                                sojourn_scale: settings.sojourn_scale,
                            },
                            channel_process: settings.channel_process,
                            total_slots: settings.slots,
                            seed: settings.base_seed.wrapping_add(seed_index as u64),
                            contention: settings.contention,
                            pairing: settings.pairing,
                            attempt_rate: settings.attempt_rate,
                            load_window: settings.load_window,
                            ..SimConfig::new(settings.channels, users, scheme, p_i)
                        };
                        cells.push(Cell {
                            index: cells.len(),
                            scheme,
                            users,
                            p_i,
                            seed_index,
                            config,
                        });
                    }
                }
            }
        }
        Self { settings, cells }
    }
}

/// Runs every cell on a pool of `parallelism` workers. Reports come back in
/// cell order whatever the completion order.
pub fn run_cells(cells: &[Cell], parallelism: usize) -> Result<Vec<MetricsReport>, CampaignError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| CampaignError::Pool(e.to_string()))?;
    let done = AtomicUsize::new(0);
    let total = cells.len();
    let results: Vec<Result<MetricsReport, CampaignError>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let report =
                    engine::run(cell.config.clone()).map_err(|source| CampaignError::Cell {
                        index: cell.index,
                        label: cell.label(),
                        source,
                    })?;
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                if k == total || k.is_multiple_of((total / 20).max(1)) {
                    info!("[{k}/{total}] {}", cell.label());
                }
                Ok(report)
            })
            .collect()
    });
    results.into_iter().collect()
}

/// Which of the four metrics a table or figure carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Rdv,
    Ttr,
    Energy,
    Blocking,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Rdv, Metric::Ttr, Metric::Energy, Metric::Blocking];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Rdv => "avg_rdv_per_slot",
            Metric::Ttr => "avg_ttr",
            Metric::Energy => "energy_per_rdv",
            Metric::Blocking => "forced_blocking",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Metric::Rdv => "rdv",
            Metric::Ttr => "ttr",
            Metric::Energy => "energy",
            Metric::Blocking => "blocking",
        }
    }

    pub fn of(self, r: &MetricsReport) -> Option<f64> {
        match self {
            Metric::Rdv => Some(r.avg_rdv_per_slot),
            Metric::Ttr => r.avg_ttr,
            Metric::Energy => r.energy_per_rdv,
            Metric::Blocking => r.forced_blocking,
        }
    }
}

/// Seed-aggregated value of one metric in one (scheme, users, p_i) group.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub scheme: String,
    pub users: usize,
    pub p_i: f64,
    /// Mean over seeds where the metric is defined.
    pub mean: Option<f64>,
    /// Sample standard deviation; needs two defined values.
    pub stddev: Option<f64>,
    pub defined: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub metric: Metric,
    pub rows: Vec<TableRow>,
}

impl MetricTable {
    pub fn get(&self, scheme: &str, users: usize, p_i: f64) -> Option<&TableRow> {
        self.rows
            .iter()
            .find(|r| r.scheme == scheme && r.users == users && r.p_i == p_i)
    }
}

pub fn mean_stddev(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.len() >= 2)
        .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), sd)
}

/// Groups reports by (scheme, users, p_i) in first-appearance order and
/// aggregates each metric across seeds.
pub fn aggregate(reports: &[MetricsReport]) -> Vec<MetricTable> {
    type Group<'a> = ((String, usize, f64), Vec<&'a MetricsReport>);
    let mut groups: Vec<Group> = Vec::new();
    for r in reports {
        let key = (r.scheme.clone(), r.users, r.p_i);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    Metric::ALL
        .iter()
        .map(|&metric| MetricTable {
            metric,
            rows: groups
                .iter()
                .map(|((scheme, users, p_i), members)| {
                    let values: Vec<f64> = members.iter().filter_map(|r| metric.of(r)).collect();
                    let (mean, stddev) = mean_stddev(&values);
                    TableRow {
                        scheme: scheme.clone(),
                        users: *users,
                        p_i: *p_i,
                        mean,
                        stddev,
                        defined: values.len(),
                        samples: members.len(),
                    }
                })
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub reports: Vec<MetricsReport>,
    pub tables: Vec<MetricTable>,
}

/// Runs the campaign, then writes per-cell reports, aggregated tables and
/// figure data into the output directory.
pub fn run_campaign(campaign: &Campaign) -> Result<CampaignResult, CampaignError> {
    info!(
        "running {} cells on {} workers",
        campaign.cells.len(),
        campaign.settings.parallelism
    );
    let reports = run_cells(&campaign.cells, campaign.settings.parallelism)?;
    let tables = aggregate(&reports);
    crate::output::write_all(campaign, &reports, &tables)?;
    Ok(CampaignResult { reports, tables })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ResolvedConfig, Settings};

    fn small(schemes: &[&str], pis: &[f64], users: &[usize], seeds: usize) -> ResolvedConfig {
        ResolvedConfig::resolve(Settings {
            schemes: Some(schemes.iter().map(|s| s.to_string()).collect()),
            pi_grid: Some(pis.to_vec()),
            users: Some(users.to_vec()),
            seeds: Some(seeds),
            slots: Some(2000),
            base_seed: Some(100),
            ..Settings::default()
        })
        .unwrap()
    }

    #[test]
    fn expansion_is_full_cross_product() {
        let pis: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let c = Campaign::expand(small(&["1x1", "2x1", "2x2", "adaptive"], &pis, &[50], 5));
        assert_eq!(c.cells.len(), 180);
        assert!(c.cells.iter().enumerate().all(|(i, cell)| cell.index == i));
        assert_eq!(c.cells[0].config.seed, 100);
        assert_eq!(c.cells[4].config.seed, 104);
        assert_eq!(c.cells[5].config.seed, 100);
        assert_eq!(c.cells[179].scheme.label(), "adaptive");
        assert_eq!(
            c,
            Campaign::expand(small(&["1x1", "2x1", "2x2", "adaptive"], &pis, &[50], 5))
        );
    }

    #[test]
    fn tables_aggregate_over_seeds() {
        let c = Campaign::expand(small(&["1x1", "2x2"], &[0.3, 0.7], &[10], 3));
        let reports = run_cells(&c.cells, 2).unwrap();
        assert_eq!(reports.len(), 12);
        let tables = aggregate(&reports);
        assert_eq!(tables.len(), 4);
        let rdv = &tables[0];
        assert_eq!(rdv.rows.len(), 4);
        let row = rdv.get("2x2", 10, 0.7).unwrap();
        let values: Vec<f64> = reports
            .iter()
            .filter(|r| r.scheme == "2x2" && r.p_i == 0.7)
            .map(|r| r.avg_rdv_per_slot)
            .collect();
        assert_eq!(row.mean, mean_stddev(&values).0);
        assert_eq!((row.defined, row.samples), (3, 3));
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let c = Campaign::expand(small(&["2x1", "adaptive"], &[0.2, 0.8], &[6, 12], 2));
        assert_eq!(
            run_cells(&c.cells, 1).unwrap(),
            run_cells(&c.cells, 4).unwrap()
        );
    }

    #[test]
    fn mean_and_sample_sd() {
        assert_eq!(mean_stddev(&[]), (None, None));
        assert_eq!(mean_stddev(&[2.0]), (Some(2.0), None));
        let (m, s) = mean_stddev(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, Some(2.5));
        assert!((s.unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}
