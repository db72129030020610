//! Report, table and figure-data writers. Every file is written to a
//! temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use qrdv_core::metrics::MetricsReport;

use crate::campaign::{Campaign, CampaignError, Metric, MetricTable};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CampaignError + '_ {
    move |source| CampaignError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CampaignError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(contents).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| CampaignError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub fn reports_csv(reports: &[MetricsReport]) -> String {
    let mut out = MetricsReport::csv_header();
    out.push('\n');
    for r in reports {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| x.to_string())
}

pub fn table_csv(table: &MetricTable) -> String {
    let mut out = String::from("scheme,users,p_i,mean,stddev,defined,samples\n");
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.scheme,
            r.users,
            r.p_i,
            opt(r.mean),
            opt(r.stddev),
            r.defined,
            r.samples
        );
    }
    out
}

fn tables_json(tables: &[MetricTable]) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for t in tables {
        let rows: Vec<serde_json::Value> = t
            .rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "scheme": r.scheme,
                    "users": r.users,
                    "p_i": r.p_i,
                    "mean": r.mean,
                    "stddev": r.stddev,
                    "defined": r.defined,
                    "samples": r.samples,
                })
            })
            .collect();
        map.insert(t.metric.name().to_string(), rows.into());
    }
    map.into()
}

/// Figure-analog data files as `(file name, contents)`.
///
/// `fig4`-`fig7` plot one metric against P_I for a single user population
/// (50 when present, otherwise the largest), one `mean stddev` column pair
/// per scheme. `fig8`-`fig10` overlay every scheme for every user count.
pub fn plot_files(
    tables: &[MetricTable],
    schemes: &[String],
    users: &[usize],
    pi_grid: &[f64],
) -> Vec<(String, String)> {
    let focus = if users.contains(&50) {
        Some(50)
    } else {
        users.iter().max().copied()
    };
    let single = [
        ("fig4_rdv.dat", Metric::Rdv),
        ("fig5_ttr.dat", Metric::Ttr),
        ("fig6_energy.dat", Metric::Energy),
        ("fig7_blocking.dat", Metric::Blocking),
    ];
    let overlay = [
        ("fig8_adaptive_rdv.dat", Metric::Rdv),
        ("fig9_adaptive_ttr.dat", Metric::Ttr),
        ("fig10_adaptive_energy.dat", Metric::Energy),
    ];
    let mut files = Vec::new();
    for (name, metric) in single {
        let series: Vec<(usize, &String)> = focus
            .into_iter()
            .flat_map(|u| schemes.iter().map(move |s| (u, s)))
            .collect();
        files.push((
            name.to_string(),
            dat_file(tables, metric, &series, pi_grid, users.len() > 1),
        ));
    }
    for (name, metric) in overlay {
        let series: Vec<(usize, &String)> = users
            .iter()
            .flat_map(|&u| schemes.iter().map(move |s| (u, s)))
            .collect();
        files.push((
            name.to_string(),
            dat_file(tables, metric, &series, pi_grid, true),
        ));
    }
    files
}

fn dat_file(
    tables: &[MetricTable],
    metric: Metric,
    series: &[(usize, &String)],
    pi_grid: &[f64],
    label_users: bool,
) -> String {
    let table = tables.iter().find(|t| t.metric == metric);
    let mut out = format!("# {} vs p_i\n# p_i", metric.name());
    for (u, s) in series {
        let tag = if label_users {
            format!("{s}_u{u}")
        } else {
            s.to_string()
        };
        let _ = write!(out, " {tag}_mean {tag}_sd");
    }
    out.push('\n');
    let Some(table) = table.filter(|t| !t.rows.is_empty()) else {
        return out;
    };
    for &p in pi_grid {
        let _ = write!(out, "{p}");
        for (u, s) in series {
            let row = table.get(s, *u, p);
            let _ = write!(
                out,
                " {} {}",
                opt(row.and_then(|r| r.mean)),
                opt(row.and_then(|r| r.stddev))
            );
        }
        out.push('\n');
    }
    out
}

pub fn write_all(
    campaign: &Campaign,
    reports: &[MetricsReport],
    tables: &[MetricTable],
) -> Result<(), CampaignError> {
    let s = &campaign.settings;
    let dir = &s.out;
    if s.format.csv() {
        write_atomic(&dir.join("cells.csv"), reports_csv(reports).as_bytes())?;
        for t in tables {
            let name = format!("table_{}.csv", t.metric.short());
            write_atomic(&dir.join(name), table_csv(t).as_bytes())?;
        }
    }
    if s.format.json() {
        let json = serde_json::to_string_pretty(reports).expect("reports serialize");
        write_atomic(&dir.join("cells.json"), json.as_bytes())?;
        let json = serde_json::to_string_pretty(&tables_json(tables)).expect("tables serialize");
        write_atomic(&dir.join("tables.json"), json.as_bytes())?;
    }
    let schemes: Vec<String> = s.schemes.iter().map(|x| x.label().to_string()).collect();
    for (name, contents) in plot_files(tables, &schemes, &s.users, &s.pi_grid) {
        write_atomic(&dir.join(name), contents.as_bytes())?;
    }
    Ok(())
}
