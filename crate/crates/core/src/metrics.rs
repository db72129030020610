//! Rendezvous metrics: per-slot rendezvous rate, time to rendezvous, energy
//! per rendezvous and forced blocking.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("accumulator covers zero slots")]
    NoSlots,
    #[error("no completed attempts; every attempt was censored")]
    NoSamples,
    #[error("ratio undefined: zero rendezvous")]
    DivisionByZeroRdv,
    #[error("cannot merge accumulators of different cells ({0} vs {1})")]
    CellMismatch(String, String),
    #[error("malformed CSV row: {0}")]
    Csv(String),
}

/// Identity of a sweep cell, excluding the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub scheme: String,
    pub n: usize,
    pub num_channels: usize,
    pub users: usize,
    pub p_i: f64,
}

impl std::fmt::Display for CellKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} N={} users={} p_i={}",
            self.scheme, self.num_channels, self.users, self.p_i
        )
    }
}

/// Raw counters collected during one or more runs of a cell.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsAccumulator {
    pub cell: Option<CellKey>,
    pub total_slots: u64,
    pub total_rdv: u64,
    pub total_blocking: u64,
    /// Awake slots summed over all users.
    pub total_awake_slots: u64,
    /// Sum of time-to-rendezvous over completed attempts.
    pub total_ttr_slots: u64,
    pub completed_attempts: u64,
    pub censored_attempts: u64,
    pub contention_losses: u64,
}

impl MetricsAccumulator {
    pub fn new(cell: CellKey) -> Self {
        Self {
            cell: Some(cell),
            ..Self::default()
        }
    }

    pub fn record_ttr(&mut self, ttr: u64) {
        debug_assert!(ttr >= 1);
        self.total_ttr_slots += ttr;
        self.completed_attempts += 1;
    }

    /// Component-wise sum. The empty accumulator (no cell) is the identity.
    pub fn merge(&self, other: &Self) -> Result<Self, MetricsError> {
        let cell = match (&self.cell, &other.cell) {
            (Some(a), Some(b)) if a != b => {
                return Err(MetricsError::CellMismatch(a.to_string(), b.to_string()))
            }
            (Some(a), _) => Some(a.clone()),
            (None, b) => b.clone(),
        };
        Ok(Self {
            cell,
            total_slots: self.total_slots + other.total_slots,
            total_rdv: self.total_rdv + other.total_rdv,
            total_blocking: self.total_blocking + other.total_blocking,
            total_awake_slots: self.total_awake_slots + other.total_awake_slots,
            total_ttr_slots: self.total_ttr_slots + other.total_ttr_slots,
            completed_attempts: self.completed_attempts + other.completed_attempts,
            censored_attempts: self.censored_attempts + other.censored_attempts,
            contention_losses: self.contention_losses + other.contention_losses,
        })
    }
}

/// Successful rendezvous per slot.
pub fn avg_rdv_per_slot(acc: &MetricsAccumulator) -> Result<f64, MetricsError> {
    if acc.total_slots == 0 {
        return Err(MetricsError::NoSlots);
    }
    Ok(acc.total_rdv as f64 / acc.total_slots as f64)
}

/// Mean slots from attempt start to rendezvous, over completed attempts only.
pub fn avg_ttr(acc: &MetricsAccumulator) -> Result<f64, MetricsError> {
    if acc.completed_attempts == 0 {
        return Err(MetricsError::NoSamples);
    }
    Ok(acc.total_ttr_slots as f64 / acc.completed_attempts as f64)
}

/// Active (awake) slots per successful rendezvous, one energy unit per slot.
pub fn energy_per_rdv(acc: &MetricsAccumulator) -> Result<f64, MetricsError> {
    if acc.total_rdv == 0 {
        return Err(MetricsError::DivisionByZeroRdv);
    }
    Ok(acc.total_awake_slots as f64 / acc.total_rdv as f64)
}

/// Blocking events per successful rendezvous. The per-slot averages in the
/// numerator and denominator share `total_slots`, which cancels.
pub fn forced_blocking(acc: &MetricsAccumulator) -> Result<f64, MetricsError> {
    if acc.total_rdv == 0 {
        return Err(MetricsError::DivisionByZeroRdv);
    }
    Ok(acc.total_blocking as f64 / acc.total_rdv as f64)
}

/// Finalised metrics of one cell. Undefined ratios are `None` (JSON `null`,
/// CSV `NA`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scheme: String,
    pub n: usize,
    pub num_channels: usize,
    pub users: usize,
    pub p_i: f64,
    pub seed: Option<u64>,
    pub slots: u64,
    pub total_rdv: u64,
    pub total_blocking: u64,
    pub total_awake_slots: u64,
    pub completed_attempts: u64,
    pub censored_attempts: u64,
    pub total_ttr_slots: u64,
    pub contention_losses: u64,
    pub avg_rdv_per_slot: f64,
    pub avg_ttr: Option<f64>,
    pub energy_per_rdv: Option<f64>,
    pub forced_blocking: Option<f64>,
}

pub const CSV_HEADER: [&str; 17] = [
    "scheme",
    "n",
    "N",
    "users",
    "p_i",
    "seed",
    "slots",
    "total_rdv",
    "total_blocking",
    "total_awake_slots",
    "completed_attempts",
    "censored_attempts",
    "avg_rdv_per_slot",
    "avg_ttr",
    "energy_per_rdv",
    "forced_blocking",
    "total_ttr_slots",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl MetricsReport {
    pub fn from_accumulator(
        acc: &MetricsAccumulator,
        seed: Option<u64>,
    ) -> Result<Self, MetricsError> {
        let cell = acc.cell.clone().unwrap_or(CellKey {
            scheme: String::new(),
            n: 0,
            num_channels: 0,
            users: 0,
            p_i: f64::NAN,
        });
        Ok(Self {
            scheme: cell.scheme,
            n: cell.n,
            num_channels: cell.num_channels,
            users: cell.users,
            p_i: cell.p_i,
            seed,
            slots: acc.total_slots,
            total_rdv: acc.total_rdv,
            total_blocking: acc.total_blocking,
            total_awake_slots: acc.total_awake_slots,
            completed_attempts: acc.completed_attempts,
            censored_attempts: acc.censored_attempts,
            total_ttr_slots: acc.total_ttr_slots,
            contention_losses: acc.contention_losses,
            avg_rdv_per_slot: avg_rdv_per_slot(acc)?,
            avg_ttr: avg_ttr(acc).ok(),
            energy_per_rdv: energy_per_rdv(acc).ok(),
            forced_blocking: forced_blocking(acc).ok(),
        })
    }

    pub fn cell_key(&self) -> CellKey {
        CellKey {
            scheme: self.scheme.clone(),
            n: self.n,
            num_channels: self.num_channels,
            users: self.users,
            p_i: self.p_i,
        }
    }

    /// Raw counters as an accumulator, from which every derived field can be
    /// recomputed.
    pub fn accumulator(&self) -> MetricsAccumulator {
        MetricsAccumulator {
            cell: Some(self.cell_key()),
            total_slots: self.slots,
            total_rdv: self.total_rdv,
            total_blocking: self.total_blocking,
            total_awake_slots: self.total_awake_slots,
            total_ttr_slots: self.total_ttr_slots,
            completed_attempts: self.completed_attempts,
            censored_attempts: self.censored_attempts,
            contention_losses: self.contention_losses,
        }
    }

    pub fn csv_header() -> String {
        CSV_HEADER.join(",")
    }

    pub fn to_csv_row(&self) -> String {
        [
            self.scheme.clone(),
            self.n.to_string(),
            self.num_channels.to_string(),
            self.users.to_string(),
            self.p_i.to_string(),
            self.seed
                .map_or_else(|| "NA".to_string(), |s| s.to_string()),
            self.slots.to_string(),
            self.total_rdv.to_string(),
            self.total_blocking.to_string(),
            self.total_awake_slots.to_string(),
            self.completed_attempts.to_string(),
            self.censored_attempts.to_string(),
            self.avg_rdv_per_slot.to_string(),
            fmt_opt(self.avg_ttr),
            fmt_opt(self.energy_per_rdv),
            fmt_opt(self.forced_blocking),
            self.total_ttr_slots.to_string(),
        ]
        .join(",")
    }

    /// Parses a row written by [`to_csv_row`](Self::to_csv_row). Contention
    /// losses are not part of the CSV and read back as zero.
    pub fn from_csv_row(line: &str) -> Result<Self, MetricsError> {
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != CSV_HEADER.len() {
            return Err(MetricsError::Csv(format!(
                "expected {} fields, found {}",
                CSV_HEADER.len(),
                fields.len()
            )));
        }
        fn num<T: std::str::FromStr>(col: usize, s: &str) -> Result<T, MetricsError> {
            s.parse()
                .map_err(|_| MetricsError::Csv(format!("column {} = {s:?}", CSV_HEADER[col])))
        }
        fn opt(col: usize, s: &str) -> Result<Option<f64>, MetricsError> {
            if s == "NA" {
                Ok(None)
            } else {
                num(col, s).map(Some)
            }
        }
        Ok(Self {
            scheme: fields[0].to_string(),
            n: num(1, fields[1])?,
            num_channels: num(2, fields[2])?,
            users: num(3, fields[3])?,
            p_i: num(4, fields[4])?,
            seed: if fields[5] == "NA" {
                None
            } else {
                Some(num(5, fields[5])?)
            },
            slots: num(6, fields[6])?,
            total_rdv: num(7, fields[7])?,
            total_blocking: num(8, fields[8])?,
            total_awake_slots: num(9, fields[9])?,
            completed_attempts: num(10, fields[10])?,
            censored_attempts: num(11, fields[11])?,
            avg_rdv_per_slot: num(12, fields[12])?,
            avg_ttr: opt(13, fields[13])?,
            energy_per_rdv: opt(14, fields[14])?,
            forced_blocking: opt(15, fields[15])?,
            total_ttr_slots: num(16, fields[16])?,
            contention_losses: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn key(scheme: &str) -> CellKey {
        CellKey {
            scheme: scheme.into(),
            n: 4,
            num_channels: 16,
            users: 50,
            p_i: 0.5,
        }
    }

    fn acc(slots: u64, rdv: u64, blocking: u64, awake: u64) -> MetricsAccumulator {
        MetricsAccumulator {
            total_slots: slots,
            total_rdv: rdv,
            total_blocking: blocking,
            total_awake_slots: awake,
            ..MetricsAccumulator::new(key("1x1"))
        }
    }

    #[test]
    fn ratio_definitions() {
        assert_eq!(avg_rdv_per_slot(&acc(8000, 800, 0, 0)).unwrap(), 0.1);
        assert_eq!(avg_rdv_per_slot(&acc(8000, 0, 0, 0)).unwrap(), 0.0);
        assert_eq!(
            avg_rdv_per_slot(&acc(0, 0, 0, 0)),
            Err(MetricsError::NoSlots)
        );

        let mut a = acc(10, 2, 0, 0);
        a.record_ttr(3);
        a.record_ttr(5);
        assert_eq!(avg_ttr(&a).unwrap(), 4.0);
        a = acc(10, 0, 0, 0);
        a.censored_attempts = 7;
        assert_eq!(avg_ttr(&a), Err(MetricsError::NoSamples));

        assert_eq!(energy_per_rdv(&acc(10, 100, 0, 1200)).unwrap(), 12.0);
        assert_eq!(
            energy_per_rdv(&acc(10, 0, 0, 1200)),
            Err(MetricsError::DivisionByZeroRdv)
        );

        assert_eq!(forced_blocking(&acc(10, 200, 50, 0)).unwrap(), 0.25);
        assert_eq!(forced_blocking(&acc(10, 200, 0, 0)).unwrap(), 0.0);
        assert!(forced_blocking(&acc(10, 0, 5, 0)).is_err());
    }

    #[test]
    fn undefined_ratios_serialize_as_markers() {
        let r = MetricsReport::from_accumulator(&acc(100, 0, 3, 40), Some(1)).unwrap();
        assert_eq!(
            (r.avg_ttr, r.energy_per_rdv, r.forced_blocking),
            (None, None, None)
        );
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["energy_per_rdv"].is_null());
        assert!(json["forced_blocking"].is_null());
        let row = r.to_csv_row();
        assert!(row.contains(",NA,NA,NA,"), "{row}");
    }

    #[test]
    fn merge_rules() {
        let x = acc(100, 10, 2, 70);
        assert_eq!(x.merge(&MetricsAccumulator::default()).unwrap(), x);
        assert_eq!(MetricsAccumulator::default().merge(&x).unwrap(), x);
        let y = acc(300, 20, 4, 10);
        let pooled = x.merge(&y).unwrap();
        assert_eq!(avg_rdv_per_slot(&pooled).unwrap(), 30.0 / 400.0);
        let z = MetricsAccumulator::new(key("2x2"));
        assert!(matches!(x.merge(&z), Err(MetricsError::CellMismatch(..))));
    }

    #[test]
    fn csv_header_order() {
        assert_eq!(
            MetricsReport::csv_header(),
            "scheme,n,N,users,p_i,seed,slots,total_rdv,total_blocking,total_awake_slots,\
             completed_attempts,censored_attempts,avg_rdv_per_slot,avg_ttr,energy_per_rdv,\
             forced_blocking,total_ttr_slots"
        );
    }

    fn arb_acc() -> impl Strategy<Value = MetricsAccumulator> {
        (
            1u64..1_000_000,
            0u64..10_000,
            0u64..10_000,
            0u64..1_000_000,
            0u64..1000,
            0u64..100,
        )
            .prop_map(|(slots, rdv, blocking, awake, completed, censored)| {
                MetricsAccumulator {
                    total_slots: slots,
                    total_rdv: rdv,
                    total_blocking: blocking,
                    total_awake_slots: awake,
                    total_ttr_slots: completed * 7 + completed / 3,
                    completed_attempts: completed,
                    censored_attempts: censored,
                    ..MetricsAccumulator::new(key("adaptive"))
                }
            })
    }

    proptest! {
        #[test]
        fn merge_is_commutative_monoid(a in arb_acc(), b in arb_acc(), c in arb_acc()) {
            prop_assert_eq!(a.merge(&b).unwrap(), b.merge(&a).unwrap());
            prop_assert_eq!(
                a.merge(&b).unwrap().merge(&c).unwrap(),
                a.merge(&b.merge(&c).unwrap()).unwrap()
            );
        }

        #[test]
        fn serialization_round_trips(a in arb_acc(), seed in proptest::option::of(any::<u64>())) {
            let r = MetricsReport::from_accumulator(&a, seed).unwrap();
            let from_json: MetricsReport =
                serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
            prop_assert_eq!(&from_json, &r);
            let mut from_csv = MetricsReport::from_csv_row(&r.to_csv_row()).unwrap();
            from_csv.contention_losses = r.contention_losses;
            prop_assert_eq!(&from_csv, &r);
            let again = MetricsReport::from_accumulator(&from_csv.accumulator(), seed).unwrap();
            prop_assert_eq!(again.to_csv_row(), r.to_csv_row());
        }
    }
}
