use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, SimulationError};

/// Generator and seed-derivation rule recorded in every summary.
pub const RNG_ALGORITHM: &str =
    "ChaCha20 (rand_chacha 0.9); replication seed = splitmix64(master_seed, rep); \
     platform draw on stream 0, separate trial a on stream a";

/// Seed of replication `rep`: the `rep`-th output of a SplitMix64 sequence started at
/// `master`.
pub fn replication_seed(master: u64, rep: u64) -> u64 {
    let mut z = master.wrapping_add((rep.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Output of one replication. Metrics that a replication cannot compute are left out and do
/// not count towards that metric's summary.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplicationMetrics {
    pub values: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, bool>,
}

impl ReplicationMetrics {
    pub fn value(&mut self, name: impl Into<String>, v: f64) {
        self.values.insert(name.into(), v);
    }

    pub fn flag(&mut self, name: impl Into<String>, f: bool) {
        self.flags.insert(name.into(), f);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub sd: f64,
    /// `sd / sqrt(count)`.
    pub mc_se: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProportionSummary {
    pub rate: f64,
    /// `sqrt(rate (1 - rate) / count)`.
    pub mc_se: f64,
    pub count: usize,
}

impl ProportionSummary {
    pub fn from_counts(hits: usize, count: usize) -> Self {
        let rate = if count == 0 { f64::NAN } else { hits as f64 / count as f64 };
        ProportionSummary {
            rate,
            mc_se: (rate * (1.0 - rate) / count as f64).sqrt(),
            count,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCSummary {
    pub replications: usize,
    pub master_seed: u64,
    pub rng: String,
    pub seeds: Vec<u64>,
    pub metrics: BTreeMap<String, MetricSummary>,
    pub proportions: BTreeMap<String, ProportionSummary>,
}

impl MCSummary {
    /// Aggregates replications in index order.
    pub fn from_replications(master_seed: u64, reps: &[ReplicationMetrics]) -> Self {
        let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        let mut flags: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for r in reps {
            for (k, &v) in &r.values {
                if v.is_finite() {
                    values.entry(k).or_default().push(v);
                }
            }
            for (k, &f) in &r.flags {
                let e = flags.entry(k).or_default();
                e.0 += f as usize;
                e.1 += 1;
            }
        }
        let metrics = values
            .into_iter()
            .map(|(k, xs)| {
                let n = xs.len() as f64;
                let mean = xs.iter().sum::<f64>() / n;
                let sd = if xs.len() > 1 {
                    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
                } else {
                    0.0
                };
                let summary = MetricSummary { mean, sd, mc_se: sd / n.sqrt(), count: xs.len() };
                (k.to_string(), summary)
            })
            .collect();
        let proportions = flags
            .into_iter()
            .map(|(k, (hits, n))| (k.to_string(), ProportionSummary::from_counts(hits, n)))
            .collect();
        MCSummary {
            replications: reps.len(),
            master_seed,
            rng: RNG_ALGORITHM.to_string(),
            seeds: (0..reps.len() as u64).map(|r| replication_seed(master_seed, r)).collect(),
            metrics,
            proportions,
        }
    }

    /// Summary of metric `name`; NaN with count 0 when no replication reported it.
    pub fn metric(&self, name: &str) -> MetricSummary {
        self.metrics.get(name).cloned().unwrap_or(MetricSummary {
            mean: f64::NAN,
            sd: f64::NAN,
            mc_se: f64::NAN,
            count: 0,
        })
    }

    pub fn proportion(&self, name: &str) -> ProportionSummary {
        self.proportions
            .get(name)
            .cloned()
            .unwrap_or_else(|| ProportionSummary::from_counts(0, 0))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    /// One row per metric or proportion: `kind,name,estimate,sd,mc_se,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,name,estimate,sd,mc_se,count\n");
        for (k, m) in &self.metrics {
            out.push_str(&format!("metric,{k},{},{},{},{}\n", m.mean, m.sd, m.mc_se, m.count));
        }
        for (k, p) in &self.proportions {
            out.push_str(&format!("proportion,{k},{},,{},{}\n", p.rate, p.mc_se, p.count));
        }
        out
    }
}

/// Flag set on every replication: `true` when the simulated sample left an estimate undefined
/// (for example no events in an arm). Such replications carry no other metrics.
pub const DEGENERATE: &str = "degenerate";

/// Runs `reps` replications of `task(rep, seed)` on the current rayon pool and returns them in
/// index order. Sample degeneracies are recorded under [`DEGENERATE`]; any other failure aborts
/// the run, reporting the lowest failing index.
pub fn run_replications<F>(
    reps: usize,
    master_seed: u64,
    task: F,
) -> Result<Vec<ReplicationMetrics>, SimulationError>
where
    F: Fn(usize, u64) -> Result<ReplicationMetrics, Error> + Sync,
{
    let results: Vec<_> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let seed = replication_seed(master_seed, rep as u64);
            let result = match task(rep, seed) {
                Ok(mut m) => {
                    m.flag(DEGENERATE, false);
                    Ok(m)
                }
                Err(e) if e.is_sample_degeneracy() => {
                    let mut m = ReplicationMetrics::default();
                    m.flag(DEGENERATE, true);
                    Ok(m)
                }
                Err(e) => Err(e),
            };
            result.map_err(|e| SimulationError::Replication {
                rep,
                seed,
                source: Box::new(e),
            })
        })
        .collect();
    results.into_iter().collect()
}

pub fn monte_carlo<F>(reps: usize, master_seed: u64, task: F) -> Result<MCSummary, SimulationError>
where
    F: Fn(usize, u64) -> Result<ReplicationMetrics, Error> + Sync,
{
    let runs = run_replications(reps, master_seed, task)?;
    Ok(MCSummary::from_replications(master_seed, &runs))
}
