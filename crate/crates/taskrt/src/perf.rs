//! Execution-time model: running statistics per (perf-key, class, size bucket).
//!
//! Buckets are keyed by the exact tuple of handle byte sizes of a task, so
//! tasks of different granularity never share a bucket. The stored mean and
//! standard deviation are exactly the running statistics of the recorded
//! sample log, which is kept so tests can replay it.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use crate::machine::{ClassId, Machine};

/// Estimate used before any sample exists anywhere for a perf-key.
pub const COLD_ESTIMATE_US: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BucketKey {
    pub perf_key: String,
    pub class: ClassId,
    pub sizes: Box<[u64]>,
}

/// Welford running statistics plus the raw sample log.
#[derive(Clone, Debug, Default)]
pub struct Bucket {
    count: u64,
    mean: f64,
    m2: f64,
    samples: Vec<f64>,
}

impl Bucket {
    pub fn push(&mut self, x: f64) {
        self.samples.push(x);
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        let delta2 = x - self.mean;
        self.m2 += delta * delta2;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation (n - 1 denominator), 0 below two samples.
    pub fn stddev(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).sqrt()
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Restore a bucket from summary statistics only (persistence path).
    fn from_summary(count: u64, mean: f64, stddev: f64) -> Self {
        let m2 = if count < 2 {
            0.0
        } else {
            stddev * stddev * (count - 1) as f64
        };
        Self {
            count,
            mean,
            m2,
            samples: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct PerfModel {
    buckets: BTreeMap<BucketKey, Bucket>,
}

impl PerfModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, perf_key: &str, class: ClassId, sizes: &[u64], duration_us: f64) {
        let key = BucketKey {
            perf_key: perf_key.to_string(),
            class,
            sizes: sizes.into(),
        };
        self.buckets.entry(key).or_default().push(duration_us);
    }

    pub fn bucket(&self, perf_key: &str, class: ClassId, sizes: &[u64]) -> Option<&Bucket> {
        let key = BucketKey {
            perf_key: perf_key.to_string(),
            class,
            sizes: sizes.into(),
        };
        self.buckets.get(&key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BucketKey, &Bucket)> {
        self.buckets.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    /// Expected duration of a task on `class`. Falls back to the reference
    /// class mean divided by the class speed factor, then to a fixed default.
    pub fn estimate(
        &self,
        perf_key: &str,
        class: ClassId,
        sizes: &[u64],
        machine: &Machine,
    ) -> f64 {
        if let Some(b) = self.bucket(perf_key, class, sizes) {
            if b.count() > 0 {
                return b.mean();
            }
        }
        if class != 0 {
            if let Some(b) = self.bucket(perf_key, 0, sizes) {
                if b.count() > 0 {
                    return b.mean() / machine.class(class).speed_for(perf_key);
                }
            }
        }
        COLD_ESTIMATE_US
    }

    /// One line per bucket: `key class sizes count mean stddev`, sizes as a
    /// '+'-joined tuple ('-' when the task had no handles). Lines are sorted,
    /// floats use shortest round-trip formatting, so saving twice is
    /// byte-identical and load reproduces estimates exactly.
    pub fn save<W: Write>(&self, w: &mut W, machine: &Machine) -> io::Result<()> {
        for (key, b) in &self.buckets {
            let sizes = if key.sizes.is_empty() {
                "-".to_string()
            } else {
                key.sizes
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>()
                    .join("+")
            };
            writeln!(
                w,
                "{} {} {} {} {} {}",
                key.perf_key,
                machine.class(key.class).name,
                sizes,
                b.count(),
                b.mean(),
                b.stddev()
            )?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(r: R, machine: &Machine) -> io::Result<Self> {
        let mut model = Self::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| {
                io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("perf model line {}: {}", lineno + 1, what),
                )
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(bad("expected 6 fields"));
            }
            let class = machine
                .class_by_name(fields[1])
                .ok_or_else(|| bad("unknown device class"))?;
            let sizes: Box<[u64]> = if fields[2] == "-" {
                Box::new([])
            } else {
                fields[2]
                    .split('+')
                    .map(|t| t.parse::<u64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| bad("bad size tuple"))?
                    .into()
            };
            let count: u64 = fields[3].parse().map_err(|_| bad("bad count"))?;
            let mean: f64 = fields[4].parse().map_err(|_| bad("bad mean"))?;
            let stddev: f64 = fields[5].parse().map_err(|_| bad("bad stddev"))?;
            model.buckets.insert(
                BucketKey {
                    perf_key: fields[0].to_string(),
                    class,
                    sizes,
                },
                Bucket::from_summary(count, mean, stddev),
            );
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_statistics() {
        let mut m = PerfModel::new();
        m.record("k", 0, &[1024], 100.0);
        let b = m.bucket("k", 0, &[1024]).unwrap();
        assert_eq!(b.count(), 1);
        assert_eq!(b.mean(), 100.0);
        assert_eq!(b.stddev(), 0.0);
    }

    #[test]
    fn running_stats_match_replay() {
        let mut m = PerfModel::new();
        let samples = [12.5, 80.0, 33.3, 47.1, 12.5, 901.0];
        for s in samples {
            m.record("k", 1, &[8, 16], s);
        }
        let b = m.bucket("k", 1, &[8, 16]).unwrap();
        // Independent replay through the same running-statistics definition.
        let mut count = 0u64;
        let mut mean = 0.0f64;
        let mut m2 = 0.0f64;
        for &s in b.samples() {
            count += 1;
            let d = s - mean;
            mean += d / count as f64;
            m2 += d * (s - mean);
        }
        assert_eq!(b.count(), count);
        assert_eq!(b.mean(), mean);
        assert_eq!(b.stddev(), (m2 / (count - 1) as f64).sqrt());
    }

    #[test]
    fn bucket_isolation_by_size() {
        let mut m = PerfModel::new();
        m.record("k", 0, &[64], 10.0);
        m.record("k", 0, &[128], 50.0);
        assert_eq!(m.bucket("k", 0, &[64]).unwrap().mean(), 10.0);
        assert_eq!(m.bucket("k", 0, &[128]).unwrap().mean(), 50.0);
        assert!(m.bucket("k", 0, &[256]).is_none());
    }

    #[test]
    fn estimate_fallback_chain() {
        let cpu = crate::machine::DeviceClass::new("cpu");
        let acc = crate::machine::DeviceClass::new("acc").with_speed("k", 10.0);
        let machine = crate::machine::Machine::new(vec![cpu, acc], vec![0, 1]).unwrap();
        let mut m = PerfModel::new();
        // Nothing recorded anywhere: cold default.
        assert_eq!(m.estimate("k", 1, &[8], &machine), COLD_ESTIMATE_US);
        // Reference class sample: divided by the class speed factor.
        m.record("k", 0, &[8], 500.0);
        assert_eq!(m.estimate("k", 1, &[8], &machine), 50.0);
        // Own-class sample wins.
        m.record("k", 1, &[8], 70.0);
        assert_eq!(m.estimate("k", 1, &[8], &machine), 70.0);
    }

    #[test]
    fn save_load_round_trip_is_exact_and_stable() {
        let machine = crate::machine::Machine::homogeneous(1);
        let mut m = PerfModel::new();
        m.record("b", 0, &[64, 32], 10.125);
        m.record("b", 0, &[64, 32], 11.5);
        m.record("a", 0, &[], 0.1 + 0.2); // a value without a short decimal form
        let mut text = Vec::new();
        m.save(&mut text, &machine).unwrap();
        let loaded = PerfModel::load(text.as_slice(), &machine).unwrap();
        let b0 = m.bucket("b", 0, &[64, 32]).unwrap();
        let b1 = loaded.bucket("b", 0, &[64, 32]).unwrap();
        assert_eq!(b0.count(), b1.count());
        assert_eq!(b0.mean(), b1.mean());
        assert_eq!(b0.stddev(), b1.stddev());
        let a1 = loaded.bucket("a", 0, &[]).unwrap();
        assert_eq!(a1.mean(), 0.1 + 0.2);
        let mut text2 = Vec::new();
        loaded.save(&mut text2, &machine).unwrap();
        assert_eq!(text, text2);
    }
}
