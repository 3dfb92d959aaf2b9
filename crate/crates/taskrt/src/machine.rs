//! Device classes and the worker pool description.

use std::collections::HashMap;

use crate::error::RuntimeError;

pub type ClassId = usize;
pub type WorkerId = usize;

/// A class of workers sharing speed characteristics. Class 0 is the
/// reference class: its speed factors are taken as 1.0 and it anchors the
/// perf-model fallback in the dmda scheduler.
#[derive(Clone, Debug)]
pub struct DeviceClass {
    pub name: String,
    /// Relative speed per codelet perf-key, larger is faster, 1.0 matches the
    /// reference class. Missing keys default to 1.0.
    speed: HashMap<String, f64>,
    /// Estimated microseconds per byte for moving data last written by a
    /// different class onto this one. Only the dmda model consults it.
    pub transfer_us_per_byte: f64,
}

impl DeviceClass {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            speed: HashMap::new(),
            transfer_us_per_byte: 0.0,
        }
    }

    pub fn with_speed(mut self, perf_key: impl Into<String>, factor: f64) -> Self {
        self.speed.insert(perf_key.into(), factor);
        self
    }

    pub fn with_transfer_cost(mut self, us_per_byte: f64) -> Self {
        self.transfer_us_per_byte = us_per_byte;
        self
    }

    pub fn speed_for(&self, perf_key: &str) -> f64 {
        self.speed.get(perf_key).copied().unwrap_or(1.0)
    }

    pub fn speed_entries(&self) -> impl Iterator<Item = (&str, f64)> {
        self.speed.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// The set of device classes plus one class assignment per worker.
#[derive(Clone, Debug)]
pub struct Machine {
    classes: Vec<DeviceClass>,
    workers: Vec<ClassId>,
}

impl Machine {
    pub fn new(classes: Vec<DeviceClass>, workers: Vec<ClassId>) -> Result<Self, RuntimeError> {
        if classes.is_empty() {
            return Err(RuntimeError::InvalidMachine("no device classes".into()));
        }
        if workers.is_empty() {
            return Err(RuntimeError::InvalidMachine("no workers".into()));
        }
        for (w, c) in workers.iter().enumerate() {
            if *c >= classes.len() {
                return Err(RuntimeError::InvalidMachine(format!(
                    "worker {w} references unknown class {c}"
                )));
            }
        }
        for class in &classes {
            for (key, f) in class.speed_entries() {
                if f.is_nan() || f <= 0.0 {
                    return Err(RuntimeError::InvalidMachine(format!(
                        "class {} has non-positive speed factor {} for {}",
                        class.name, f, key
                    )));
                }
            }
            if class.transfer_us_per_byte.is_nan() || class.transfer_us_per_byte < 0.0 {
                return Err(RuntimeError::InvalidMachine(format!(
                    "class {} has negative transfer cost",
                    class.name
                )));
            }
        }
        Ok(Self { classes, workers })
    }

    /// `n` workers of a single reference class named "cpu".
    pub fn homogeneous(n: usize) -> Self {
        Self::new(vec![DeviceClass::new("cpu")], vec![0; n.max(1)])
            .expect("homogeneous machine is always valid")
    }

    pub fn n_workers(&self) -> usize {
        self.workers.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_of(&self, w: WorkerId) -> ClassId {
        self.workers[w]
    }

    pub fn class(&self, c: ClassId) -> &DeviceClass {
        &self.classes[c]
    }

    pub fn classes(&self) -> &[DeviceClass] {
        &self.classes
    }

    pub fn class_by_name(&self, name: &str) -> Option<ClassId> {
        self.classes.iter().position(|c| c.name == name)
    }

    /// Largest speed factor for a perf-key over all classes present.
    /// Used to normalize virtual-device padding so the fastest class for a
    /// codelet runs it at natural host speed.
    pub fn max_speed_for(&self, perf_key: &str) -> f64 {
        self.classes
            .iter()
            .map(|c| c.speed_for(perf_key))
            .fold(1.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_machine() {
        let m = Machine::homogeneous(4);
        assert_eq!(m.n_workers(), 4);
        assert_eq!(m.class_of(3), 0);
        assert_eq!(m.class(0).name, "cpu");
        assert_eq!(m.class(0).speed_for("anything"), 1.0);
    }

    #[test]
    fn rejects_bad_speed_factor() {
        let c = DeviceClass::new("gpu").with_speed("k", 0.0);
        let err = Machine::new(vec![c], vec![0]).unwrap_err();
        assert!(err.to_string().contains("non-positive speed factor"));
    }

    #[test]
    fn rejects_unknown_class_reference() {
        let err = Machine::new(vec![DeviceClass::new("cpu")], vec![0, 1]).unwrap_err();
        assert!(err.to_string().contains("unknown class"));
    }

    #[test]
    fn max_speed_spans_classes() {
        let cpu = DeviceClass::new("cpu");
        let acc = DeviceClass::new("acc")
            .with_speed("sourceStep", 10.0)
            .with_speed("copyOverlaps", 0.5);
        let m = Machine::new(vec![cpu, acc], vec![0, 1]).unwrap();
        assert_eq!(m.max_speed_for("sourceStep"), 10.0);
        assert_eq!(m.max_speed_for("copyOverlaps"), 1.0);
        assert_eq!(m.max_speed_for("other"), 1.0);
    }
}
