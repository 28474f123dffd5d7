use serde::Serialize;

/// Outcome of a sampled numerical check.
///
/// `worst_margin` is the smallest value of `lhs - rhs` seen over all samples for
/// an inequality `lhs ≥ rhs`; the check passes when it is at or above `-tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub name: String,
    pub passed: bool,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub samples: usize,
    /// Sample point at which the worst margin was attained.
    pub worst_at: Option<Vec<f64>>,
}

impl Certificate {
    pub(crate) fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: true,
            worst_margin: f64::INFINITY,
            tolerance,
            samples: 0,
            worst_at: None,
        }
    }

    /// Records one margin; NaN counts as a failure.
    pub(crate) fn observe(&mut self, margin: f64, at: impl FnOnce() -> Vec<f64>) {
        self.samples += 1;
        if margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
            self.worst_at = Some(at());
        }
        if !(margin >= -self.tolerance) {
            self.passed = false;
        }
    }

    pub(crate) fn finish(mut self) -> Self {
        if self.samples == 0 {
            self.worst_margin = 0.0;
        }
        self
    }
}
