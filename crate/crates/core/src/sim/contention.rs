use serde::{Deserialize, Serialize};

/// Default interference coefficient. Chosen from a sweep over
/// `{0.02, 0.04, ..., 0.20}` so that the LOW stress level raises the mean
/// replica round-trip by a figure inside the 10-35% band.
pub const DEFAULT_KAPPA: f64 = 0.2;

/// Cross-pCPU interference: every stress vCPU running on another pCPU slows
/// the progress of a non-stress task by a factor `1 + kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContentionModel {
    pub kappa: f64,
    pub enabled: bool,
}

impl Default for ContentionModel {
    fn default() -> Self {
        ContentionModel {
            kappa: DEFAULT_KAPPA,
            enabled: true,
        }
    }
}

impl ContentionModel {
    pub fn disabled() -> Self {
        ContentionModel {
            kappa: 0.0,
            enabled: false,
        }
    }

    pub fn with_kappa(kappa: f64) -> Self {
        ContentionModel {
            kappa,
            enabled: true,
        }
    }

    /// Execution rate in `(0, 1]` given the number of stress vCPUs currently
    /// running on other pCPUs.
    pub fn effective_rate(&self, stress_running_elsewhere: usize) -> f64 {
        if !self.enabled || self.kappa <= 0.0 {
            return 1.0;
        }
        1.0 / (1.0 + self.kappa * stress_running_elsewhere as f64)
    }
}
