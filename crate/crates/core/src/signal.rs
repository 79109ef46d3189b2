//! Closed-form scalar signals used for perturbations and forcing terms.

use serde::{Deserialize, Serialize};

/// A scalar function of time given in closed form, so that runs are
/// reproducible from a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Signal {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude * cos(frequency * t + phase)`
    Cosine {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    /// `amplitude * sin(frequency * t + phase)`
    Sine {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    /// `sum_i coeff_i * exp(-rate_i * (t - t0))` for `t >= t0`.
    ExponentialSeries {
        t0: f64,
        terms: Vec<(f64, f64)>,
    },
    /// Samples on a uniform grid starting at `t0`; nearest sample is returned.
    Table {
        t0: f64,
        step: f64,
        values: Vec<f64>,
    },
}

impl Signal {
    pub fn constant(value: f64) -> Self {
        Signal::Constant { value }
    }

    pub fn cosine(amplitude: f64, frequency: f64) -> Self {
        Signal::Cosine {
            amplitude,
            frequency,
            phase: 0.0,
        }
    }

    pub fn sine(amplitude: f64, frequency: f64) -> Self {
        Signal::Sine {
            amplitude,
            frequency,
            phase: 0.0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Signal::Zero => 0.0,
            Signal::Constant { value } => *value,
            Signal::Cosine {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t + phase).cos(),
            Signal::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t + phase).sin(),
            Signal::ExponentialSeries { t0, terms } => {
                let s = (t - t0).max(0.0);
                terms.iter().map(|(rate, c)| c * (-rate * s).exp()).sum()
            }
            Signal::Table { t0, step, values } => {
                if values.is_empty() {
                    return 0.0;
                }
                let idx = ((t - t0) / step).round().max(0.0) as usize;
                values[idx.min(values.len() - 1)]
            }
        }
    }

    /// Upper bound on `|signal(t)|` valid for all `t` (used by the gain design).
    pub fn sup_bound(&self) -> f64 {
        match self {
            Signal::Zero => 0.0,
            Signal::Constant { value } => value.abs(),
            Signal::Cosine { amplitude, .. } | Signal::Sine { amplitude, .. } => amplitude.abs(),
            Signal::ExponentialSeries { terms, .. } => terms.iter().map(|(_, c)| c.abs()).sum(),
            Signal::Table { values, .. } => values.iter().fold(0.0, |a, v| a.max(v.abs())),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Signal::Zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_matches_closed_form() {
        let g = Signal::cosine(0.5, 2.0);
        assert_eq!(g.eval(0.0), 0.5);
        assert!((g.eval(0.3) - 0.5 * (0.6f64).cos()).abs() < 1e-15);
        assert_eq!(g.sup_bound(), 0.5);
    }

    #[test]
    fn table_picks_nearest_sample() {
        let s = Signal::Table {
            t0: 1.0,
            step: 0.5,
            values: vec![1.0, 2.0, 3.0],
        };
        assert_eq!(s.eval(1.0), 1.0);
        assert_eq!(s.eval(1.49), 2.0);
        assert_eq!(s.eval(10.0), 3.0);
    }
}
