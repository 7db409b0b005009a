//! Search domains and observation storage.

use crate::error::{Error, Result};

/// Axis-aligned box domain with finite bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    /// Build a box from per-dimension bounds. Every lower bound must be
    /// strictly below its upper bound and all bounds must be finite.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidData(format!(
                "domain bounds must be non-empty and of equal length, got {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidData(format!(
                    "domain bounds for dimension {i} must satisfy lo < hi and be finite, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit cube `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    /// The symmetric cube `[-half_width, half_width]^dim`.
    pub fn symmetric(dim: usize, half_width: f64) -> Result<Self> {
        Self::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((v, lo), hi)| v.is_finite() && *v >= *lo && *v <= *hi)
    }

    /// Clamp a point onto the box, coordinate by coordinate.
    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .map(|((v, lo), hi)| v.max(*lo).min(*hi))
            .collect()
    }

    /// Map a point from this box onto the unit cube.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .map(|((v, lo), hi)| (v - lo) / (hi - lo))
            .collect()
    }

    /// Map a unit-cube point back onto this box.
    pub fn denormalize(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .map(|((v, lo), hi)| lo + v * (hi - lo))
            .collect()
    }
}

/// One completed evaluation: where, what the objective returned, and what it
/// cost to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub point: Vec<f64>,
    pub value: f64,
    pub cost: f64,
}

impl Observation {
    pub fn new(point: Vec<f64>, value: f64, cost: f64) -> Self {
        Self { point, value, cost }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.point.len() != dim {
            return Err(Error::InvalidData(format!(
                "observation has dimension {}, expected {dim}",
                self.point.len()
            )));
        }
        if !self.point.iter().all(|v| v.is_finite()) || !self.value.is_finite() {
            return Err(Error::InvalidData(
                "observation point and value must be finite".into(),
            ));
        }
        if !(self.cost.is_finite() && self.cost > 0.0) {
            return Err(Error::InvalidData(format!(
                "observation cost must be finite and positive, got {}",
                self.cost
            )));
        }
        Ok(())
    }
}

/// An append-only collection of observations with consistent dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    observations: Vec<Observation>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_observations(observations: Vec<Observation>) -> Result<Self> {
        let mut data = Self::new();
        for obs in observations {
            data.push(obs)?;
        }
        Ok(data)
    }

    /// Append an observation, validating finiteness, positive cost, and a
    /// dimension consistent with the observations already stored.
    pub fn push(&mut self, obs: Observation) -> Result<()> {
        let dim = self
            .observations
            .first()
            .map_or(obs.point.len(), |o| o.point.len());
        obs.validate(dim)?;
        self.observations.push(obs);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.observations.iter().map(|o| o.point.as_slice())
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().map(|o| o.value)
    }

    pub fn costs(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().map(|o| o.cost)
    }

    /// Smallest observed value, if any observation exists.
    pub fn best_value(&self) -> Option<f64> {
        self.values().fold(None, |acc, v| match acc {
            Some(b) if b <= v => Some(b),
            _ => Some(v),
        })
    }

    pub fn total_cost(&self) -> f64 {
        self.costs().sum()
    }

    pub fn last(&self) -> Option<&Observation> {
        self.observations.last()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inverted_bounds() {
        assert!(Domain::new(vec![0.0, 1.0], vec![1.0, 0.5]).is_err());
        assert!(Domain::new(vec![], vec![]).is_err());
        assert!(Domain::new(vec![0.0], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn normalize_round_trips() {
        let d = Domain::new(vec![-1.0, 2.0], vec![1.0, 6.0]).unwrap();
        let x = vec![0.5, 3.0];
        let u = d.normalize(&x);
        assert_eq!(u, vec![0.75, 0.25]);
        let back = d.denormalize(&u);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn clamp_projects_onto_box() {
        let d = Domain::symmetric(2, 1.0).unwrap();
        assert_eq!(d.clamp(&[2.0, -3.0]), vec![1.0, -1.0]);
        assert!(d.contains(&[1.0, -1.0]));
        assert!(!d.contains(&[1.0 + 1e-9, 0.0]));
    }

    #[test]
    fn dataset_tracks_best_and_validates() {
        let mut data = Dataset::new();
        assert_eq!(data.best_value(), None);
        data.push(Observation::new(vec![0.1], 3.0, 1.0)).unwrap();
        data.push(Observation::new(vec![0.2], -1.0, 2.0)).unwrap();
        assert_eq!(data.best_value(), Some(-1.0));
        assert_eq!(data.total_cost(), 3.0);

        assert!(data
            .push(Observation::new(vec![0.1, 0.2], 0.0, 1.0))
            .is_err());
        assert!(data.push(Observation::new(vec![0.1], 0.0, 0.0)).is_err());
        assert!(data.push(Observation::new(vec![0.1], 0.0, -1.0)).is_err());
        assert!(data
            .push(Observation::new(vec![0.1], f64::NAN, 1.0))
            .is_err());
        assert_eq!(data.len(), 2);
    }

    #[test]
    fn best_value_keeps_first_on_ties() {
        let data = Dataset::from_observations(vec![
            Observation::new(vec![0.0], 1.0, 1.0),
            Observation::new(vec![1.0], 1.0, 1.0),
        ])
        .unwrap();
        assert_eq!(data.best_value(), Some(1.0));
    }
}
