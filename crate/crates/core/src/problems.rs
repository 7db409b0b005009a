//! Synthetic benchmark problems with heterogeneous evaluation costs.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::Domain;
use crate::error::{Error, Result};

/// Objective function evaluated by the driver.
pub type ObjectiveFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Stateless cost of evaluating at a point.
pub type StatelessCostFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Cost of moving from a previous configuration to the next one.
pub type MovementCostFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// True evaluation cost of a problem. Costs either depend on the queried
/// point alone or on the move from the previously queried point.
#[derive(Clone)]
pub enum ProblemCost {
    Stateless(StatelessCostFn),
    Movement {
        /// Configuration charged against when nothing was evaluated yet.
        initial: Vec<f64>,
        cost: MovementCostFn,
    },
}

impl ProblemCost {
    pub fn stateless(cost: StatelessCostFn) -> Self {
        ProblemCost::Stateless(cost)
    }

    pub fn movement(initial: Vec<f64>, cost: MovementCostFn) -> Self {
        ProblemCost::Movement { initial, cost }
    }

    /// Cost of evaluating at `x` given the previously evaluated point.
    pub fn evaluate(&self, prev: Option<&[f64]>, x: &[f64]) -> f64 {
        match self {
            ProblemCost::Stateless(cost) => cost(x),
            ProblemCost::Movement { initial, cost } => cost(prev.unwrap_or(initial), x),
        }
    }
}

impl fmt::Debug for ProblemCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemCost::Stateless(_) => f.write_str("ProblemCost::Stateless"),
            ProblemCost::Movement { initial, .. } => f
                .debug_struct("ProblemCost::Movement")
                .field("initial", initial)
                .finish_non_exhaustive(),
        }
    }
}

/// A benchmark problem: a box domain, an objective to minimize, a positive
/// evaluation cost, and an optional known optimum for reporting.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub domain: Domain,
    pub objective: ObjectiveFn,
    pub cost: ProblemCost,
    /// A global minimizer and its value, when known analytically.
    pub known_optimum: Option<(Vec<f64>, f64)>,
    /// Budget used by the harness when none is given explicitly.
    pub default_budget: f64,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.domain.dim())
            .field("default_budget", &self.default_budget)
            .finish_non_exhaustive()
    }
}

impl Problem {
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        (self.objective)(x)
    }

    pub fn cost_at(&self, prev: Option<&[f64]>, x: &[f64]) -> f64 {
        self.cost.evaluate(prev, x)
    }
}

/// Radius of the minimizing circle of `10 r sin(2 pi r)` and the objective
/// value there, frozen from a high-precision root of the radial derivative.
pub const RING_OPTIMUM_RADIUS: f64 = 0.7819569532384722;
pub const RING_OPTIMUM_VALUE: f64 = -7.662466813147997;

/// Two-dimensional problem on `[-1, 1]^2` whose objective is a radial wave
/// `10 r sin(2 pi r)` with a full circle of global minima, and whose cost
/// `10 - 5 r` makes the center expensive and the corners cheap.
pub fn ring_problem() -> Problem {
    let objective: ObjectiveFn = Arc::new(|x: &[f64]| {
        let r = norm2(x);
        10.0 * r * (2.0 * std::f64::consts::PI * r).sin()
    });
    let cost: StatelessCostFn = Arc::new(|x: &[f64]| 10.0 - 5.0 * norm2(x));
    Problem {
        name: "ring".into(),
        domain: Domain::symmetric(2, 1.0).expect("static bounds"),
        objective,
        cost: ProblemCost::stateless(cost),
        known_optimum: Some((vec![RING_OPTIMUM_RADIUS, 0.0], RING_OPTIMUM_VALUE)),
        default_budget: 150.0,
    }
}

/// The ring objective with every evaluation costing exactly one unit, so the
/// budget is a plain evaluation count and cost-aware policies have nothing to
/// exploit.
pub fn unit_cost_ring_problem() -> Problem {
    let mut problem = ring_problem();
    problem.name = "ring-unit".into();
    problem.cost = ProblemCost::stateless(Arc::new(|_: &[f64]| 1.0));
    problem.default_budget = 25.0;
    problem
}

#[inline]
fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Wrap a problem so its cost is multiplied by up to `markup` inside a ball
/// of `radius` around the known optimum, with a smooth bump blend that equals
/// `markup` exactly at the optimum and fades to one at the ball's edge. The
/// objective and optimum are unchanged.
pub fn adversarial_cost_problem(base: &Problem, markup: f64, radius: f64) -> Result<Problem> {
    if !(markup.is_finite() && markup > 0.0) {
        return Err(Error::InvalidProblem(format!(
            "markup must be finite and positive, got {markup}"
        )));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidProblem(format!(
            "radius must be finite and positive, got {radius}"
        )));
    }
    let Some((optimum, _)) = base.known_optimum.clone() else {
        return Err(Error::InvalidProblem(format!(
            "problem '{}' has no known optimum to place the markup around",
            base.name
        )));
    };

    let factor = {
        let optimum = optimum.clone();
        move |x: &[f64]| -> f64 {
            let t = x
                .iter()
                .zip(&optimum)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                / radius;
            if t >= 1.0 {
                1.0
            } else {
                // Smooth bump: exactly 1 at t = 0, exactly 0 at t >= 1.
                1.0 + (markup - 1.0) * (1.0 - 1.0 / (1.0 - t * t)).exp()
            }
        }
    };

    let cost = match &base.cost {
        ProblemCost::Stateless(c) => {
            let c = c.clone();
            ProblemCost::stateless(Arc::new(move |x: &[f64]| c(x) * factor(x)))
        }
        ProblemCost::Movement { initial, cost } => {
            let c = cost.clone();
            ProblemCost::movement(
                initial.clone(),
                Arc::new(move |prev: &[f64], next: &[f64]| c(prev, next) * factor(next)),
            )
        }
    };

    Ok(Problem {
        name: format!("{}-adv", base.name),
        domain: base.domain.clone(),
        objective: base.objective.clone(),
        cost,
        known_optimum: base.known_optimum.clone(),
        default_budget: base.default_budget,
    })
}

/// Smallest possible movement cost in the sensor problem.
pub const SENSOR_COST_FLOOR: f64 = 1e-3;

/// Stand-in for a sensor relocation task: `m` sensors live in the unit
/// square, the objective is the RMSE of an inverse-distance-weighted
/// reconstruction of a fixed synthetic field over a 17x17 grid, and moving
/// the sensors costs the Frobenius distance between consecutive placements
/// (floored, so standing still is not free). The field is a seeded mixture of
/// Gaussian bumps, so the problem is deterministic given `field_seed`.
pub fn sensor_stand_in(sensors: usize, field_seed: u64) -> Result<Problem> {
    if sensors == 0 {
        return Err(Error::InvalidProblem(
            "at least one sensor is required".into(),
        ));
    }
    let dim = 2 * sensors;

    let mut rng = ChaCha8Rng::seed_from_u64(field_seed);
    let bumps: Vec<(f64, [f64; 2], f64)> = (0..6)
        .map(|_| {
            let amp = rng.gen_range(-1.0..1.0);
            let center = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let width = rng.gen_range(0.15..0.4);
            (amp, center, width)
        })
        .collect();
    let field = move |p: &[f64; 2]| -> f64 {
        bumps
            .iter()
            .map(|(amp, center, width)| {
                let d2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
                amp * (-d2 / (2.0 * width * width)).exp()
            })
            .sum()
    };

    const GRID: usize = 17;
    let grid: Vec<([f64; 2], f64)> = (0..GRID * GRID)
        .map(|i| {
            let p = [
                (i % GRID) as f64 / (GRID - 1) as f64,
                (i / GRID) as f64 / (GRID - 1) as f64,
            ];
            let value = field(&p);
            (p, value)
        })
        .collect();

    let objective: ObjectiveFn = Arc::new(move |x: &[f64]| {
        let readings: Vec<([f64; 2], f64)> = x
            .chunks_exact(2)
            .map(|s| {
                let p = [s[0], s[1]];
                let value = field(&p);
                (p, value)
            })
            .collect();
        let mut squared = 0.0;
        for (g, truth) in &grid {
            let mut wsum = 0.0;
            let mut pred = 0.0;
            for (s, reading) in &readings {
                let d2 = (g[0] - s[0]).powi(2) + (g[1] - s[1]).powi(2);
                let w = 1.0 / (d2 + 1e-6);
                wsum += w;
                pred += w * reading;
            }
            let err = pred / wsum - truth;
            squared += err * err;
        }
        (squared / grid.len() as f64).sqrt()
    });

    let cost: MovementCostFn = Arc::new(|prev: &[f64], next: &[f64]| {
        let moved = prev
            .iter()
            .zip(next)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        moved.max(SENSOR_COST_FLOOR)
    });

    Ok(Problem {
        name: format!("sensor{sensors}"),
        domain: Domain::unit(dim),
        objective,
        cost: ProblemCost::movement(vec![0.5; dim], cost),
        known_optimum: None,
        default_budget: 20.0,
    })
}

/// Default seed for the sensor problem's synthetic field.
pub const SENSOR_FIELD_SEED: u64 = 2025;

/// Look up a problem by its registry name: `ring`, `ring-adv` (markup 10
/// within radius 0.25 of the optimum), or `sensor<m>` for `m` sensors.
pub fn problem_by_name(name: &str) -> Result<Problem> {
    match name {
        "ring" => Ok(ring_problem()),
        "ring-unit" => Ok(unit_cost_ring_problem()),
        "ring-adv" => adversarial_cost_problem(&ring_problem(), 10.0, 0.25),
        _ => {
            if let Some(m) = name.strip_prefix("sensor") {
                let sensors: usize = m.parse().map_err(|_| {
                    Error::InvalidProblem(format!(
                        "unknown problem '{name}'; expected ring, ring-unit, ring-adv, or sensor<m>"
                    ))
                })?;
                sensor_stand_in(sensors, SENSOR_FIELD_SEED)
            } else {
                Err(Error::InvalidProblem(format!(
                    "unknown problem '{name}'; expected ring, ring-unit, ring-adv, or sensor<m>"
                )))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_reference_values() {
        let p = ring_problem();
        assert_eq!(p.objective_at(&[0.0, 0.0]), 0.0);
        assert_eq!(p.cost_at(None, &[0.0, 0.0]), 10.0);
        assert!((p.cost_at(None, &[1.0, 0.0]) - 5.0).abs() < 1e-15);
        let corner_cost = 10.0 - 5.0 * 2.0f64.sqrt();
        assert!((p.cost_at(None, &[1.0, 1.0]) - corner_cost).abs() < 1e-15);
        assert!(p.objective_at(&[1.0, 0.0]).abs() < 1e-14);
    }

    #[test]
    fn ring_optimum_is_a_radial_minimum() {
        let p = ring_problem();
        let (x_opt, f_opt) = p.known_optimum.clone().unwrap();
        assert!((p.objective_at(&x_opt) - f_opt).abs() < 1e-12);

        // Coarse radial scan agrees with the frozen optimum.
        let mut best = (0.0, f64::INFINITY);
        for i in 0..=1414 {
            let r = i as f64 * 1e-3;
            let v = 10.0 * r * (2.0 * std::f64::consts::PI * r).sin();
            if v < best.1 {
                best = (r, v);
            }
        }
        assert!((best.0 - RING_OPTIMUM_RADIUS).abs() < 2e-3, "radius {}", best.0);
        assert!(best.1 >= f_opt - 1e-6, "scan value {} below optimum", best.1);

        // The minimum holds along the whole circle.
        for k in 0..8 {
            let phi = k as f64 * std::f64::consts::FRAC_PI_4;
            let x = [RING_OPTIMUM_RADIUS * phi.cos(), RING_OPTIMUM_RADIUS * phi.sin()];
            if p.domain.contains(&x) {
                assert!((p.objective_at(&x) - f_opt).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ring_cost_is_positive_on_domain() {
        let p = ring_problem();
        for x in [[-1.0, -1.0], [1.0, 1.0], [0.0, 0.0], [0.3, -0.8]] {
            assert!(p.cost_at(None, &x) > 0.0);
        }
    }

    #[test]
    fn adversarial_markup_is_exact_at_optimum_and_absent_outside() {
        let base = ring_problem();
        let adv = adversarial_cost_problem(&base, 10.0, 0.25).unwrap();
        let (x_opt, _) = base.known_optimum.clone().unwrap();

        let ratio = adv.cost_at(None, &x_opt) / base.cost_at(None, &x_opt);
        assert!((ratio - 10.0).abs() < 1e-12, "ratio {ratio}");

        // Objective untouched.
        assert_eq!(adv.objective_at(&[0.3, 0.4]), base.objective_at(&[0.3, 0.4]));

        // Outside the ball the cost is bit-identical.
        for x in [[-0.9, -0.9], [0.0, 0.0], [0.2, -0.9]] {
            assert_eq!(
                adv.cost_at(None, &x).to_bits(),
                base.cost_at(None, &x).to_bits()
            );
        }

        // Inside the ball but off-center: strictly between 1x and 10x.
        let inside = [x_opt[0] + 0.1, x_opt[1]];
        let r = adv.cost_at(None, &inside) / base.cost_at(None, &inside);
        assert!(r > 1.0 && r < 10.0, "blend ratio {r}");
    }

    #[test]
    fn unit_markup_leaves_costs_bit_identical() {
        let base = ring_problem();
        let adv = adversarial_cost_problem(&base, 1.0, 0.25).unwrap();
        for x in [[0.78, 0.0], [0.7, 0.1], [0.5, 0.5]] {
            assert_eq!(
                adv.cost_at(None, &x).to_bits(),
                base.cost_at(None, &x).to_bits()
            );
        }
    }

    #[test]
    fn adversarial_validation() {
        let base = ring_problem();
        assert!(adversarial_cost_problem(&base, 0.0, 0.25).is_err());
        assert!(adversarial_cost_problem(&base, 10.0, -1.0).is_err());
        let no_opt = sensor_stand_in(2, 1).unwrap();
        assert!(adversarial_cost_problem(&no_opt, 10.0, 0.25).is_err());
    }

    #[test]
    fn sensor_cost_is_frobenius_distance_with_floor() {
        let p = sensor_stand_in(3, 7).unwrap();
        let here = vec![0.5; 6];
        // Standing still costs the floor.
        assert_eq!(p.cost_at(Some(&here), &here), SENSOR_COST_FLOOR);
        // Moving one sensor by delta in one coordinate costs delta.
        let mut moved = here.clone();
        moved[2] += 0.3;
        assert!((p.cost_at(Some(&here), &moved) - 0.3).abs() < 1e-15);
        // First evaluation is charged from the initial placement.
        assert!((p.cost_at(None, &moved) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn sensor_objective_rewards_spreading_out() {
        let p = sensor_stand_in(3, SENSOR_FIELD_SEED).unwrap();
        let coincident = p.objective_at(&vec![0.5; 6]);
        let spread = p.objective_at(&[0.2, 0.2, 0.8, 0.2, 0.5, 0.8]);
        assert!(
            spread < coincident,
            "spread {spread} should beat coincident {coincident}"
        );
    }

    #[test]
    fn sensor_field_is_seed_deterministic() {
        let a = sensor_stand_in(2, 11).unwrap();
        let b = sensor_stand_in(2, 11).unwrap();
        let c = sensor_stand_in(2, 12).unwrap();
        let x = [0.1, 0.9, 0.6, 0.3];
        assert_eq!(a.objective_at(&x).to_bits(), b.objective_at(&x).to_bits());
        assert_ne!(a.objective_at(&x).to_bits(), c.objective_at(&x).to_bits());
    }

    #[test]
    fn registry_lookup() {
        assert_eq!(problem_by_name("ring").unwrap().name, "ring");
        assert_eq!(problem_by_name("ring-adv").unwrap().name, "ring-adv");
        let unit = problem_by_name("ring-unit").unwrap();
        assert_eq!(unit.cost_at(None, &[0.3, -0.4]), 1.0);
        assert_eq!(unit.cost_at(Some(&[0.9, 0.9]), &[0.0, 0.0]), 1.0);
        let s = problem_by_name("sensor4").unwrap();
        assert_eq!(s.domain.dim(), 8);
        assert!(problem_by_name("volcano").is_err());
        assert!(problem_by_name("sensor").is_err());
        assert!(problem_by_name("sensor0").is_err());
    }
}
