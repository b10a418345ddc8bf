//! Bacterial foraging optimization over the unit box `[0, 1]^d`.
//!
//! The loop nests elimination-dispersal events around reproduction events
//! around chemotactic steps. A chemotactic step tumbles (picks a direction
//! away from a uniformly drawn point), moves by a random fraction of the step
//! length and then swims along the same displacement while fitness strictly
//! improves. After every chemotactic block the healthier half of the
//! population splits and the other half dies; after every reproduction
//! block each bacterium is relocated at random with a fixed probability.
//!
//! Every bacterium draws from its own child stream addressed by
//! `(phase, l, k, j, i)`, so sweeps may run in parallel without changing the
//! result.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RandomStream;

const PHASE_INIT: u64 = 0;
const PHASE_CHEMOTAXIS: u64 = 1;
const PHASE_DISPERSAL: u64 = 2;

/// Objective to minimize. Implemented for plain `Fn(&[f64]) -> f64` closures.
pub trait Fitness: Sync {
    fn evaluate(&self, position: &[f64]) -> Result<f64>;
}

impl<F> Fitness for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, position: &[f64]) -> Result<f64> {
        Ok(self(position))
    }
}

fn evaluate_checked<F: Fitness + ?Sized>(fitness: &F, position: &[f64]) -> Result<f64> {
    let value = fitness.evaluate(position)?;
    if !value.is_finite() {
        return Err(Error::NonFiniteFitness {
            position: position.to_vec(),
            value,
        });
    }
    Ok(value)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BfaConfig {
    /// `S`, must be even.
    pub population: usize,
    /// `N_c`
    pub chemotactic_steps: usize,
    /// `N_re`
    pub reproduction_steps: usize,
    /// `N_ed`
    pub dispersal_events: usize,
    /// `N_s`, extra same-direction moves allowed per chemotactic step.
    pub swim_length: usize,
    /// `s_p`
    pub step_size: f64,
    /// `P_ed`
    pub dispersal_probability: f64,
    pub dim: usize,
}

impl Default for BfaConfig {
    fn default() -> Self {
        BfaConfig {
            population: 20,
            chemotactic_steps: 25,
            reproduction_steps: 4,
            dispersal_events: 2,
            swim_length: 4,
            step_size: 0.1,
            dispersal_probability: 0.25,
            dim: 1,
        }
    }
}

impl BfaConfig {
    pub fn with_dim(dim: usize) -> Self {
        BfaConfig {
            dim,
            ..BfaConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if self.population < 2 || !self.population.is_multiple_of(2) {
            return fail(format!(
                "population must be even and >= 2, got {}",
                self.population
            ));
        }
        if self.chemotactic_steps == 0 || self.reproduction_steps == 0 || self.dispersal_events == 0
        {
            return fail("chemotactic, reproduction and dispersal counts must be >= 1".into());
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return fail(format!("step size must be > 0, got {}", self.step_size));
        }
        if !(0.0..=1.0).contains(&self.dispersal_probability) {
            return fail(format!(
                "dispersal probability must be in [0, 1], got {}",
                self.dispersal_probability
            ));
        }
        if self.dim == 0 {
            return fail("search dimension must be >= 1".into());
        }
        Ok(())
    }

    /// Trace length produced by [`optimize`]: the initial population, one
    /// entry per chemotactic step and one per dispersal event.
    pub fn trace_len(&self) -> usize {
        1 + self.dispersal_events * (self.reproduction_steps * self.chemotactic_steps + 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bacterium {
    pub position: Vec<f64>,
    /// Fitness at `position`; lower is better.
    pub fitness: f64,
    /// Sum of fitness values evaluated since the last reproduction.
    pub health: f64,
}

impl Bacterium {
    pub fn evaluated<F: Fitness + ?Sized>(position: Vec<f64>, fitness: &F) -> Result<Self> {
        let value = evaluate_checked(fitness, &position)?;
        Ok(Bacterium {
            position,
            fitness: value,
            health: 0.0,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BfaResult {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    /// Best-so-far fitness, see [`BfaConfig::trace_len`].
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

fn random_position(dim: usize, stream: &mut RandomStream) -> Vec<f64> {
    (0..dim).map(|_| stream.unit()).collect()
}

/// `(position - x_rand) / |position - x_rand|`, `None` when they coincide.
pub fn direction_away_from(position: &[f64], x_rand: &[f64]) -> Option<Vec<f64>> {
    let delta: Vec<f64> = position.iter().zip(x_rand).map(|(p, r)| p - r).collect();
    let norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    Some(delta.into_iter().map(|d| d / norm).collect())
}

/// Unit tumble direction for `position`, against a freshly drawn uniform point.
pub fn tumble_direction(position: &[f64], stream: &mut RandomStream) -> Vec<f64> {
    loop {
        let x_rand = random_position(position.len(), stream);
        if let Some(dir) = direction_away_from(position, &x_rand) {
            return dir;
        }
    }
}

fn displaced(position: &[f64], displacement: &[f64]) -> Vec<f64> {
    position
        .iter()
        .zip(displacement)
        .map(|(p, d)| (p + d).clamp(0.0, 1.0))
        .collect()
}

/// Outcome of one chemotactic step.
#[derive(Clone, Debug, PartialEq)]
pub struct Move {
    pub bacterium: Bacterium,
    pub evaluations: usize,
}

/// One chemotactic step with a given direction and step fraction `r`.
///
/// The first move by `r * s_p * direction` is accepted unless it raises
/// fitness, in which case the bacterium stays put. If it lowered fitness, up
/// to `N_s` further moves by the same displacement follow, each kept only if
/// it strictly lowers fitness again; the first non-improving trial is
/// discarded and ends the swim.
/// Every evaluated fitness is added to the bacterium's health.
pub fn chemotaxis_move_with<F: Fitness + ?Sized>(
    b: &Bacterium,
    direction: &[f64],
    r: f64,
    fitness: &F,
    cfg: &BfaConfig,
) -> Result<Move> {
    if direction.len() != b.position.len() {
        return Err(Error::DimensionMismatch(format!(
            "direction has {} components, position {}",
            direction.len(),
            b.position.len()
        )));
    }
    let displacement: Vec<f64> = direction.iter().map(|d| r * cfg.step_size * d).collect();
    let first = displaced(&b.position, &displacement);
    let first_value = evaluate_checked(fitness, &first)?;
    let mut health = b.health + first_value;
    let mut evaluations = 1;
    if first_value > b.fitness {
        return Ok(Move {
            bacterium: Bacterium {
                position: b.position.clone(),
                fitness: b.fitness,
                health,
            },
            evaluations,
        });
    }
    let mut position = first;
    let mut value = first_value;

    let mut improved = value < b.fitness;
    let mut swims = 0;
    while improved && swims < cfg.swim_length {
        let trial = displaced(&position, &displacement);
        let trial_value = evaluate_checked(fitness, &trial)?;
        evaluations += 1;
        swims += 1;
        health += trial_value;
        improved = trial_value < value;
        if improved {
            position = trial;
            value = trial_value;
        }
    }

    Ok(Move {
        bacterium: Bacterium {
            position,
            fitness: value,
            health,
        },
        evaluations,
    })
}

/// One chemotactic step drawing the tumble direction and `R ~ U[0, 1)` from `stream`.
pub fn chemotaxis_move<F: Fitness + ?Sized>(
    b: &Bacterium,
    fitness: &F,
    cfg: &BfaConfig,
    stream: &mut RandomStream,
) -> Result<Move> {
    let direction = tumble_direction(&b.position, stream);
    let r = stream.unit();
    chemotaxis_move_with(b, &direction, r, fitness, cfg)
}

/// Keep the healthier half (lowest accumulated error) and duplicate it.
///
/// Ordering is a stable sort on health, so ties keep population order.
/// Survivors come first, followed by their copies in the same order; all
/// health accumulators are reset.
pub fn reproduce(population: Vec<Bacterium>) -> Result<Vec<Bacterium>> {
    if !population.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "reproduction needs an even population, got {}",
            population.len()
        )));
    }
    let mut ranked = population;
    ranked.sort_by(|a, b| a.health.total_cmp(&b.health));
    ranked.truncate(ranked.len() / 2);
    for b in &mut ranked {
        b.health = 0.0;
    }
    let copies = ranked.clone();
    ranked.extend(copies);
    Ok(ranked)
}

/// Relocates each bacterium with probability `P_ed` to a fresh uniform position.
///
/// Returns the new population and the number of fitness evaluations spent.
pub fn eliminate_disperse<F: Fitness + ?Sized>(
    population: Vec<Bacterium>,
    cfg: &BfaConfig,
    stream: &RandomStream,
    fitness: &F,
) -> Result<(Vec<Bacterium>, usize)> {
    let outcomes: Vec<Result<(Bacterium, usize)>> = population
        .into_par_iter()
        .enumerate()
        .map(|(i, b)| {
            let mut s = stream.child(i as u64);
            if !s.bernoulli(cfg.dispersal_probability) {
                return Ok((b, 0));
            }
            let position = random_position(b.position.len(), &mut s);
            let mut fresh = Bacterium::evaluated(position, fitness)?;
            fresh.health = b.health;
            Ok((fresh, 1))
        })
        .collect();
    let mut evaluations = 0;
    let mut out = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let (b, n) = o?;
        evaluations += n;
        out.push(b);
    }
    Ok((out, evaluations))
}

struct Best {
    position: Vec<f64>,
    fitness: f64,
}

impl Best {
    fn update(&mut self, population: &[Bacterium]) {
        for b in population {
            if b.fitness < self.fitness {
                self.fitness = b.fitness;
                self.position.clone_from(&b.position);
            }
        }
    }
}

/// Runs the full foraging loop and returns the best position sampled.
pub fn optimize<F: Fitness + ?Sized>(
    fitness: &F,
    cfg: &BfaConfig,
    stream: &RandomStream,
) -> Result<BfaResult> {
    cfg.validate()?;

    let init: Vec<Result<Bacterium>> = (0..cfg.population)
        .into_par_iter()
        .map(|i| {
            let mut s = stream.child_path(&[PHASE_INIT, i as u64]);
            Bacterium::evaluated(random_position(cfg.dim, &mut s), fitness)
        })
        .collect();
    let mut population = init.into_iter().collect::<Result<Vec<_>>>()?;
    let mut evaluations = population.len();

    let mut best = Best {
        position: population[0].position.clone(),
        fitness: f64::INFINITY,
    };
    best.update(&population);
    let mut trace = Vec::with_capacity(cfg.trace_len());
    trace.push(best.fitness);

    for l in 0..cfg.dispersal_events {
        for k in 0..cfg.reproduction_steps {
            for j in 0..cfg.chemotactic_steps {
                let moves: Vec<Result<Move>> = population
                    .par_iter()
                    .enumerate()
                    .map(|(i, b)| {
                        let mut s = stream.child_path(&[
                            PHASE_CHEMOTAXIS,
                            l as u64,
                            k as u64,
                            j as u64,
                            i as u64,
                        ]);
                        chemotaxis_move(b, fitness, cfg, &mut s)
                    })
                    .collect();
                let mut next = Vec::with_capacity(population.len());
                for m in moves {
                    let m = m?;
                    evaluations += m.evaluations;
                    next.push(m.bacterium);
                }
                population = next;
                best.update(&population);
                trace.push(best.fitness);
            }
            population = reproduce(population)?;
        }
        let dispersal_stream = stream.child_path(&[PHASE_DISPERSAL, l as u64]);
        let (dispersed, n) = eliminate_disperse(population, cfg, &dispersal_stream, fitness)?;
        population = dispersed;
        evaluations += n;
        best.update(&population);
        trace.push(best.fitness);
    }

    Ok(BfaResult {
        best_position: best.position,
        best_fitness: best.fitness,
        trace,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn bacterium(position: Vec<f64>, health: f64) -> Bacterium {
        Bacterium {
            position,
            fitness: 0.0,
            health,
        }
    }

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| (v - 0.5).powi(2)).sum()
    }

    #[test]
    fn direction_examples() {
        let d = direction_away_from(&[0.5, 0.5], &[0.3, 0.5]).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-15 && d[1].abs() < 1e-15);
        let d = direction_away_from(&[0.8], &[0.2]).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-15);
        assert!(direction_away_from(&[0.4, 0.1], &[0.4, 0.1]).is_none());
    }

    #[test]
    fn tumble_is_unit_length() {
        let mut s = RandomStream::new(4);
        for d in 1..8 {
            for _ in 0..50 {
                let pos: Vec<f64> = (0..d).map(|_| s.unit()).collect();
                let v = tumble_direction(&pos, &mut s);
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn move_by_fraction_of_step() {
        let cfg = BfaConfig {
            step_size: 0.1,
            swim_length: 0,
            ..BfaConfig::with_dim(2)
        };
        let b = bacterium(vec![0.5, 0.5], 0.0);
        let m = chemotaxis_move_with(&b, &[1.0, 0.0], 0.5, &|_: &[f64]| 0.0, &cfg).unwrap();
        assert!((m.bacterium.position[0] - 0.55).abs() < 1e-15);
        assert_eq!(m.bacterium.position[1], 0.5);
    }

    #[test]
    fn worsening_move_is_rejected_but_counted() {
        let cfg = BfaConfig::with_dim(1);
        let b = Bacterium::evaluated(vec![0.5], &sphere).unwrap();
        let m = chemotaxis_move_with(&b, &[1.0], 0.9, &sphere, &cfg).unwrap();
        assert_eq!(m.bacterium.position, vec![0.5]);
        assert_eq!(m.bacterium.fitness, 0.0);
        assert_eq!(m.evaluations, 1);
        assert!((m.bacterium.health - (0.09f64).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn move_clamps_at_boundary() {
        let cfg = BfaConfig::with_dim(1);
        let b = bacterium(vec![1.0], 0.0);
        for r in [0.0, 0.3, 0.999] {
            let m = chemotaxis_move_with(&b, &[1.0], r, &|x: &[f64]| x[0], &cfg).unwrap();
            assert_eq!(m.bacterium.position, vec![1.0]);
        }
    }

    #[test]
    fn constant_fitness_never_swims() {
        let cfg = BfaConfig::with_dim(2);
        let calls = AtomicUsize::new(0);
        let f = |_: &[f64]| {
            calls.fetch_add(1, Ordering::Relaxed);
            3.0
        };
        let b = Bacterium {
            position: vec![0.2, 0.2],
            fitness: 3.0,
            health: 0.0,
        };
        let m = chemotaxis_move_with(&b, &[0.6, 0.8], 0.5, &f, &cfg).unwrap();
        assert_eq!(m.evaluations, 1);
        assert_eq!(calls.load(Ordering::Relaxed), 1);
        let expected = [0.2 + 0.5 * 0.1 * 0.6, 0.2 + 0.5 * 0.1 * 0.8];
        for (p, e) in m.bacterium.position.iter().zip(expected) {
            assert!((p - e).abs() < 1e-15);
        }
        assert_eq!(m.bacterium.health, 3.0);
    }

    #[test]
    fn swim_continues_while_improving() {
        let cfg = BfaConfig {
            swim_length: 4,
            step_size: 0.1,
            ..BfaConfig::with_dim(1)
        };
        // improves monotonically to the right
        let f = |x: &[f64]| 1.0 - x[0];
        let b = Bacterium::evaluated(vec![0.0], &f).unwrap();
        let m = chemotaxis_move_with(&b, &[1.0], 1.0, &f, &cfg).unwrap();
        assert!((m.bacterium.position[0] - 0.5).abs() < 1e-12);
        assert_eq!(m.evaluations, 5);

        assert!((m.bacterium.health - (0.9 + 0.8 + 0.7 + 0.6 + 0.5)).abs() < 1e-12);

        // optimum at 0.25: the swim stops once it overshoots
        let g = |x: &[f64]| (x[0] - 0.25).abs();
        let b = Bacterium::evaluated(vec![0.0], &g).unwrap();
        let m = chemotaxis_move_with(&b, &[1.0], 1.0, &g, &cfg).unwrap();
        assert!((m.bacterium.position[0] - 0.2).abs() < 1e-12);
        assert_eq!(m.evaluations, 3);
        assert!((m.bacterium.fitness - 0.05).abs() < 1e-12);
    }

    #[test]
    fn move_rejects_non_finite_fitness() {
        let cfg = BfaConfig::with_dim(1);
        let b = bacterium(vec![0.5], 0.0);
        let err = chemotaxis_move_with(&b, &[1.0], 0.5, &|_: &[f64]| f64::NAN, &cfg).unwrap_err();
        match err {
            Error::NonFiniteFitness { position, .. } => assert!((position[0] - 0.55).abs() < 1e-15),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn reproduce_examples() {
        let out = reproduce(vec![bacterium(vec![0.1], 1.0), bacterium(vec![0.9], 9.0)]).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|b| b.position == vec![0.1] && b.health == 0.0));

        let pop = [3.0, 1.0, 4.0, 2.0]
            .iter()
            .enumerate()
            .map(|(i, &h)| bacterium(vec![i as f64 / 10.0], h))
            .collect();
        let out = reproduce(pop).unwrap();
        let positions: Vec<f64> = out.iter().map(|b| b.position[0]).collect();
        assert_eq!(positions, vec![0.1, 0.3, 0.1, 0.3]);

        let ties = (0..4).map(|i| bacterium(vec![i as f64], 5.0)).collect();
        let out = reproduce(ties).unwrap();
        let positions: Vec<f64> = out.iter().map(|b| b.position[0]).collect();
        assert_eq!(positions, vec![0.0, 1.0, 0.0, 1.0]);

        assert!(reproduce(vec![bacterium(vec![0.0], 0.0); 3]).is_err());
    }

    #[test]
    fn dispersal_extremes() {
        let pop: Vec<Bacterium> = (0..10).map(|i| bacterium(vec![i as f64 / 10.0; 3], 0.0)).collect();
        let s = RandomStream::new(8);
        let never = BfaConfig {
            dispersal_probability: 0.0,
            ..BfaConfig::with_dim(3)
        };
        let (same, n) = eliminate_disperse(pop.clone(), &never, &s, &sphere).unwrap();
        assert_eq!(same, pop);
        assert_eq!(n, 0);

        let always = BfaConfig {
            dispersal_probability: 1.0,
            ..never
        };
        let (moved, n) = eliminate_disperse(pop.clone(), &always, &s, &sphere).unwrap();
        assert_eq!(n, 10);
        for (a, b) in moved.iter().zip(&pop) {
            assert_ne!(a.position, b.position);
            assert!(a.position.iter().all(|v| (0.0..1.0).contains(v)));
            assert_eq!(a.fitness, sphere(&a.position));
        }
    }

    #[test]
    fn dispersal_rate_matches_probability() {
        let cfg = BfaConfig {
            dispersal_probability: 0.25,
            ..BfaConfig::with_dim(2)
        };
        let pop: Vec<Bacterium> = (0..40).map(|_| bacterium(vec![0.5, 0.5], 0.0)).collect();
        let root = RandomStream::new(2024);
        let trials = 500;
        let total: usize = (0..trials)
            .map(|t| eliminate_disperse(pop.clone(), &cfg, &root.child(t), &sphere).unwrap().1)
            .sum();
        let mean = total as f64 / trials as f64;
        assert!((8.0..=12.0).contains(&mean), "mean dispersed {mean}");
    }

    #[test]
    fn validate_rejects_bad_configs() {
        let ok = BfaConfig::with_dim(3);
        assert!(ok.validate().is_ok());
        for bad in [
            BfaConfig { population: 3, ..ok.clone() },
            BfaConfig { population: 0, ..ok.clone() },
            BfaConfig { chemotactic_steps: 0, ..ok.clone() },
            BfaConfig { reproduction_steps: 0, ..ok.clone() },
            BfaConfig { dispersal_events: 0, ..ok.clone() },
            BfaConfig { step_size: 0.0, ..ok.clone() },
            BfaConfig { dispersal_probability: 1.5, ..ok.clone() },
            BfaConfig { dim: 0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn flat_landscape() {
        let cfg = BfaConfig {
            chemotactic_steps: 5,
            reproduction_steps: 2,
            dispersal_events: 2,
            ..BfaConfig::with_dim(3)
        };
        let r = optimize(&|_: &[f64]| 2.5, &cfg, &RandomStream::new(1)).unwrap();
        assert_eq!(r.best_fitness, 2.5);
        assert!(r.trace.iter().all(|&v| v == 2.5));
        assert_eq!(r.trace.len(), cfg.trace_len());
    }

    #[test]
    fn one_dimensional_abs() {
        let cfg = BfaConfig::with_dim(1);
        let r = optimize(&|x: &[f64]| (x[0] - 0.25).abs(), &cfg, &RandomStream::new(17)).unwrap();
        assert!((r.best_position[0] - 0.25).abs() < 0.05);
    }

    #[test]
    fn evaluation_count_is_exact() {
        let calls = AtomicUsize::new(0);
        let f = |x: &[f64]| {
            calls.fetch_add(1, Ordering::Relaxed);
            sphere(x)
        };
        let cfg = BfaConfig::with_dim(4);
        let r = optimize(&f, &cfg, &RandomStream::new(5)).unwrap();
        assert_eq!(r.evaluations, calls.load(Ordering::Relaxed));
    }

    #[test]
    fn optimize_is_deterministic() {
        let cfg = BfaConfig::with_dim(5);
        let a = optimize(&sphere, &cfg, &RandomStream::new(77)).unwrap();
        let b = optimize(&sphere, &cfg, &RandomStream::new(77)).unwrap();
        assert_eq!(a, b);
        let c = optimize(&sphere, &cfg, &RandomStream::new(78)).unwrap();
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn optimize_propagates_fitness_errors() {
        let cfg = BfaConfig::with_dim(2);
        let f = |x: &[f64]| if x[0] > 0.9 { f64::INFINITY } else { x[0] };
        // some run will eventually sample x[0] > 0.9
        let err = (0..20)
            .map(|s| optimize(&f, &cfg, &RandomStream::new(s)))
            .find_map(|r| r.err());
        assert!(matches!(err, Some(Error::NonFiniteFitness { .. })));
    }
}
