//! Population-based layer training: rank, cull half, refine survivors with
//! SGD, breed replacements by uniform crossover and zero-mutation.
//!
//! Every random decision draws from a substream forked off the layer's
//! stream by a fixed label, so a run is a pure function of its inputs:
//!
//! * `"chromosome"/id` initializes chromosome `id`;
//! * `"refine"/g` shuffles the training set for generation `g`'s refinement;
//! * `"breed"/g` drives parent selection, crossover and mutation in `g`.

use crate::autoencoder::TiedAutoencoder;
use crate::backprop::{batches_per_epoch, BatchPlan, GenerationRecord, LayerResult};
use crate::error::{Error, Result};
use crate::numerics::{RandomStream, Vector};

/// Floor under the RMSE when forming fitness, so a perfect reconstruction
/// has a finite score.
pub const FITNESS_EPSILON: f64 = 1e-12;

/// Fraction of the population removed each generation.
pub const CULL_FRACTION: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct GaConfig {
    pub population_size: usize,
    /// Probability that an offspring is formed by uniform crossover rather
    /// than cloned from its first parent.
    pub crossover_rate: f64,
    /// Independent per-weight probability of being zeroed.
    pub mutation_rate: f64,
    /// SGD steps each survivor gets per generation. `None` spreads one epoch
    /// of the layer's training set across the survivors.
    pub updates_per_survivor_per_generation: Option<u64>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub fitness_eval_sample_count: usize,
    pub budget_total_updates: u64,
    /// Provenance only; trainers take their random stream explicitly.
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 10,
            crossover_rate: 0.8,
            mutation_rate: 0.01,
            updates_per_survivor_per_generation: None,
            learning_rate: 0.1,
            batch_size: 20,
            fitness_eval_sample_count: 1_000,
            budget_total_updates: 40_000,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 || !self.population_size.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "population_size must be even and at least 2, got {}",
                self.population_size
            )));
        }
        for (name, rate) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be in [0, 1], got {rate}"
                )));
            }
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.fitness_eval_sample_count == 0 {
            return Err(Error::InvalidConfig(
                "fitness_eval_sample_count must be at least 1".into(),
            ));
        }
        if self.budget_total_updates == 0 {
            return Err(Error::InvalidConfig(
                "budget_total_updates must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn survivor_count(&self) -> usize {
        self.population_size - self.culled_count()
    }

    pub fn culled_count(&self) -> usize {
        (self.population_size as f64 * CULL_FRACTION) as usize
    }

    /// Refinement steps per survivor per generation for a layer trained on
    /// `n_train` samples.
    pub fn updates_per_survivor(&self, n_train: usize) -> u64 {
        self.updates_per_survivor_per_generation.unwrap_or_else(|| {
            let per_epoch = batches_per_epoch(n_train, self.batch_size) as u64;
            (per_epoch / self.survivor_count() as u64).max(1)
        })
    }

    /// SGD updates one generation consumes.
    pub fn generation_cost(&self, n_train: usize) -> u64 {
        self.survivor_count() as u64 * self.updates_per_survivor(n_train)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chromosome {
    pub params: TiedAutoencoder,
    pub id: u64,
    pub birth_generation: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Score {
    pub rmse: f64,
    pub fitness: f64,
}

impl Score {
    pub fn from_rmse(rmse: f64) -> Score {
        Score {
            rmse,
            fitness: 1.0 / rmse.max(FITNESS_EPSILON),
        }
    }
}

/// A chromosome and its score. The score is `None` until evaluated and is
/// cleared whenever the parameters change.
#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub chromosome: Chromosome,
    pub score: Option<Score>,
}

impl Member {
    pub fn unevaluated(chromosome: Chromosome) -> Member {
        Member {
            chromosome,
            score: None,
        }
    }

    pub fn id(&self) -> u64 {
        self.chromosome.id
    }

    fn fitness(&self) -> Result<f64> {
        self.score.map(|s| s.fitness).ok_or(Error::Unevaluated {
            id: self.chromosome.id,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Population {
    pub members: Vec<Member>,
    pub generation: u64,
    pub updates_consumed: u64,
    next_id: u64,
}

impl Population {
    pub fn is_evaluated(&self) -> bool {
        self.members.iter().all(|m| m.score.is_some())
    }

    /// Evaluated member with the lowest RMSE, ties to the lowest id.
    pub fn best(&self) -> Result<&Member> {
        let mut best: Option<(&Member, f64)> = None;
        for m in &self.members {
            let rmse = m.score.ok_or(Error::Unevaluated { id: m.id() })?.rmse;
            let better = match best {
                None => true,
                Some((b, r)) => rmse < r || (rmse == r && m.id() < b.id()),
            };
            if better {
                best = Some((m, rmse));
            }
        }
        best.map(|(m, _)| m).ok_or(Error::EmptyInput("population"))
    }

    pub fn mean_rmse(&self) -> Result<f64> {
        let mut sum = 0.0;
        for m in &self.members {
            sum += m.score.ok_or(Error::Unevaluated { id: m.id() })?.rmse;
        }
        Ok(sum / self.members.len() as f64)
    }

    fn fresh_tag(&mut self) -> ChildTag {
        let tag = ChildTag {
            id: self.next_id,
            birth_generation: self.generation + 1,
        };
        self.next_id += 1;
        tag
    }
}

/// Identity assigned to a newly bred chromosome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChildTag {
    pub id: u64,
    pub birth_generation: u64,
}

pub fn init_population(
    cfg: &GaConfig,
    shape: (usize, usize),
    rng: &RandomStream,
) -> Result<Population> {
    cfg.validate()?;
    let (hidden, visible) = shape;
    let members = (0..cfg.population_size as u64)
        .map(|id| {
            let params =
                TiedAutoencoder::random(hidden, visible, &mut rng.fork_indexed("chromosome", id))?;
            Ok(Member::unevaluated(Chromosome {
                params,
                id,
                birth_generation: 0,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Population {
        members,
        generation: 0,
        updates_consumed: 0,
        next_id: cfg.population_size as u64,
    })
}

/// Scores every member whose score is missing.
pub fn evaluate(pop: &mut Population, eval_samples: &[Vector]) -> Result<()> {
    if eval_samples.is_empty() {
        return Err(Error::EmptyInput("fitness evaluation samples"));
    }
    for m in pop.members.iter_mut().filter(|m| m.score.is_none()) {
        m.score = Some(Score::from_rmse(m.chromosome.params.rmse(eval_samples)?));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Culling {
    /// Top half, fittest first.
    pub survivors: Vec<Member>,
    pub culled: Vec<Member>,
}

impl Culling {
    pub fn culled_count(&self) -> usize {
        self.culled.len()
    }
}

/// Sorts by non-increasing fitness (ties to the lower id) and splits off the
/// bottom half.
pub fn rank_and_cull(members: Vec<Member>) -> Result<Culling> {
    if members.len() < 2 || !members.len().is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "cannot cull a population of {}",
            members.len()
        )));
    }
    let mut keyed = members
        .into_iter()
        .map(|m| Ok((m.fitness()?, m)))
        .collect::<Result<Vec<_>>>()?;
    keyed.sort_by(|(fa, a), (fb, b)| fb.total_cmp(fa).then(a.id().cmp(&b.id())));
    let mut ranked: Vec<Member> = keyed.into_iter().map(|(_, m)| m).collect();
    let culled = ranked.split_off((ranked.len() as f64 * (1.0 - CULL_FRACTION)) as usize);
    Ok(Culling {
        survivors: ranked,
        culled,
    })
}

/// Gives each survivor `updates_per_survivor` SGD steps. Generation
/// `generation` shuffles the training set once; the survivor at rank `r`
/// takes batches `r·U .. (r+1)·U` of that order, wrapping past the end.
/// Returns the number of updates applied.
pub fn refine_survivors(
    survivors: &mut [Member],
    train: &[Vector],
    cfg: &GaConfig,
    updates_per_survivor: u64,
    generation: u64,
    rng: &RandomStream,
) -> Result<u64> {
    if train.is_empty() {
        return Err(Error::EmptyInput("refinement training data"));
    }
    if updates_per_survivor == 0 {
        return Ok(0);
    }
    let plan = BatchPlan::new(
        train.len(),
        cfg.batch_size,
        &mut rng.fork_indexed("refine", generation),
    )?;
    for (rank, member) in survivors.iter_mut().enumerate() {
        let params = &mut member.chromosome.params;
        for u in 0..updates_per_survivor {
            let k = rank as u64 * updates_per_survivor + u;
            let batch = plan.batch(train, (k % plan.batches_per_pass() as u64) as usize);
            let g = params.gradient(&batch)?;
            params.apply_gradients(&g, cfg.learning_rate)?;
        }
        member.score = None;
    }
    Ok(survivors.len() as u64 * updates_per_survivor)
}

/// Two distinct survivors, uniformly without replacement.
pub fn select_parents<'a, T>(survivors: &'a [T], rng: &mut RandomStream) -> Result<(&'a T, &'a T)> {
    if survivors.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "parent selection needs at least 2 survivors, got {}",
            survivors.len()
        )));
    }
    let picks = rng.sample_indices(survivors.len(), 2);
    Ok((&survivors[picks[0]], &survivors[picks[1]]))
}

/// With probability `rate`, each parameter (weights and both biases) comes
/// from either parent by a fair coin; otherwise the child clones `parent_a`.
pub fn crossover(
    parent_a: &Chromosome,
    parent_b: &Chromosome,
    rate: f64,
    tag: ChildTag,
    rng: &mut RandomStream,
) -> Result<Chromosome> {
    if parent_a.params.shape() != parent_b.params.shape() {
        let (ha, va) = parent_a.params.shape();
        let (hb, vb) = parent_b.params.shape();
        return Err(Error::dim("crossover", ha * va, hb * vb));
    }
    let mut params = parent_a.params.clone();
    if rng.bernoulli(rate) {
        for (child, other) in params
            .param_slices_mut()
            .into_iter()
            .zip(parent_b.params.param_slices())
        {
            for (c, &o) in child.iter_mut().zip(other) {
                if rng.bernoulli(0.5) {
                    *c = o;
                }
            }
        }
    }
    Ok(Chromosome {
        params,
        id: tag.id,
        birth_generation: tag.birth_generation,
    })
}

/// Zeroes each weight independently with probability `rate`. Biases are
/// never touched.
pub fn mutate(mut c: Chromosome, rate: f64, rng: &mut RandomStream) -> Chromosome {
    for w in c.params.weights_mut() {
        if rng.bernoulli(rate) {
            *w = 0.0;
        }
    }
    c
}

/// Diagnostics from one generation, for inspection and tests.
#[derive(Clone, Debug)]
pub struct StepTrace {
    pub culled: Vec<Member>,
    /// Survivors after refinement, fittest-at-cull first.
    pub refined: Vec<Member>,
    /// `(parent_a id, parent_b id, child before mutation)` per offspring.
    pub offspring: Vec<(u64, u64, Chromosome)>,
}

/// One generation: evaluate, cull, refine survivors, breed replacements from
/// the refined survivors.
pub fn generation_step(
    pop: Population,
    train: &[Vector],
    eval_samples: &[Vector],
    cfg: &GaConfig,
    rng: &RandomStream,
) -> Result<Population> {
    generation_step_traced(pop, train, eval_samples, cfg, rng).map(|(p, _)| p)
}

pub fn generation_step_traced(
    mut pop: Population,
    train: &[Vector],
    eval_samples: &[Vector],
    cfg: &GaConfig,
    rng: &RandomStream,
) -> Result<(Population, StepTrace)> {
    cfg.validate()?;
    if pop.members.len() != cfg.population_size {
        return Err(Error::InvalidConfig(format!(
            "population has {} members, config expects {}",
            pop.members.len(),
            cfg.population_size
        )));
    }
    evaluate(&mut pop, eval_samples)?;
    let generation = pop.generation;
    let Culling {
        mut survivors,
        culled,
    } = rank_and_cull(std::mem::take(&mut pop.members))?;
    let used = refine_survivors(
        &mut survivors,
        train,
        cfg,
        cfg.updates_per_survivor(train.len()),
        generation,
        rng,
    )?;

    let mut breed = rng.fork_indexed("breed", generation);
    let pool: Vec<&Chromosome> = survivors.iter().map(|m| &m.chromosome).collect();
    let mut offspring = Vec::with_capacity(culled.len());
    for _ in 0..culled.len() {
        let (a, b) = select_parents(&pool, &mut breed)?;
        let child = crossover(a, b, cfg.crossover_rate, pop.fresh_tag(), &mut breed)?;
        offspring.push((a.id, b.id, child.clone()));
        let child = mutate(child, cfg.mutation_rate, &mut breed);
        pop.members.push(Member::unevaluated(child));
    }
    let refined = survivors.clone();
    pop.members.splice(0..0, survivors);
    pop.generation += 1;
    pop.updates_consumed += used;
    Ok((
        pop,
        StepTrace {
            culled,
            refined,
            offspring,
        },
    ))
}

/// Runs as many generations as fit in `cfg.budget_total_updates`, then
/// returns the lowest-RMSE member of the final evaluated population.
pub fn train_layer(
    cfg: &GaConfig,
    shape: (usize, usize),
    train: &[Vector],
    eval_samples: &[Vector],
    rng: &RandomStream,
) -> Result<LayerResult> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("GA training data"));
    }
    let per_generation = cfg.generation_cost(train.len());
    if per_generation == 0 {
        return Err(Error::InvalidConfig(
            "updates_per_survivor_per_generation must be at least 1 for layer training".into(),
        ));
    }
    let generations = cfg.budget_total_updates / per_generation;
    if generations == 0 {
        return Err(Error::BudgetTooSmall {
            budget: cfg.budget_total_updates,
            per_generation,
        });
    }
    let mut pop = init_population(cfg, shape, rng)?;
    let mut history = Vec::with_capacity(generations as usize);
    for _ in 0..generations {
        pop = generation_step(pop, train, eval_samples, cfg, rng)?;
        evaluate(&mut pop, eval_samples)?;
        let best = pop.best()?;
        history.push(GenerationRecord {
            generation: pop.generation,
            best_rmse: best.score.expect("evaluated").rmse,
            mean_rmse: pop.mean_rmse()?,
            best_sparsity_exact: best.chromosome.params.sparsity(0.0),
            updates_consumed: pop.updates_consumed,
        });
    }
    let best = pop.best()?;
    Ok(LayerResult {
        best: best.chromosome.params.clone(),
        best_rmse: best.score.expect("evaluated").rmse,
        history,
        updates_consumed: pop.updates_consumed,
    })
}
