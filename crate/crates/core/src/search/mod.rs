//! Steady-state evolution over width genotypes.
//!
//! The population starts as `p1` single mutations of the initial model and
//! grows by one child per step until it holds `p2` individuals. After that
//! each new child replaces the worst member. Parents are picked by
//! tournament; mutations are drawn uniformly from the nine growth
//! functions; children inherit widened parent weights.
//!
//! Randomness comes from numbered ChaCha streams derived from the run seed:
//! stream 0 drives tournaments, stream `id + 1` drives everything about
//! individual `id` (its mutation, widening mapping and training).

mod config;
mod evaluator;
mod log;

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use config::SearchConfig;
pub use evaluator::{budget_distance, FitnessEvaluator, SyntheticFitness, TrainingEvaluator, WeightedObjective};
pub use log::{fitness_histogram, read_log, write_log, EventKind, LogRow, LogWriter};

use crate::arch::{param_count, ArchitectureSpec, ChannelSchedule};
use crate::error::{Error, Result};
use crate::growth::{apply_increment, Genotype, GrowthContext, GrowthFunctionId};
use crate::network::NetworkInstance;
use crate::widen::widen_network;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn individual_rng(seed: u64, id: u64) -> ChaCha8Rng {
    stream_rng(seed, id + 1)
}

#[derive(Clone, Debug)]
pub struct Individual {
    pub id: u64,
    pub parent_id: Option<u64>,
    pub genotype: Genotype,
    pub schedule: ChannelSchedule,
    pub params: u64,
    /// `None` for the initial model.
    pub mutation_tag: Option<GrowthFunctionId>,
    /// Weights, when the search trains real networks.
    pub network: Option<NetworkInstance<f32>>,
    fitness: Option<f64>,
}

impl Individual {
    /// The initial model, id 0. Its genotype must realize its network's schedule.
    pub fn initial(spec: &ArchitectureSpec, genotype: Genotype, network: Option<NetworkInstance<f32>>) -> Result<Self> {
        let schedule = genotype.realize_for(spec)?;
        if let Some(net) = &network {
            if net.schedule() != &schedule {
                return Err(Error::input("initial network does not match the genotype's schedule"));
            }
        }
        Ok(Self {
            id: 0,
            parent_id: None,
            params: param_count(spec, &schedule)?,
            genotype,
            schedule,
            mutation_tag: None,
            network,
            fitness: None,
        })
    }

    pub fn fitness(&self) -> Option<f64> {
        self.fitness
    }

    pub fn set_fitness(&mut self, fitness: f64) -> Result<()> {
        if self.fitness.is_some() {
            return Err(Error::input(format!("individual {} already evaluated", self.id)));
        }
        if fitness.is_nan() {
            return Err(Error::Numeric(format!("individual {} got NaN fitness", self.id)));
        }
        self.fitness = Some(fitness);
        Ok(())
    }

    fn score(&self) -> f64 {
        self.fitness.unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Population {
    members: Vec<Individual>,
    next_id: u64,
}

impl Population {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Individual] {
        &self.members
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    /// Highest fitness; ties go to the lower id.
    pub fn best(&self) -> Option<&Individual> {
        self.members.iter().reduce(|a, b| if better(b, a) { b } else { a })
    }

    /// Lowest fitness; ties go to the higher id.
    fn worst_index(&self) -> Option<usize> {
        (0..self.members.len()).reduce(|a, b| if better(&self.members[a], &self.members[b]) { b } else { a })
    }

    pub fn fitnesses(&self) -> Vec<f64> {
        self.members.iter().map(Individual::score).collect()
    }
}

fn better(a: &Individual, b: &Individual) -> bool {
    a.score() > b.score() || (a.score() == b.score() && a.id < b.id)
}

/// Everything fixed for a run: the spec, the config and the growth context.
#[derive(Clone, Debug)]
pub struct SearchContext {
    pub spec: ArchitectureSpec,
    pub config: SearchConfig,
    pub growth: GrowthContext,
}

impl SearchContext {
    pub fn new(spec: ArchitectureSpec, config: SearchConfig) -> Result<Self> {
        config.validate()?;
        spec.validate()?;
        let growth = GrowthContext::for_spec(&spec, config.lambda)?;
        Ok(Self { spec, config, growth })
    }
}

pub fn draw_mutation<R: Rng + ?Sized>(rng: &mut R) -> GrowthFunctionId {
    draw_from(&GrowthFunctionId::ALL, rng)
}

/// Uniform draw from a non-empty pool.
pub fn draw_from<R: Rng + ?Sized>(pool: &[GrowthFunctionId], rng: &mut R) -> GrowthFunctionId {
    pool[rng.random_range(0..pool.len())]
}

/// Builds an unevaluated child of `parent` by applying `tag`.
pub fn mutate<R: Rng + ?Sized>(
    ctx: &SearchContext,
    parent: &Individual,
    id: u64,
    tag: GrowthFunctionId,
    rng: &mut R,
) -> Result<Individual> {
    let genotype = apply_increment(&parent.genotype, tag, &ctx.growth)?;
    let schedule = genotype.realize_for(&ctx.spec)?;
    let params = param_count(&ctx.spec, &schedule)?;
    let network = match &parent.network {
        Some(_) if ctx.config.cold_start => Some(NetworkInstance::materialize(&ctx.spec, &schedule, rng)?),
        Some(net) => {
            let mut child = net.clone();
            widen_network(&mut child, &schedule, &ctx.config.noise, rng)?;
            Some(child)
        }
        None => None,
    };
    Ok(Individual {
        id,
        parent_id: Some(parent.id),
        genotype,
        schedule,
        params,
        mutation_tag: Some(tag),
        network,
        fitness: None,
    })
}

fn spawn<E: FitnessEvaluator + ?Sized>(ctx: &SearchContext, parent: &Individual, id: u64, evaluator: &E) -> Result<Individual> {
    let mut rng = individual_rng(ctx.config.seed, id);
    let tag = draw_from(&ctx.config.mutation_pool, &mut rng);
    let wrap = |e: Error| Error::Evaluation { id, source: Box::new(e) };
    let mut child = mutate(ctx, parent, id, tag, &mut rng).map_err(wrap)?;
    let fitness = evaluator.evaluate(&mut child, &mut rng).map_err(wrap)?;
    child.set_fitness(fitness).map_err(wrap)?;
    Ok(child)
}

/// `p1` evaluated children of the initial model, ids `1..=p1`.
pub fn seed_population<E: FitnessEvaluator + ?Sized>(
    ctx: &SearchContext,
    initial: &Individual,
    evaluator: &E,
) -> Result<Population> {
    let members = (1..=ctx.config.p1 as u64)
        .into_par_iter()
        .map(|id| spawn(ctx, initial, id, evaluator))
        .collect::<Result<Vec<_>>>()?;
    Ok(Population {
        members,
        next_id: ctx.config.p1 as u64 + 1,
    })
}

/// Best of `k` distinct uniformly sampled members.
pub fn tournament_select<'p, R: Rng + ?Sized>(pop: &'p Population, k: usize, rng: &mut R) -> Result<&'p Individual> {
    if k == 0 || k > pop.len() {
        return Err(Error::input(format!("tournament of {k} from a population of {}", pop.len())));
    }
    let picked = sample(rng, pop.len(), k);
    Ok(picked
        .iter()
        .map(|i| &pop.members[i])
        .reduce(|a, b| if better(b, a) { b } else { a })
        .expect("k >= 1"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub child_id: u64,
    pub parent_id: u64,
    pub removed: Option<u64>,
}

/// One tournament, one mutation, one evaluation and the replacement.
pub fn evolve_step<E: FitnessEvaluator + ?Sized>(
    ctx: &SearchContext,
    pop: &mut Population,
    evaluator: &E,
    selection: &mut ChaCha8Rng,
) -> Result<StepOutcome> {
    if pop.len() < ctx.config.p1 {
        return Err(Error::input(format!("population of {} is below p1={}", pop.len(), ctx.config.p1)));
    }
    let parent = tournament_select(pop, ctx.config.k, selection)?;
    let parent_id = parent.id;
    let id = pop.next_id;
    let child = spawn(ctx, parent, id, evaluator)?;
    pop.next_id += 1;
    let removed = if pop.len() >= ctx.config.p2 {
        let w = pop.worst_index().expect("non-empty");
        Some(pop.members.remove(w).id)
    } else {
        None
    };
    pop.members.push(child);
    Ok(StepOutcome {
        child_id: id,
        parent_id,
        removed,
    })
}

#[derive(Debug)]
pub struct SearchOutcome {
    pub best: Individual,
    pub population: Population,
    pub log: Vec<LogRow>,
    pub steps: usize,
    /// False when the generation cap stopped the run before the budget.
    pub budget_reached: bool,
}

fn row_for(ind: &Individual, event: EventKind, pop: &Population, start: &Instant) -> LogRow {
    LogRow {
        wallclock_s: start.elapsed().as_secs_f64(),
        event,
        individual_id: ind.id,
        parent_id: ind.parent_id.unwrap_or(0),
        mutation_tag: ind.mutation_tag.expect("children carry a tag"),
        params: ind.params,
        fitness: ind.score(),
        best_fitness: pop.best().map_or(f64::NEG_INFINITY, Individual::score),
        population_size: pop.len(),
    }
}

/// Seeds, then evolves until the best individual reaches the parameter
/// budget or the generation cap. `on_event` sees every log row as it happens.
pub fn run_search<E, F>(ctx: &SearchContext, initial: &Individual, evaluator: &E, mut on_event: F) -> Result<SearchOutcome>
where
    E: FitnessEvaluator + ?Sized,
    F: FnMut(&LogRow) -> Result<()>,
{
    let start = Instant::now();
    let mut pop = seed_population(ctx, initial, evaluator)?;
    let mut log = Vec::new();
    let mut partial = Population::default();
    for ind in &pop.members {
        partial.members.push(ind.without_network());
        let row = row_for(ind, EventKind::Seed, &partial, &start);
        on_event(&row)?;
        log.push(row);
    }
    let mut selection = stream_rng(ctx.config.seed, 0);
    let threshold = ctx.config.budget_threshold();
    let reached = |p: &Population| p.best().is_some_and(|b| b.params as f64 >= threshold);
    let mut steps = 0;
    while !reached(&pop) && steps < ctx.config.max_generations {
        let out = evolve_step(ctx, &mut pop, evaluator, &mut selection)?;
        steps += 1;
        let child = pop.members.last().expect("child appended");
        debug_assert_eq!(child.id, out.child_id);
        let row = row_for(child, EventKind::Evolve, &pop, &start);
        on_event(&row)?;
        log.push(row);
    }
    let budget_reached = reached(&pop);
    Ok(SearchOutcome {
        best: pop.best().expect("p1 >= 1").clone(),
        population: pop,
        log,
        steps,
        budget_reached,
    })
}

impl Individual {
    fn without_network(&self) -> Individual {
        Individual {
            id: self.id,
            parent_id: self.parent_id,
            genotype: self.genotype.clone(),
            schedule: self.schedule.clone(),
            params: self.params,
            mutation_tag: self.mutation_tag,
            network: None,
            fitness: self.fitness,
        }
    }
}

/// Rebuilds every logged individual's schedule from the initial genotype by
/// following parent links and mutation tags, checking each params column.
pub fn replay_schedules(ctx: &SearchContext, initial: &Genotype, log: &[LogRow]) -> Result<Vec<(u64, ChannelSchedule)>> {
    let mut genotypes: HashMap<u64, Genotype> = HashMap::new();
    genotypes.insert(0, initial.clone());
    let mut out = Vec::with_capacity(log.len());
    for row in log {
        let parent = genotypes
            .get(&row.parent_id)
            .ok_or_else(|| Error::Format(format!("row {} names unknown parent {}", row.individual_id, row.parent_id)))?;
        let g = apply_increment(parent, row.mutation_tag, &ctx.growth)?;
        let schedule = g.realize_for(&ctx.spec)?;
        let params = param_count(&ctx.spec, &schedule)?;
        if params != row.params {
            return Err(Error::Format(format!(
                "individual {} replays to {params} params, log says {}",
                row.individual_id, row.params
            )));
        }
        genotypes.insert(row.individual_id, g);
        out.push((row.individual_id, schedule));
    }
    Ok(out)
}
