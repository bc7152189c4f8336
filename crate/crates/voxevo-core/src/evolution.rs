//! (mu, lambda) evolution with morphological innovation protection.
//!
//! Each generation every parent spawns one child by mutating exactly one
//! of its two genomes (a coin flip picks morphology or controller). The
//! combined parent+child pool is reduced back to mu survivors by layered
//! Pareto domination on (fitness, age): under [`Treatment::MorphProtection`]
//! the age objective is the number of generations since the last
//! sufficiently large body change, so fresh body plans get breathing room
//! to tune their controllers before established lineages can push them
//! out. [`Treatment::CtrlProtection`] protects controller changes instead
//! (a directional control), and [`Treatment::NoProtection`] selects on
//! fitness alone.
//!
//! Everything downstream of the seed is deterministic: mutation draws
//! happen parent by parent in population order, fitness evaluation
//! consumes no randomness, and survivor selection draws tie-break keys in
//! a documented order.

use alloc::vec::Vec;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;

use crate::analytics::{GenerationRecord, MemberRecord, RunLog};
use crate::cppn::{CppnGenome, GenomeKind};
use crate::phenotype::{
    express_controller, express_morphology, morphological_distance, morphology_id, ControllerMap,
    MorphologyId, VoxelGrid,
};
use crate::physics::{simulate, FitnessResult, SimConfig, SimError};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// How many fresh genome pairs [`init_population`] tries per slot before
/// admitting an empty body at fitness zero.
const INIT_RESAMPLE_ATTEMPTS: u32 = 100;

/// Which genome was mutated at an individual's birth.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MutationKind {
    /// Founding individual, no parent.
    Initial,
    Morphological,
    Controller,
}

impl core::fmt::Display for MutationKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            MutationKind::Initial => "initial",
            MutationKind::Morphological => "morphological",
            MutationKind::Controller => "controller",
        })
    }
}

/// One robot: a morphology/controller genome pair plus the bookkeeping
/// selection runs on.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Individual {
    pub id: u64,
    pub parent_id: Option<u64>,
    pub birth_gen: u32,
    pub morph_genome: CppnGenome,
    pub ctrl_genome: CppnGenome,
    /// Generations since the last qualifying body change.
    pub morph_age: u32,
    /// Generations since the last controller change.
    pub ctrl_age: u32,
    /// Locomotion distance in voxel lengths, evaluated once at birth.
    pub fitness: f64,
    pub morphology_id: MorphologyId,
    pub birth_mutation: MutationKind,
}

/// Survival rule variants.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Treatment {
    /// Fitness-only selection.
    NoProtection,
    /// Domination on (fitness, morph_age); a body change resets the age
    /// only when it moves more than `change_threshold` of the grid's
    /// cells.
    MorphProtection { change_threshold: f64 },
    /// Domination on (fitness, ctrl_age); any controller mutation resets.
    CtrlProtection,
}

impl Treatment {
    /// The age objective this treatment selects on. `NoProtection` does
    /// not select on age; its tie-breaks fall back to morphological age.
    fn selection_age(&self, ind: &Individual) -> u32 {
        match self {
            Treatment::CtrlProtection => ind.ctrl_age,
            _ => ind.morph_age,
        }
    }

    /// Body-change fraction that must be exceeded to reset morphological
    /// age. Only `MorphProtection` carries an explicit threshold; the
    /// others reset on any expressed change.
    fn morph_reset_threshold(&self) -> f64 {
        match self {
            Treatment::MorphProtection { change_threshold } => *change_threshold,
            _ => 0.0,
        }
    }
}

/// Full parameterization of one evolutionary run.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EvoConfig {
    /// Parents kept per generation.
    pub mu: usize,
    /// Children spawned per generation (one per parent).
    pub lambda: usize,
    pub generations: u32,
    /// Probability a child mutates its morphology rather than its
    /// controller.
    pub morph_mutation_prob: f64,
    /// Voxel grid resolution bodies are expressed at.
    pub resolution: (usize, usize, usize),
    pub seed: u64,
    pub treatment: Treatment,
    pub sim: SimConfig,
}

impl EvoConfig {
    pub fn new(seed: u64, treatment: Treatment) -> Self {
        EvoConfig {
            mu: 25,
            lambda: 25,
            generations: 5000,
            morph_mutation_prob: 0.5,
            resolution: (5, 5, 5),
            seed,
            treatment,
            sim: SimConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EvoError {
    /// `select_survivors` was handed a pool that is not parents+children.
    WrongPoolSize { expected: usize, got: usize },
    /// `mu` and `lambda` must match for the one-child-per-parent pairing.
    MuLambdaMismatch { mu: usize, lambda: usize },
    Sim(SimError),
}

impl core::fmt::Display for EvoError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EvoError::WrongPoolSize { expected, got } => {
                write!(f, "selection pool has {got} individuals, expected {expected}")
            }
            EvoError::MuLambdaMismatch { mu, lambda } => {
                write!(f, "mu {mu} and lambda {lambda} must be equal")
            }
            EvoError::Sim(e) => write!(f, "simulation: {e}"),
        }
    }
}

impl core::error::Error for EvoError {}

impl From<SimError> for EvoError {
    fn from(e: SimError) -> Self {
        EvoError::Sim(e)
    }
}

/// One expressed body/controller pair awaiting evaluation.
pub struct EvalJob {
    pub grid: VoxelGrid,
    pub controller: ControllerMap,
}

/// Fitness backend. Evaluations are pure functions of the job, so
/// implementations may batch, parallelize, or cache them, as long as
/// results come back in job order.
pub trait FitnessEvaluator {
    fn evaluate_batch(&mut self, jobs: &[EvalJob]) -> Result<Vec<FitnessResult>, SimError>;
}

/// Straightforward sequential evaluator running the physics for every
/// job.
pub struct SimulationEvaluator {
    pub config: SimConfig,
}

impl FitnessEvaluator for SimulationEvaluator {
    fn evaluate_batch(&mut self, jobs: &[EvalJob]) -> Result<Vec<FitnessResult>, SimError> {
        jobs.iter()
            .map(|job| simulate(&job.grid, &job.controller, &self.config))
            .collect()
    }
}

fn express_job(
    morph: &CppnGenome,
    ctrl: &CppnGenome,
    resolution: (usize, usize, usize),
) -> (VoxelGrid, ControllerMap, MorphologyId) {
    let grid = express_morphology(morph, resolution).expect("morphology genome stays valid");
    let controller = express_controller(ctrl, &grid).expect("controller genome stays valid");
    let id = morphology_id(&grid);
    (grid, controller, id)
}

/// Draws mu founding individuals, evaluating each one. Empty bodies are
/// redrawn up to 100 times and finally admitted at fitness zero.
pub fn init_population(
    config: &EvoConfig,
    rng: &mut ChaCha8Rng,
    evaluator: &mut dyn FitnessEvaluator,
) -> Result<Vec<Individual>, EvoError> {
    let mut population = Vec::with_capacity(config.mu);
    let mut jobs: Vec<EvalJob> = Vec::with_capacity(config.mu);
    let mut viable: Vec<bool> = Vec::with_capacity(config.mu);
    for id in 0..config.mu as u64 {
        let mut attempt = 0;
        let (morph, ctrl, grid, controller, morphology) = loop {
            let morph = CppnGenome::random_minimal(GenomeKind::Morphology, rng);
            let ctrl = CppnGenome::random_minimal(GenomeKind::Controller, rng);
            let (grid, controller, morphology) = express_job(&morph, &ctrl, config.resolution);
            attempt += 1;
            if grid.present_count() > 0 || attempt >= INIT_RESAMPLE_ATTEMPTS {
                break (morph, ctrl, grid, controller, morphology);
            }
        };
        viable.push(grid.present_count() > 0);
        jobs.push(EvalJob { grid, controller });
        population.push(Individual {
            id,
            parent_id: None,
            birth_gen: 0,
            morph_genome: morph,
            ctrl_genome: ctrl,
            morph_age: 0,
            ctrl_age: 0,
            fitness: 0.0,
            morphology_id: morphology,
            birth_mutation: MutationKind::Initial,
        });
    }
    let results = evaluator.evaluate_batch(&jobs)?;
    for ((ind, result), viable) in population.iter_mut().zip(results).zip(viable) {
        ind.fitness = if viable { result.distance_voxels } else { 0.0 };
    }
    Ok(population)
}

/// Everything about a child except its fitness: phase one of spawning,
/// which consumes randomness; evaluation happens afterwards.
struct ChildDraft {
    individual: Individual,
    job: EvalJob,
}

fn draft_child(
    parent: &Individual,
    id: u64,
    birth_gen: u32,
    config: &EvoConfig,
    rng: &mut ChaCha8Rng,
) -> ChildDraft {
    let mutate_morph = rng.gen_bool(config.morph_mutation_prob);
    let (morph_genome, ctrl_genome, kind) = if mutate_morph {
        (parent.morph_genome.mutate(rng), parent.ctrl_genome.clone(), MutationKind::Morphological)
    } else {
        (parent.morph_genome.clone(), parent.ctrl_genome.mutate(rng), MutationKind::Controller)
    };

    let (grid, controller, morphology) = express_job(&morph_genome, &ctrl_genome, config.resolution);

    let changed = if kind == MutationKind::Morphological {
        let parent_grid = express_morphology(&parent.morph_genome, config.resolution)
            .expect("parent genome stays valid");
        morphological_distance(&parent_grid, &grid).expect("resolutions match within one run")
    } else {
        0.0
    };
    let (morph_age, ctrl_age) =
        inherited_ages(parent.morph_age, parent.ctrl_age, kind, changed, &config.treatment);

    ChildDraft {
        individual: Individual {
            id,
            parent_id: Some(parent.id),
            birth_gen,
            morph_genome,
            ctrl_genome,
            morph_age,
            ctrl_age,
            fitness: 0.0,
            morphology_id: morphology,
            birth_mutation: kind,
        },
        job: EvalJob { grid, controller },
    }
}

/// Ages a child starts with. The morphological age resets to zero only
/// when the mutation was morphological and changed strictly more of the
/// expressed grid than the treatment's threshold; the controller age
/// resets on any controller mutation. Both ages are maintained under
/// every treatment (selection just ignores the irrelevant one).
pub fn inherited_ages(
    parent_morph_age: u32,
    parent_ctrl_age: u32,
    kind: MutationKind,
    changed_fraction: f64,
    treatment: &Treatment,
) -> (u32, u32) {
    let morph_age = if kind == MutationKind::Morphological
        && changed_fraction > treatment.morph_reset_threshold()
    {
        0
    } else {
        parent_morph_age
    };
    let ctrl_age = if kind == MutationKind::Controller { 0 } else { parent_ctrl_age };
    (morph_age, ctrl_age)
}

/// Mutates one genome of `parent` into an evaluated child. Age rules:
/// morphological age resets when the expressed body changed by more than
/// the treatment's threshold, controller age resets on any controller
/// mutation.
pub fn spawn_child(
    parent: &Individual,
    id: u64,
    birth_gen: u32,
    config: &EvoConfig,
    rng: &mut ChaCha8Rng,
    evaluator: &mut dyn FitnessEvaluator,
) -> Result<Individual, EvoError> {
    let draft = draft_child(parent, id, birth_gen, config, rng);
    let results = evaluator.evaluate_batch(core::slice::from_ref(&draft.job))?;
    let mut child = draft.individual;
    child.fitness = results[0].distance_voxels;
    Ok(child)
}

/// Pareto domination under a treatment's objectives: protection
/// treatments require no-worse fitness and no-older age with at least one
/// strict, `NoProtection` is strictly-greater fitness.
pub fn dominates(a: &Individual, b: &Individual, treatment: &Treatment) -> bool {
    match treatment {
        Treatment::NoProtection => a.fitness > b.fitness,
        Treatment::MorphProtection { .. } => {
            a.fitness >= b.fitness
                && a.morph_age <= b.morph_age
                && (a.fitness > b.fitness || a.morph_age < b.morph_age)
        }
        Treatment::CtrlProtection => {
            a.fitness >= b.fitness
                && a.ctrl_age <= b.ctrl_age
                && (a.fitness > b.fitness || a.ctrl_age < b.ctrl_age)
        }
    }
}

/// Reduces a parents+children pool to `mu` survivors by layered
/// non-dominated sorting, then bumps every survivor's ages by one.
///
/// The partially admitted layer is ordered by descending fitness, ties by
/// ascending selection age, remaining ties by uniform random keys; the
/// keys are drawn from `rng` for that layer's members in pool order, one
/// `next_u64` each (the draw order is part of the determinism contract).
/// Survivors are returned in pool order.
pub fn select_survivors(
    pool: &[Individual],
    mu: usize,
    treatment: &Treatment,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Individual>, EvoError> {
    if pool.len() != 2 * mu {
        return Err(EvoError::WrongPoolSize { expected: 2 * mu, got: pool.len() });
    }

    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    let mut chosen: Vec<usize> = Vec::with_capacity(mu);
    while chosen.len() < mu {
        let layer: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| {
                !remaining.iter().any(|&j| j != i && dominates(&pool[j], &pool[i], treatment))
            })
            .collect();
        debug_assert!(!layer.is_empty(), "a strict partial order has minimal elements");
        if chosen.len() + layer.len() <= mu {
            chosen.extend_from_slice(&layer);
        } else {
            // Truncate: fitness desc, selection age asc, then random key
            // (drawn in pool order).
            let mut keyed: Vec<(usize, u64)> =
                layer.iter().map(|&i| (i, rng.next_u64())).collect();
            keyed.sort_by(|&(i, ki), &(j, kj)| {
                pool[j]
                    .fitness
                    .total_cmp(&pool[i].fitness)
                    .then_with(|| {
                        treatment.selection_age(&pool[i]).cmp(&treatment.selection_age(&pool[j]))
                    })
                    .then_with(|| ki.cmp(&kj))
            });
            chosen.extend(keyed.iter().take(mu - chosen.len()).map(|&(i, _)| i));
        }
        remaining.retain(|i| !chosen.contains(i));
    }

    chosen.sort_unstable();
    Ok(chosen
        .into_iter()
        .map(|i| {
            let mut ind = pool[i].clone();
            ind.morph_age += 1;
            ind.ctrl_age += 1;
            ind
        })
        .collect())
}

/// One in-progress evolutionary run: population, id counter, and the rng
/// stream, everything needed to checkpoint and resume.
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RunState {
    pub config: EvoConfig,
    pub rng: ChaCha8Rng,
    pub population: Vec<Individual>,
    pub next_id: u64,
    pub generation: u32,
}

/// Drives a run generation by generation against a pluggable evaluator.
pub struct Run<'a> {
    state: RunState,
    evaluator: &'a mut dyn FitnessEvaluator,
}

impl<'a> Run<'a> {
    /// Seeds the rng, draws and evaluates the founding population.
    pub fn new(config: EvoConfig, evaluator: &'a mut dyn FitnessEvaluator) -> Result<Self, EvoError> {
        if config.mu != config.lambda {
            return Err(EvoError::MuLambdaMismatch { mu: config.mu, lambda: config.lambda });
        }
        let mut rng = rand::SeedableRng::seed_from_u64(config.seed);
        let population = init_population(&config, &mut rng, evaluator)?;
        let next_id = population.len() as u64;
        Ok(Run {
            state: RunState { config, rng, population, next_id, generation: 0 },
            evaluator,
        })
    }

    /// Resumes from a checkpointed state.
    pub fn resume(state: RunState, evaluator: &'a mut dyn FitnessEvaluator) -> Self {
        Run { state, evaluator }
    }

    pub fn state(&self) -> &RunState {
        &self.state
    }

    pub fn into_state(self) -> RunState {
        self.state
    }

    pub fn generation(&self) -> u32 {
        self.state.generation
    }

    pub fn population(&self) -> &[Individual] {
        &self.state.population
    }

    pub fn config(&self) -> &EvoConfig {
        &self.state.config
    }

    /// The founding population as a generation-zero record (pool = the mu
    /// founders, all survivors).
    pub fn initial_record(&self) -> GenerationRecord {
        GenerationRecord {
            generation: 0,
            members: self
                .state
                .population
                .iter()
                .map(|ind| MemberRecord::from_individual(ind, true))
                .collect(),
        }
    }

    /// Advances one generation: spawn one child per parent, evaluate the
    /// children, select survivors from the combined pool. Returns the
    /// pool record (parents first, then children in parent order) with
    /// ages as they stood at selection time.
    pub fn step(&mut self) -> Result<GenerationRecord, EvoError> {
        let config = self.state.config.clone();
        let gen = self.state.generation + 1;

        let mut drafts: Vec<ChildDraft> = Vec::with_capacity(config.lambda);
        for pi in 0..config.mu {
            let id = self.state.next_id;
            self.state.next_id += 1;
            let parent = &self.state.population[pi];
            drafts.push(draft_child(parent, id, gen, &config, &mut self.state.rng));
        }

        let jobs: Vec<EvalJob> = drafts.iter().map(|d| EvalJob {
            grid: d.job.grid.clone(),
            controller: d.job.controller.clone(),
        }).collect();
        let results = self.evaluator.evaluate_batch(&jobs)?;

        let mut pool = self.state.population.clone();
        for (draft, result) in drafts.into_iter().zip(results) {
            let mut child = draft.individual;
            child.fitness = result.distance_voxels;
            pool.push(child);
        }

        let survivors =
            select_survivors(&pool, config.mu, &config.treatment, &mut self.state.rng)?;
        let survivor_ids: Vec<u64> = survivors.iter().map(|s| s.id).collect();
        let record = GenerationRecord {
            generation: gen,
            members: pool
                .iter()
                .map(|ind| MemberRecord::from_individual(ind, survivor_ids.contains(&ind.id)))
                .collect(),
        };

        self.state.population = survivors;
        self.state.generation = gen;
        Ok(record)
    }
}

/// Runs a full experiment and collects every generation record,
/// forwarding each to `hook` as it completes.
pub fn evolve(
    config: EvoConfig,
    evaluator: &mut dyn FitnessEvaluator,
    mut hook: impl FnMut(&GenerationRecord),
) -> Result<RunLog, EvoError> {
    let mut run = Run::new(config.clone(), evaluator)?;
    let mut records = Vec::with_capacity(config.generations as usize + 1);
    let first = run.initial_record();
    hook(&first);
    records.push(first);
    for _ in 0..config.generations {
        let record = run.step()?;
        hook(&record);
        records.push(record);
    }
    Ok(RunLog { config, seed: run.state.config.seed, generations: records, wall_seconds: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;

    /// Fitness stub: hash of the morphology digest, cheap and
    /// deterministic but otherwise arbitrary.
    pub(crate) struct DigestEvaluator;

    impl FitnessEvaluator for DigestEvaluator {
        fn evaluate_batch(&mut self, jobs: &[EvalJob]) -> Result<Vec<FitnessResult>, SimError> {
            Ok(jobs
                .iter()
                .map(|job| {
                    let d = crate::phenotype::morphology_id(&job.grid);
                    let fitness = d.as_bytes()[0] as f64 / 16.0;
                    FitnessResult {
                        distance_voxels: if job.grid.present_count() == 0 { 0.0 } else { fitness },
                        sim_time: 0.0,
                        diverged: false,
                    }
                })
                .collect())
        }
    }

    fn test_config(seed: u64, treatment: Treatment) -> EvoConfig {
        EvoConfig {
            generations: 12,
            resolution: (4, 4, 4),
            ..EvoConfig::new(seed, treatment)
        }
    }

    fn bare_individual(fitness: f64, morph_age: u32, ctrl_age: u32, id: u64) -> Individual {
        let mut rng = ChaCha8Rng::seed_from_u64(id);
        Individual {
            id,
            parent_id: None,
            birth_gen: 0,
            morph_genome: CppnGenome::random_minimal(GenomeKind::Morphology, &mut rng),
            ctrl_genome: CppnGenome::random_minimal(GenomeKind::Controller, &mut rng),
            morph_age,
            ctrl_age,
            fitness,
            morphology_id: MorphologyId::from_hex("00000000000000000000000000000000").unwrap(),
            birth_mutation: MutationKind::Initial,
        }
    }

    #[test]
    fn dominance_examples() {
        let t = Treatment::MorphProtection { change_threshold: 0.0 };
        let a = bare_individual(10.0, 2, 0, 0);
        let b = bare_individual(5.0, 3, 0, 1);
        assert!(dominates(&a, &b, &t));
        assert!(!dominates(&b, &a, &t));

        let c = bare_individual(10.0, 5, 0, 2);
        let d = bare_individual(12.0, 1, 0, 3);
        assert!(!dominates(&c, &d, &t));
        assert!(dominates(&d, &c, &t));

        let e = bare_individual(7.0, 4, 0, 4);
        let f = bare_individual(7.0, 4, 0, 5);
        assert!(!dominates(&e, &f, &t));
        assert!(!dominates(&f, &e, &t));
    }

    #[test]
    fn no_protection_reduces_to_fitness_truncation() {
        let mu = 5;
        let mut pool: Vec<Individual> = (0..2 * mu)
            .map(|i| bare_individual(i as f64 * 0.5, (i % 3) as u32, 0, i as u64))
            .collect();
        pool.reverse();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let survivors =
            select_survivors(&pool, mu, &Treatment::NoProtection, &mut rng).unwrap();
        let mut fits: Vec<f64> = survivors.iter().map(|s| s.fitness).collect();
        fits.sort_by(f64::total_cmp);
        assert_eq!(fits, vec![2.5, 3.0, 3.5, 4.0, 4.5]);
    }

    #[test]
    fn survivor_ages_increment_by_one() {
        let mu = 3;
        let pool: Vec<Individual> = (0..2 * mu)
            .map(|i| bare_individual(i as f64, 7, 2, i as u64))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let survivors =
            select_survivors(&pool, mu, &Treatment::NoProtection, &mut rng).unwrap();
        for s in &survivors {
            assert_eq!(s.morph_age, 8);
            assert_eq!(s.ctrl_age, 3);
        }
    }

    #[test]
    fn wrong_pool_size_is_an_error() {
        let pool: Vec<Individual> = (0..7).map(|i| bare_individual(1.0, 0, 0, i)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        match select_survivors(&pool, 4, &Treatment::NoProtection, &mut rng) {
            Err(EvoError::WrongPoolSize { expected: 8, got: 7 }) => {}
            other => panic!("expected pool size error, got {other:?}"),
        }
    }

    #[test]
    fn single_dominator_always_survives() {
        let mu = 4;
        let mut pool: Vec<Individual> = (0..2 * mu)
            .map(|i| bare_individual(1.0, 5, 5, i as u64))
            .collect();
        pool[3].fitness = 50.0;
        pool[3].morph_age = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let survivors = select_survivors(
            &pool,
            mu,
            &Treatment::MorphProtection { change_threshold: 0.0 },
            &mut rng,
        )
        .unwrap();
        assert!(survivors.iter().any(|s| s.id == 3));
    }

    #[test]
    fn init_population_is_deterministic_and_aged_zero() {
        let config = test_config(42, Treatment::NoProtection);
        let mut rng1 = ChaCha8Rng::seed_from_u64(config.seed);
        let mut rng2 = ChaCha8Rng::seed_from_u64(config.seed);
        let a = init_population(&config, &mut rng1, &mut DigestEvaluator).unwrap();
        let b = init_population(&config, &mut rng2, &mut DigestEvaluator).unwrap();
        assert_eq!(a.len(), 25);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.id, y.id);
            assert_eq!(x.fitness, y.fitness);
            assert_eq!(x.morphology_id, y.morphology_id);
            assert_eq!((x.morph_age, x.ctrl_age), (0, 0));
            assert_eq!(x.birth_mutation, MutationKind::Initial);
        }
    }

    #[test]
    fn controller_mutation_keeps_morph_age() {
        let config = EvoConfig {
            morph_mutation_prob: 0.0,
            ..test_config(7, Treatment::MorphProtection { change_threshold: 0.2 })
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut parent = bare_individual(1.0, 6, 4, 0);
        parent.morphology_id = {
            let grid = express_morphology(&parent.morph_genome, config.resolution).unwrap();
            crate::phenotype::morphology_id(&grid)
        };
        let child =
            spawn_child(&parent, 100, 1, &config, &mut rng, &mut DigestEvaluator).unwrap();
        assert_eq!(child.birth_mutation, MutationKind::Controller);
        assert_eq!(child.morph_age, 6);
        assert_eq!(child.ctrl_age, 0);
        assert_eq!(child.morph_genome, parent.morph_genome);
        assert_eq!(child.parent_id, Some(0));
    }

    #[test]
    fn generation_zero_log_has_only_founders() {
        let config = EvoConfig { generations: 0, ..test_config(5, Treatment::NoProtection) };
        let log = evolve(config, &mut DigestEvaluator, |_| {}).unwrap();
        assert_eq!(log.generations.len(), 1);
        assert_eq!(log.generations[0].members.len(), 25);
        assert!(log.generations[0].members.iter().all(|m| m.survived));
    }

    #[test]
    fn best_so_far_is_non_decreasing() {
        for treatment in [
            Treatment::NoProtection,
            Treatment::MorphProtection { change_threshold: 0.0 },
            Treatment::CtrlProtection,
        ] {
            let config = test_config(11, treatment);
            let log = evolve(config, &mut DigestEvaluator, |_| {}).unwrap();
            let mut best = f64::NEG_INFINITY;
            for record in &log.generations {
                let gen_best = record
                    .members
                    .iter()
                    .filter(|m| m.survived)
                    .map(|m| m.fitness)
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(gen_best >= best, "best dropped under {treatment:?}");
                best = best.max(gen_best);
            }
        }
    }

    #[test]
    fn evolve_is_deterministic() {
        let config = test_config(99, Treatment::MorphProtection { change_threshold: 0.0 });
        let a = evolve(config.clone(), &mut DigestEvaluator, |_| {}).unwrap();
        let b = evolve(config, &mut DigestEvaluator, |_| {}).unwrap();
        assert_eq!(a.generations.len(), b.generations.len());
        for (ra, rb) in a.generations.iter().zip(&b.generations) {
            assert_eq!(ra.generation, rb.generation);
            for (ma, mb) in ra.members.iter().zip(&rb.members) {
                assert_eq!(ma.id, mb.id);
                assert_eq!(ma.fitness.to_bits(), mb.fitness.to_bits());
                assert_eq!(ma.survived, mb.survived);
                assert_eq!(ma.morphology_id, mb.morphology_id);
            }
        }
    }

    #[test]
    fn pool_records_have_expected_shape() {
        let config = test_config(13, Treatment::CtrlProtection);
        let log = evolve(config, &mut DigestEvaluator, |_| {}).unwrap();
        assert_eq!(log.generations.len(), 13);
        for (g, record) in log.generations.iter().enumerate() {
            assert_eq!(record.generation, g as u32);
            if g == 0 {
                assert_eq!(record.members.len(), 25);
            } else {
                assert_eq!(record.members.len(), 50);
            }
            let survivors = record.members.iter().filter(|m| m.survived).count();
            assert_eq!(survivors, 25);
        }
    }
}
