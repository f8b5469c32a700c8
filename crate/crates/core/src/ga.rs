//! Bit-string genetic algorithm over [`Genome`]s.
//!
//! A run has two phases. During evolution every generation is evaluated
//! (fitness replaced) and then bred: elites are copied, a few specimens are
//! reinitialized, the rest come from tournament selection, single-point
//! crossover and mutation. During selection the final population is frozen
//! and re-evaluated several times with fitness accumulated; the lowest sum
//! wins. Lower fitness is better throughout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::neuro::{Genome, GENOME_BITS, GENOME_WORDS};
use crate::plant::SafetyAudit;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MutationMode {
    /// With probability p, flip bits at rate 1/1056 until at least one flips.
    #[default]
    PerSpecimen,
    /// Flip every bit independently with probability p.
    PerBit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaConfig {
    pub pop_size: usize,
    pub generations: usize,
    pub selection_generations: usize,
    pub elite_frac: f64,
    pub reinit_frac: f64,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub mutation_mode: MutationMode,
    pub tournament_size: usize,
    pub seed: u64,
    /// Evaluate specimens on the rayon pool.
    pub parallel: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            pop_size: 100,
            generations: 500,
            selection_generations: 20,
            elite_frac: 0.05,
            reinit_frac: 0.05,
            p_crossover: 0.5,
            p_mutation: 0.1,
            mutation_mode: MutationMode::PerSpecimen,
            tournament_size: 2,
            seed: 0,
            parallel: false,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.pop_size < 4 {
            return bad(format!("population size must be at least 4, got {}", self.pop_size));
        }
        for (name, p) in [
            ("elite_frac", self.elite_frac),
            ("reinit_frac", self.reinit_frac),
            ("p_crossover", self.p_crossover),
            ("p_mutation", self.p_mutation),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.elite_frac + self.reinit_frac >= 1.0 {
            return bad("elite_frac + reinit_frac must be below 1".into());
        }
        if self.tournament_size == 0 {
            return bad("tournament size must be positive".into());
        }
        Ok(())
    }

    pub fn elite_count(&self) -> usize {
        (self.elite_frac * self.pop_size as f64).floor() as usize
    }

    pub fn reinit_count(&self) -> usize {
        (self.reinit_frac * self.pop_size as f64).floor() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Specimen {
    pub genome: Genome,
    /// `None` until evaluated.
    pub fitness: Option<f64>,
    /// Whether the last evaluation ended with a switch to SAFE.
    pub switched: bool,
}

impl Specimen {
    pub fn new(genome: Genome) -> Self {
        Self {
            genome,
            fitness: None,
            switched: false,
        }
    }
}

fn fitness_of(population: &[Specimen], index: usize) -> Result<f64> {
    population[index].fitness.ok_or(Error::Unevaluated { index })
}

pub fn random_genome<R: Rng + ?Sized>(rng: &mut R) -> Genome {
    let mut words = [0u32; GENOME_WORDS];
    rng.fill(&mut words[..]);
    Genome::from_words(words)
}

pub fn init_population<R: Rng + ?Sized>(cfg: &GaConfig, rng: &mut R) -> Vec<Specimen> {
    (0..cfg.pop_size).map(|_| Specimen::new(random_genome(rng))).collect()
}

/// Index of the best of `k` uniform draws with replacement; ties go to the earlier draw.
pub fn tournament_select<R: Rng + ?Sized>(population: &[Specimen], k: usize, rng: &mut R) -> Result<usize> {
    if population.is_empty() {
        return Err(Error::InvalidParams("tournament on an empty population".into()));
    }
    let mut best = rng.random_range(0..population.len());
    let mut best_fitness = fitness_of(population, best)?;
    for _ in 1..k {
        let i = rng.random_range(0..population.len());
        let f = fitness_of(population, i)?;
        if f < best_fitness {
            best = i;
            best_fitness = f;
        }
    }
    Ok(best)
}

/// Swaps the suffixes starting at bit `cut`.
pub fn crossover_at(a: &Genome, b: &Genome, cut: usize) -> (Genome, Genome) {
    assert!(cut <= GENOME_BITS, "cut {cut} beyond genome");
    let (mut c, mut d) = (*a, *b);
    let word = cut / 32;
    let offset = cut % 32;
    let (cw, dw) = (c.words_mut(), d.words_mut());
    if offset != 0 {
        // low bits of the word lie after the cut
        let tail = u32::MAX >> offset;
        let (x, y) = (cw[word], dw[word]);
        cw[word] = (x & !tail) | (y & tail);
        dw[word] = (y & !tail) | (x & tail);
    }
    let first_full = word + usize::from(offset != 0);
    for i in first_full..GENOME_WORDS {
        std::mem::swap(&mut cw[i], &mut dw[i]);
    }
    (c, d)
}

/// Single-point crossover with probability `p`, cut uniform in `[1, 1055]`.
pub fn crossover<R: Rng + ?Sized>(a: &Genome, b: &Genome, p: f64, rng: &mut R) -> (Genome, Genome) {
    if rng.random_bool(p) {
        let cut = rng.random_range(1..GENOME_BITS);
        crossover_at(a, b, cut)
    } else {
        (*a, *b)
    }
}

fn flip_each<R: Rng + ?Sized>(genome: &mut Genome, rate: f64, rng: &mut R) -> usize {
    let mut flips = 0;
    for i in 0..GENOME_BITS {
        if rng.random_bool(rate) {
            genome.flip(i);
            flips += 1;
        }
    }
    flips
}

pub fn mutate<R: Rng + ?Sized>(genome: &Genome, p: f64, mode: MutationMode, rng: &mut R) -> Genome {
    let mut g = *genome;
    match mode {
        MutationMode::PerSpecimen => {
            if rng.random_bool(p) {
                let rate = 1.0 / GENOME_BITS as f64;
                loop {
                    let mut trial = *genome;
                    if flip_each(&mut trial, rate, rng) > 0 {
                        g = trial;
                        break;
                    }
                }
            }
        }
        MutationMode::PerBit => {
            flip_each(&mut g, p, rng);
        }
    }
    g
}

/// Expected flips of a fired per-specimen mutation: `1 / (1 − (1 − 1/n)ⁿ)`.
pub fn expected_flips_when_fired() -> f64 {
    let n = GENOME_BITS as f64;
    let q = 1.0 - 1.0 / n;
    1.0 / (1.0 - q.powf(n))
}

/// Indices sorted by fitness (stable, so ties keep population order).
fn ranking(population: &[Specimen]) -> Result<Vec<usize>> {
    let fitness: Vec<f64> = (0..population.len())
        .map(|i| fitness_of(population, i))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
    Ok(order)
}

/// Next generation: elites, then fresh random genomes, then offspring.
pub fn evolve_generation<R: Rng + ?Sized>(
    population: &[Specimen],
    cfg: &GaConfig,
    rng: &mut R,
) -> Result<Vec<Specimen>> {
    let order = ranking(population)?;
    let n = population.len();
    let mut next: Vec<Specimen> = order[..cfg.elite_count().min(n)]
        .iter()
        .map(|&i| population[i].clone())
        .collect();
    for _ in 0..cfg.reinit_count() {
        next.push(Specimen::new(random_genome(rng)));
    }
    while next.len() < n {
        let a = tournament_select(population, cfg.tournament_size, rng)?;
        let b = tournament_select(population, cfg.tournament_size, rng)?;
        let (c, d) = crossover(&population[a].genome, &population[b].genome, cfg.p_crossover, rng);
        next.push(Specimen::new(mutate(&c, cfg.p_mutation, cfg.mutation_mode, rng)));
        if next.len() < n {
            next.push(Specimen::new(mutate(&d, cfg.p_mutation, cfg.mutation_mode, rng)));
        }
    }
    Ok(next)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub switched: bool,
    /// Simulated seconds spent on the episode.
    pub sim_time: f64,
    pub audit: SafetyAudit,
}

/// Runs one episode for a genome. Must depend only on its arguments.
pub trait Evaluator: Sync {
    fn evaluate(&self, genome: &Genome, episode: u64) -> Result<Evaluation>;

    /// True when the episode does not depend on `episode`, which lets
    /// elites keep their fitness instead of being re-run.
    fn deterministic(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub switch_count: usize,
    /// Cumulative simulated seconds.
    pub elapsed_s: f64,
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    pub best: Specimen,
    /// Final population carrying accumulated selection-phase fitness
    /// (or evolution fitness when there is no selection phase).
    pub population: Vec<Specimen>,
    pub history: Vec<GenerationRecord>,
    /// Merged over every episode of the run.
    pub audit: SafetyAudit,
    pub sim_time: f64,
}

struct Run<'a, E: Evaluator + ?Sized> {
    cfg: &'a GaConfig,
    evaluator: &'a E,
    audit: SafetyAudit,
    sim_time: f64,
}

impl<E: Evaluator + ?Sized> Run<'_, E> {
    /// Evaluates the selected specimens; returns their results in index order.
    fn evaluate(&mut self, population: &[Specimen], which: &[usize], pass: usize) -> Result<Vec<(usize, Evaluation)>> {
        let pop = population.len() as u64;
        let job = |&i: &usize| -> Result<(usize, Evaluation)> {
            let episode = pass as u64 * pop + i as u64;
            self.evaluator
                .evaluate(&population[i].genome, episode)
                .map(|e| (i, e))
                .map_err(|source| Error::Evaluation {
                    generation: pass,
                    specimen: i,
                    source: Box::new(source),
                })
        };
        let results: Vec<Result<(usize, Evaluation)>> = if self.cfg.parallel {
            which.par_iter().map(job).collect()
        } else {
            which.iter().map(job).collect()
        };
        let results: Vec<(usize, Evaluation)> = results.into_iter().collect::<Result<_>>()?;
        for (_, e) in &results {
            self.audit.merge(&e.audit);
            self.sim_time += e.sim_time;
        }
        Ok(results)
    }
}

pub fn run_optimization<E: Evaluator + ?Sized>(cfg: &GaConfig, evaluator: &E) -> Result<OptimizationResult> {
    run_optimization_with(cfg, None, evaluator, |_| {})
}

/// Full run. `initial` replaces the random first population when given;
/// `on_generation` sees each evolution record as it is produced.
pub fn run_optimization_with<E: Evaluator + ?Sized>(
    cfg: &GaConfig,
    initial: Option<Vec<Genome>>,
    evaluator: &E,
    mut on_generation: impl FnMut(&GenerationRecord),
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut population = match initial {
        Some(genomes) => {
            if genomes.len() != cfg.pop_size {
                return Err(Error::LengthMismatch(cfg.pop_size, genomes.len()));
            }
            genomes.into_iter().map(Specimen::new).collect()
        }
        None => init_population(cfg, &mut rng),
    };
    let mut run = Run {
        cfg,
        evaluator,
        audit: SafetyAudit::default(),
        sim_time: 0.0,
    };
    let keep_elites = evaluator.deterministic();
    let mut history = Vec::with_capacity(cfg.generations);

    for generation in 0..cfg.generations {
        if generation > 0 {
            population = evolve_generation(&population, cfg, &mut rng)?;
        }
        let pending: Vec<usize> = (0..population.len())
            .filter(|&i| !(keep_elites && population[i].fitness.is_some()))
            .collect();
        for (i, e) in run.evaluate(&population, &pending, generation)? {
            population[i].fitness = Some(e.fitness);
            population[i].switched = e.switched;
        }
        let fitness: Vec<f64> = population.iter().map(|s| s.fitness.unwrap()).collect();
        let record = GenerationRecord {
            generation,
            best_fitness: fitness.iter().copied().fold(f64::INFINITY, f64::min),
            mean_fitness: fitness.iter().sum::<f64>() / fitness.len() as f64,
            switch_count: population.iter().filter(|s| s.switched).count(),
            elapsed_s: run.sim_time,
        };
        on_generation(&record);
        history.push(record);
    }

    if cfg.selection_generations > 0 {
        let all: Vec<usize> = (0..population.len()).collect();
        let mut totals = vec![0.0; population.len()];
        let mut switched = vec![false; population.len()];
        for pass in 0..cfg.selection_generations {
            for (i, e) in run.evaluate(&population, &all, cfg.generations + pass)? {
                totals[i] += e.fitness;
                switched[i] = e.switched;
            }
        }
        for (i, s) in population.iter_mut().enumerate() {
            s.fitness = Some(totals[i]);
            s.switched = switched[i];
        }
    } else if population.iter().any(|s| s.fitness.is_none()) {
        let pending: Vec<usize> = (0..population.len()).collect();
        for (i, e) in run.evaluate(&population, &pending, 0)? {
            population[i].fitness = Some(e.fitness);
            population[i].switched = e.switched;
        }
    }

    let best = population[ranking(&population)?[0]].clone();
    Ok(OptimizationResult {
        best,
        population,
        history,
        audit: run.audit,
        sim_time: run.sim_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn evaluated(fitness: &[f64]) -> Vec<Specimen> {
        fitness
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let mut words = [0u32; GENOME_WORDS];
                words[0] = i as u32;
                Specimen {
                    genome: Genome::from_words(words),
                    fitness: Some(f),
                    switched: false,
                }
            })
            .collect()
    }

    /// Fitness = number of set bits: deterministic and easy to improve.
    struct OnesCount;
    impl Evaluator for OnesCount {
        fn evaluate(&self, genome: &Genome, _: u64) -> Result<Evaluation> {
            let ones: u32 = genome.words().iter().map(|w| w.count_ones()).sum();
            Ok(Evaluation {
                fitness: ones as f64,
                switched: ones > 528,
                sim_time: 1.0,
                audit: SafetyAudit::default(),
            })
        }
        fn deterministic(&self) -> bool {
            true
        }
    }

    /// Depends on the episode index, like a noisy plant.
    struct Noisy;
    impl Evaluator for Noisy {
        fn evaluate(&self, genome: &Genome, episode: u64) -> Result<Evaluation> {
            let ones: u32 = genome.words().iter().map(|w| w.count_ones()).sum();
            Ok(Evaluation {
                fitness: ones as f64 + (episode % 7) as f64,
                sim_time: 0.5,
                ..Evaluation::default()
            })
        }
    }

    struct Failing;
    impl Evaluator for Failing {
        fn evaluate(&self, _: &Genome, episode: u64) -> Result<Evaluation> {
            if episode == 3 {
                Err(Error::Blowup { time: 1.0 })
            } else {
                Ok(Evaluation::default())
            }
        }
    }

    fn small() -> GaConfig {
        GaConfig {
            pop_size: 20,
            generations: 15,
            selection_generations: 3,
            seed: 5,
            ..GaConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig::default().validate().is_ok());
        let bad = [
            GaConfig {
                pop_size: 3,
                ..GaConfig::default()
            },
            GaConfig {
                elite_frac: 0.6,
                reinit_frac: 0.4,
                ..GaConfig::default()
            },
            GaConfig {
                p_crossover: 1.5,
                ..GaConfig::default()
            },
            GaConfig {
                p_mutation: -0.1,
                ..GaConfig::default()
            },
            GaConfig {
                tournament_size: 0,
                ..GaConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn init_population_shape_and_determinism() {
        let cfg = GaConfig::default();
        let a = init_population(&cfg, &mut ChaCha8Rng::seed_from_u64(1));
        let b = init_population(&cfg, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a.len(), 100);
        assert_eq!(a, b);
        assert!(a
            .iter()
            .all(|s| s.fitness.is_none() && s.genome.to_bits().len() == GENOME_BITS));
    }

    #[test]
    fn init_bit_frequency_is_half() {
        let cfg = GaConfig {
            pop_size: 4000,
            ..GaConfig::default()
        };
        let pop = init_population(&cfg, &mut ChaCha8Rng::seed_from_u64(2));
        let n = pop.len() as f64;
        let sigma = (n * 0.25).sqrt();
        for bit in 0..GENOME_BITS {
            let ones = pop.iter().filter(|s| s.genome.bit(bit)).count() as f64;
            assert!((ones - n / 2.0).abs() <= 6.0 * sigma, "bit {bit}: {ones}");
        }
    }

    #[test]
    fn tournament_of_one() {
        let pop = evaluated(&[3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            assert_eq!(tournament_select(&pop, 2, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn tournament_rejects_unevaluated() {
        let mut pop = evaluated(&[1.0, 2.0]);
        pop[1].fitness = None;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let errors = (0..20)
            .filter(|_| tournament_select(&pop, 2, &mut rng).is_err())
            .count();
        assert!(errors > 0);
    }

    #[test]
    fn tournament_win_rate_is_three_quarters() {
        let pop = evaluated(&[1.0, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 40_000;
        let wins = (0..trials)
            .filter(|_| tournament_select(&pop, 2, &mut rng).unwrap() == 0)
            .count() as f64;
        let sigma = (trials as f64 * 0.75 * 0.25).sqrt();
        assert!((wins - 0.75 * trials as f64).abs() < 5.0 * sigma, "{wins}");
    }

    #[test]
    fn tournament_best_of_k_frequency() {
        // the global best of n wins unless all k draws miss it: 1 − (1 − 1/n)^k
        let pop = evaluated(&[5.0, 1.0, 4.0, 3.0, 2.0]);
        let k = 5;
        let exact = 1.0 - (0.8f64).powi(k as i32);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let trials = 40_000;
        let wins = (0..trials)
            .filter(|_| tournament_select(&pop, k, &mut rng).unwrap() == 1)
            .count() as f64;
        let sigma = (trials as f64 * exact * (1.0 - exact)).sqrt();
        assert!((wins - exact * trials as f64).abs() < 5.0 * sigma);
    }

    #[test]
    fn crossover_at_midpoint() {
        let zeros = Genome::default();
        let ones = Genome::from_words([u32::MAX; GENOME_WORDS]);
        let (c, d) = crossover_at(&zeros, &ones, 528);
        for i in 0..GENOME_BITS {
            assert_eq!(c.bit(i), i >= 528);
            assert_eq!(d.bit(i), i < 528);
        }
    }

    #[test]
    fn crossover_off_copies_parents() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_genome(&mut rng);
        let b = random_genome(&mut rng);
        assert_eq!(crossover(&a, &b, 0.0, &mut rng), (a, b));
    }

    #[test]
    fn crossover_preserves_bits_at_every_cut() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_genome(&mut rng);
        let b = random_genome(&mut rng);
        for cut in 0..=GENOME_BITS {
            let (c, d) = crossover_at(&a, &b, cut);
            for i in 0..GENOME_BITS {
                let (x, y) = if i < cut {
                    (a.bit(i), b.bit(i))
                } else {
                    (b.bit(i), a.bit(i))
                };
                assert_eq!((c.bit(i), d.bit(i)), (x, y), "cut {cut} bit {i}");
            }
        }
    }

    #[test]
    fn mutation_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = random_genome(&mut rng);
        assert_eq!(mutate(&g, 0.0, MutationMode::PerSpecimen, &mut rng), g);
        assert_eq!(mutate(&g, 0.0, MutationMode::PerBit, &mut rng), g);
        for _ in 0..200 {
            assert!(mutate(&g, 1.0, MutationMode::PerSpecimen, &mut rng).hamming(&g) >= 1);
        }
        assert_eq!(
            mutate(&g, 1.0, MutationMode::PerBit, &mut rng).hamming(&g),
            GENOME_BITS as u32
        );
    }

    #[test]
    fn mutation_mean_hamming() {
        let e = expected_flips_when_fired();
        assert!((e - 1.5816).abs() < 1e-3, "{e}");
        let p = 0.1;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_genome(&mut rng);
        let trials = 20_000;
        let samples: Vec<f64> = (0..trials)
            .map(|_| mutate(&g, p, MutationMode::PerSpecimen, &mut rng).hamming(&g) as f64)
            .collect();
        let mean = samples.iter().sum::<f64>() / trials as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!((mean - p * e).abs() < 5.0 * se, "mean {mean} vs {}", p * e);
    }

    #[test]
    fn evolve_composition() {
        let cfg = GaConfig::default();
        let fitness: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        let pop = evaluated(&fitness);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let next = evolve_generation(&pop, &cfg, &mut rng).unwrap();
        assert_eq!(next.len(), 100);
        assert_eq!((cfg.elite_count(), cfg.reinit_count()), (5, 5));
        let elites: Vec<f64> = next[..5].iter().map(|s| s.fitness.unwrap()).collect();
        assert_eq!(elites, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(next[5..].iter().all(|s| s.fitness.is_none()));
        let best = pop.iter().find(|s| s.fitness == Some(0.0)).unwrap();
        assert_eq!(next[0].genome, best.genome);
        let again = evolve_generation(&pop, &cfg, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(next, again);
    }

    #[test]
    fn evolve_rejects_unevaluated() {
        let mut pop = evaluated(&[1.0; 10]);
        pop[4].fitness = None;
        let r = evolve_generation(&pop, &GaConfig::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(r, Err(Error::Unevaluated { index: 4 })));
    }

    #[test]
    fn selection_only_picks_argmin() {
        let cfg = GaConfig {
            pop_size: 6,
            generations: 0,
            selection_generations: 1,
            ..GaConfig::default()
        };
        let genomes: Vec<Genome> = [9u32, 3, 7, 1, 8, 5]
            .iter()
            .map(|&n| {
                let mut words = [0u32; GENOME_WORDS];
                words[0] = (1u32 << n) - 1;
                Genome::from_words(words)
            })
            .collect();
        let r = run_optimization_with(&cfg, Some(genomes.clone()), &OnesCount, |_| {}).unwrap();
        assert_eq!(r.best.genome, genomes[3]);
        assert_eq!(r.best.fitness, Some(1.0));
        assert!(r.history.is_empty());
    }

    #[test]
    fn selection_accumulates() {
        let cfg = GaConfig {
            selection_generations: 4,
            ..small()
        };
        let r = run_optimization(&cfg, &OnesCount).unwrap();
        for s in &r.population {
            let single = OnesCount.evaluate(&s.genome, 0).unwrap().fitness;
            assert_eq!(s.fitness, Some(4.0 * single));
        }
    }

    #[test]
    fn best_is_monotone_when_deterministic() {
        let r = run_optimization(&small(), &OnesCount).unwrap();
        assert_eq!(r.history.len(), 15);
        for w in r.history.windows(2) {
            assert!(w[1].best_fitness <= w[0].best_fitness);
        }
        assert!(r.history.last().unwrap().best_fitness < r.history[0].best_fitness);
    }

    #[test]
    fn runs_are_reproducible_and_schedule_independent() {
        let a = run_optimization(&small(), &Noisy).unwrap();
        let b = run_optimization(
            &GaConfig {
                parallel: true,
                ..small()
            },
            &Noisy,
        )
        .unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.history, b.history);
        assert_eq!(a.population, b.population);
        // non-deterministic evaluator: every specimen of every pass is run
        assert_eq!(a.sim_time, 0.5 * 20.0 * (15.0 + 3.0));
    }

    #[test]
    fn evaluator_errors_carry_context() {
        let err = run_optimization(&small(), &Failing).unwrap_err();
        match err {
            Error::Evaluation {
                generation, specimen, ..
            } => assert_eq!((generation, specimen), (0, 3)),
            other => panic!("{other:?}"),
        }
    }
}
