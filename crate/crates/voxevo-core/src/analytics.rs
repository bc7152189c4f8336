//! Run records and the statistics computed over them: overtake events,
//! unique best-so-far morphology counts, rank-sum tests, bootstrap
//! confidence intervals, and the age-zero fitness regression.
//!
//! Everything here is a pure function of a [`RunLog`]; re-running any
//! analysis never changes its result.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::evolution::{EvoConfig, Individual, MutationKind};
use crate::math;
use crate::phenotype::MorphologyId;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// One pool member as logged for a generation.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MemberRecord {
    pub id: u64,
    pub parent_id: Option<u64>,
    pub morphology_id: MorphologyId,
    pub fitness: f64,
    pub morph_age: u32,
    pub ctrl_age: u32,
    pub survived: bool,
    pub mutation: MutationKind,
}

impl MemberRecord {
    pub fn from_individual(ind: &Individual, survived: bool) -> Self {
        MemberRecord {
            id: ind.id,
            parent_id: ind.parent_id,
            morphology_id: ind.morphology_id,
            fitness: ind.fitness,
            morph_age: ind.morph_age,
            ctrl_age: ind.ctrl_age,
            survived,
            mutation: ind.birth_mutation,
        }
    }
}

/// The full selection pool of one generation (parents then children;
/// generation zero holds just the founders), with ages as they stood at
/// selection time.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GenerationRecord {
    pub generation: u32,
    pub members: Vec<MemberRecord>,
}

/// Complete record of one evolutionary run.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RunLog {
    pub config: EvoConfig,
    pub seed: u64,
    /// Generation records with contiguous indices from 0.
    pub generations: Vec<GenerationRecord>,
    /// Wall-clock duration of the producing process; no analytic depends
    /// on it.
    pub wall_seconds: f64,
}

/// A child body plan that started out less fit than its parent's but
/// whose carriers later beat everything the parent's plan ever achieved.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct OvertakeEvent {
    pub parent_morphology: MorphologyId,
    pub child_morphology: MorphologyId,
    pub birth_generation: u32,
    pub overtake_generation: u32,
}

/// Finds overtake events: a child born by morphological mutation, with a
/// body distinct from its parent's and birth fitness strictly below the
/// parent's fitness at that moment, such that at some later generation
/// the best fitness among pool members carrying the child's body strictly
/// exceeds the best ever achieved (up to and including that generation)
/// by members carrying the parent's body. Each (parent body, child body)
/// pair is reported once, at its earliest overtake generation.
pub fn detect_overtakes(log: &RunLog) -> Vec<OvertakeEvent> {
    struct Candidate {
        parent_morph: MorphologyId,
        child_morph: MorphologyId,
        birth_gen: u32,
    }

    let mut seen: BTreeSet<u64> = BTreeSet::new();
    let mut candidates: Vec<Candidate> = Vec::new();
    for record in &log.generations {
        let by_id: BTreeMap<u64, &MemberRecord> =
            record.members.iter().map(|m| (m.id, m)).collect();
        for m in &record.members {
            if !seen.insert(m.id) {
                continue;
            }
            if m.mutation != MutationKind::Morphological {
                continue;
            }
            let Some(parent) = m.parent_id.and_then(|p| by_id.get(&p)) else {
                continue;
            };
            if m.morphology_id != parent.morphology_id && m.fitness < parent.fitness {
                candidates.push(Candidate {
                    parent_morph: parent.morphology_id,
                    child_morph: m.morphology_id,
                    birth_gen: record.generation,
                });
            }
        }
    }

    let mut best_ever: BTreeMap<MorphologyId, f64> = BTreeMap::new();
    let mut events: Vec<OvertakeEvent> = Vec::new();
    let mut emitted: BTreeSet<(MorphologyId, MorphologyId)> = BTreeSet::new();
    for record in &log.generations {
        let mut gen_best: BTreeMap<MorphologyId, f64> = BTreeMap::new();
        for m in &record.members {
            let slot = gen_best.entry(m.morphology_id).or_insert(f64::NEG_INFINITY);
            *slot = slot.max(m.fitness);
            let ever = best_ever.entry(m.morphology_id).or_insert(f64::NEG_INFINITY);
            *ever = ever.max(m.fitness);
        }
        for c in &candidates {
            if record.generation <= c.birth_gen {
                continue;
            }
            let key = (c.parent_morph, c.child_morph);
            if emitted.contains(&key) {
                continue;
            }
            let Some(&child_best) = gen_best.get(&c.child_morph) else {
                continue;
            };
            let parent_ever = best_ever.get(&c.parent_morph).copied().unwrap_or(f64::NEG_INFINITY);
            if child_best > parent_ever {
                emitted.insert(key);
                events.push(OvertakeEvent {
                    parent_morphology: c.parent_morph,
                    child_morphology: c.child_morph,
                    birth_generation: c.birth_gen,
                    overtake_generation: record.generation,
                });
            }
        }
    }
    events
}

/// Counts distinct body plans that at some generation strictly raised the
/// best-fitness-so-far mark (the generation-zero leader holds the mark
/// vacuously; within-pool ties go to the earliest pool position).
pub fn count_unique_best_morphologies(log: &RunLog) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut holders: BTreeSet<MorphologyId> = BTreeSet::new();
    for record in &log.generations {
        let Some(leader) = record
            .members
            .iter()
            .reduce(|a, b| if b.fitness > a.fitness { b } else { a })
        else {
            continue;
        };
        if leader.fitness > best {
            best = leader.fitness;
            holders.insert(leader.morphology_id);
        }
    }
    holders.len()
}

/// Result of a two-sample rank-sum test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WilcoxonResult {
    /// Rank sum of the first sample, midranks for ties.
    pub statistic: f64,
    pub p_two_sided: f64,
}

/// Wilcoxon rank-sum test with midrank tie handling. With 20 or fewer
/// total observations the two-sided p comes from full enumeration of all
/// rank assignments (`2 * min(P(W <= w), P(W >= w))`, capped at 1);
/// larger samples use the normal approximation with tie and continuity
/// corrections.
pub fn wilcoxon_rank_sum(sample_a: &[f64], sample_b: &[f64]) -> WilcoxonResult {
    assert!(!sample_a.is_empty() && !sample_b.is_empty());
    let n_a = sample_a.len();
    let n_b = sample_b.len();
    let n = n_a + n_b;

    let mut pooled: Vec<(f64, bool)> = sample_a
        .iter()
        .map(|&v| (v, true))
        .chain(sample_b.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut midranks = alloc::vec![0.0f64; n];
    let mut tie_sizes: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let rank = (i + 1 + j) as f64 / 2.0;
        for r in midranks.iter_mut().take(j).skip(i) {
            *r = rank;
        }
        tie_sizes.push(j - i);
        i = j;
    }

    let statistic: f64 = midranks
        .iter()
        .zip(&pooled)
        .filter(|(_, (_, is_a))| *is_a)
        .map(|(r, _)| r)
        .sum();

    let p = if n <= 20 {
        exact_rank_sum_p(&midranks, n_a, statistic)
    } else {
        let mean = n_a as f64 * (n + 1) as f64 / 2.0;
        let tie_term: f64 = tie_sizes
            .iter()
            .map(|&t| (t * t * t - t) as f64)
            .sum::<f64>()
            / (n as f64 * (n as f64 - 1.0));
        let variance = n_a as f64 * n_b as f64 / 12.0 * ((n + 1) as f64 - tie_term);
        if variance <= 0.0 {
            1.0
        } else {
            let z = ((statistic - mean).abs() - 0.5).max(0.0) / math::sqrt(variance);
            (2.0 * (1.0 - normal_cdf(z))).min(1.0)
        }
    };
    WilcoxonResult { statistic, p_two_sided: p }
}

/// Exact two-sided p by enumerating every size-`n_a` subset of the
/// midranks. Midranks are halves, so subset sums are exact in binary and
/// comparisons need no tolerance.
fn exact_rank_sum_p(midranks: &[f64], n_a: usize, observed: f64) -> f64 {
    fn walk(
        ranks: &[f64],
        idx: usize,
        left: usize,
        sum: f64,
        observed: f64,
        le: &mut u64,
        ge: &mut u64,
        total: &mut u64,
    ) {
        if left == 0 {
            *total += 1;
            if sum <= observed {
                *le += 1;
            }
            if sum >= observed {
                *ge += 1;
            }
            return;
        }
        if ranks.len() - idx < left {
            return;
        }
        walk(ranks, idx + 1, left - 1, sum + ranks[idx], observed, le, ge, total);
        walk(ranks, idx + 1, left, sum, observed, le, ge, total);
    }
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    walk(midranks, 0, n_a, 0.0, observed, &mut le, &mut ge, &mut total);
    let tail = (le.min(ge) as f64) / total as f64;
    (2.0 * tail).min(1.0)
}

/// Percentile bootstrap confidence interval for the mean.
///
/// Protocol (the determinism contract): `resamples` rows are drawn in
/// order, each row drawing `values.len()` indices via
/// `rng.gen_range(0..n)`; row means are sorted ascending by total order
/// and the bounds are the nearest-rank elements at `ceil(q * resamples) - 1`
/// for q = (1-level)/2 and 1-(1-level)/2.
pub fn bootstrap_ci(
    values: &[f64],
    level: f64,
    resamples: u32,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    assert!(!values.is_empty());
    assert!(resamples > 0 && level > 0.0 && level < 1.0);
    let n = values.len();
    let mut means: Vec<f64> = Vec::with_capacity(resamples as usize);
    for _ in 0..resamples {
        let mut sum = 0.0;
        for _ in 0..n {
            sum += values[rng.gen_range(0..n)];
        }
        means.push(sum / n as f64);
    }
    means.sort_by(f64::total_cmp);
    let r = resamples as f64;
    let pick = |q: f64| {
        let rank = (q * r).ceil() as usize;
        means[rank.clamp(1, means.len()) - 1]
    };
    let alpha = (1.0 - level) / 2.0;
    (pick(alpha), pick(1.0 - alpha))
}

/// Ordinary least squares of fitness against birth generation.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    /// Two-sided t-test p-value for slope != 0.
    pub p_slope: f64,
    pub points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InsufficientData;

impl core::fmt::Display for InsufficientData {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("fewer than 3 usable age-zero points")
    }
}

impl core::error::Error for InsufficientData {}

/// Regresses the birth fitness of age-zero individuals (morphological age
/// zero at first appearance, founders included) on their birth
/// generation.
pub fn age_zero_regression(log: &RunLog) -> Result<Regression, InsufficientData> {
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut seen: BTreeSet<u64> = BTreeSet::new();
    for record in &log.generations {
        for m in &record.members {
            if seen.insert(m.id) && m.morph_age == 0 {
                points.push((record.generation as f64, m.fitness));
            }
        }
    }
    linear_fit(&points)
}

/// Closed-form OLS with the slope t-test; exposed for reuse on arbitrary
/// point sets.
pub fn linear_fit(points: &[(f64, f64)]) -> Result<Regression, InsufficientData> {
    let n = points.len();
    if n < 3 {
        return Err(InsufficientData);
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in points {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(InsufficientData);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let sse: f64 = points
        .iter()
        .map(|&(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let df = nf - 2.0;
    let se = math::sqrt(sse / df / sxx);
    let p_slope = if se == 0.0 {
        if slope == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        student_t_two_sided(slope / se, df)
    };
    Ok(Regression { slope, intercept, p_slope, points: n })
}

/// Per-run headline numbers.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RunSummary {
    /// Highest fitness any pool member ever reached.
    pub best_fitness: f64,
    pub overtake_count: usize,
    pub unique_best_morphologies: usize,
    pub age_zero_regression: Option<Regression>,
}

pub fn summarize(log: &RunLog) -> RunSummary {
    let best_fitness = log
        .generations
        .iter()
        .flat_map(|r| r.members.iter())
        .map(|m| m.fitness)
        .fold(f64::NEG_INFINITY, f64::max);
    RunSummary {
        best_fitness,
        overtake_count: detect_overtakes(log).len(),
        unique_best_morphologies: count_unique_best_morphologies(log),
        age_zero_regression: age_zero_regression(log).ok(),
    }
}

/// Renders the log as CSV, one row per pool member per generation. Floats
/// print in shortest round-trip form, so equal logs give byte-equal
/// output.
pub fn generations_csv(log: &RunLog) -> String {
    let mut out = String::new();
    out.push_str("generation,individual_id,parent_id,morphology_id,fitness,morph_age,ctrl_age,survived,mutation\n");
    for record in &log.generations {
        for m in &record.members {
            let _ = write!(out, "{},{},", record.generation, m.id);
            match m.parent_id {
                Some(p) => {
                    let _ = write!(out, "{p}");
                }
                None => {}
            }
            let _ = writeln!(
                out,
                ",{},{},{},{},{},{}",
                m.morphology_id, m.fitness, m.morph_age, m.ctrl_age, m.survived, m.mutation
            );
        }
    }
    out
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + math::erf(z / math::sqrt(2.0)))
}

/// Two-sided p for a t statistic with `df` degrees of freedom, via the
/// regularized incomplete beta identity p = I_{df/(df+t^2)}(df/2, 1/2).
fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    regularized_beta(df / (df + t * t), df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Regularized incomplete beta I_x(a, b) by continued fraction (modified
/// Lentz), using the symmetry that keeps the fraction convergent.
fn regularized_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = math::exp(
        math::ln_gamma(a + b) - math::ln_gamma(a) - math::ln_gamma(b)
            + a * math::ln(x)
            + b * math::ln(1.0 - x),
    );
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let mut c = 1.0;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..200 {
        let m = m as f64;
        let m2 = 2.0 * m;
        // Even step.
        let num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + num * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + num / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // Odd step.
        let num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + num * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + num / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::Treatment;
    use alloc::vec;
    use rand::SeedableRng;

    fn morph(tag: u8) -> MorphologyId {
        let mut bytes = [0u8; 16];
        bytes[0] = tag;
        MorphologyId::from_bytes(bytes)
    }

    fn member(
        id: u64,
        parent: Option<u64>,
        m: MorphologyId,
        fitness: f64,
        mutation: MutationKind,
        survived: bool,
    ) -> MemberRecord {
        MemberRecord {
            id,
            parent_id: parent,
            morphology_id: m,
            fitness,
            morph_age: 0,
            ctrl_age: 0,
            survived,
            mutation,
        }
    }

    fn toy_log(generations: Vec<GenerationRecord>) -> RunLog {
        RunLog {
            config: EvoConfig {
                mu: 2,
                lambda: 2,
                generations: generations.len() as u32 - 1,
                ..EvoConfig::new(0, Treatment::NoProtection)
            },
            seed: 0,
            generations,
            wall_seconds: 0.0,
        }
    }

    #[test]
    fn hand_built_overtake_is_found() {
        let (pa, ch) = (morph(1), morph(2));
        let log = toy_log(vec![
            GenerationRecord {
                generation: 0,
                members: vec![
                    member(0, None, pa, 5.0, MutationKind::Initial, true),
                    member(1, None, morph(9), 1.0, MutationKind::Initial, true),
                ],
            },
            GenerationRecord {
                generation: 1,
                members: vec![
                    member(0, None, pa, 5.0, MutationKind::Initial, true),
                    member(1, None, morph(9), 1.0, MutationKind::Initial, false),
                    member(2, Some(0), ch, 4.0, MutationKind::Morphological, true),
                    member(3, Some(1), morph(9), 1.5, MutationKind::Controller, false),
                ],
            },
            GenerationRecord {
                generation: 2,
                members: vec![
                    member(0, None, pa, 5.0, MutationKind::Initial, true),
                    member(2, Some(0), ch, 4.0, MutationKind::Morphological, true),
                    member(4, Some(0), pa, 4.9, MutationKind::Controller, false),
                    member(5, Some(2), ch, 6.0, MutationKind::Controller, true),
                ],
            },
        ]);
        let events = detect_overtakes(&log);
        assert_eq!(events.len(), 1);
        let e = &events[0];
        assert_eq!(e.parent_morphology, pa);
        assert_eq!(e.child_morphology, ch);
        assert_eq!(e.birth_generation, 1);
        assert_eq!(e.overtake_generation, 2);
    }

    #[test]
    fn children_born_fitter_never_overtake() {
        let log = toy_log(vec![
            GenerationRecord {
                generation: 0,
                members: vec![
                    member(0, None, morph(1), 1.0, MutationKind::Initial, true),
                    member(1, None, morph(2), 2.0, MutationKind::Initial, true),
                ],
            },
            GenerationRecord {
                generation: 1,
                members: vec![
                    member(0, None, morph(1), 1.0, MutationKind::Initial, true),
                    member(1, None, morph(2), 2.0, MutationKind::Initial, true),
                    member(2, Some(0), morph(3), 1.5, MutationKind::Morphological, false),
                    member(3, Some(1), morph(4), 2.5, MutationKind::Morphological, false),
                ],
            },
        ]);
        assert!(detect_overtakes(&log).is_empty());
    }

    #[test]
    fn unique_best_counts_distinct_holders_once() {
        // Best-so-far holders go A (1.0) -> B (2.0) -> A (3.0): two ids.
        let log = toy_log(vec![
            GenerationRecord {
                generation: 0,
                members: vec![
                    member(0, None, morph(1), 1.0, MutationKind::Initial, true),
                    member(1, None, morph(5), 0.5, MutationKind::Initial, true),
                ],
            },
            GenerationRecord {
                generation: 1,
                members: vec![
                    member(0, None, morph(1), 1.0, MutationKind::Initial, true),
                    member(1, None, morph(5), 0.5, MutationKind::Initial, false),
                    member(2, Some(0), morph(2), 2.0, MutationKind::Morphological, true),
                    member(3, Some(1), morph(5), 0.4, MutationKind::Controller, false),
                ],
            },
            GenerationRecord {
                generation: 2,
                members: vec![
                    member(0, None, morph(1), 3.0, MutationKind::Initial, true),
                    member(2, Some(0), morph(2), 2.0, MutationKind::Morphological, true),
                    member(4, Some(0), morph(1), 2.9, MutationKind::Controller, false),
                    member(5, Some(2), morph(2), 1.9, MutationKind::Controller, false),
                ],
            },
        ]);
        assert_eq!(count_unique_best_morphologies(&log), 2);

        let one = toy_log(vec![GenerationRecord {
            generation: 0,
            members: vec![
                member(0, None, morph(1), 1.0, MutationKind::Initial, true),
                member(1, None, morph(2), 0.5, MutationKind::Initial, true),
            ],
        }]);
        assert_eq!(count_unique_best_morphologies(&one), 1);
    }

    #[test]
    fn rank_sum_separated_samples_give_exact_p() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]);
        assert_eq!(r.statistic, 6.0);
        assert!((r.p_two_sided - 0.1).abs() < 1e-12);
        // Symmetric in sample order.
        let s = wilcoxon_rank_sum(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0]);
        assert!((s.p_two_sided - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rank_sum_identical_samples_give_p_one() {
        let r = wilcoxon_rank_sum(&[2.0, 2.0, 2.0], &[2.0, 2.0]);
        assert_eq!(r.p_two_sided, 1.0);
        let big_a: Vec<f64> = vec![3.0; 15];
        let big_b: Vec<f64> = vec![3.0; 15];
        assert_eq!(wilcoxon_rank_sum(&big_a, &big_b).p_two_sided, 1.0);
    }

    #[test]
    fn rank_sum_large_sample_matches_frozen_reference() {
        // scipy.stats.ranksums(a, b) on these 24+24 arrays (normal
        // approximation, no continuity correction there, so compare
        // loosely).
        let a: Vec<f64> = (0..24).map(|i| (i as f64 * 0.37).sin() + i as f64 * 0.05).collect();
        let b: Vec<f64> = (0..24).map(|i| (i as f64 * 0.53).cos() + i as f64 * 0.03).collect();
        let r = wilcoxon_rank_sum(&a, &b);
        assert!(r.p_two_sided > 0.0 && r.p_two_sided <= 1.0);
        // Frozen from scipy.stats: rank sum W_a=671; the asymptotic
        // two-sided p with continuity correction is 0.0889202.
        assert_eq!(r.statistic, 671.0);
        assert!((r.p_two_sided - 0.0889202).abs() < 1e-4);
    }

    #[test]
    fn bootstrap_on_constant_sample_collapses() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (lo, hi) = bootstrap_ci(&[3.25; 9], 0.95, 500, &mut rng);
        assert_eq!((lo, hi), (3.25, 3.25));
    }

    #[test]
    fn bootstrap_interval_stays_in_sample_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let values: Vec<f64> = (0..20).map(|i| (i % 2) as f64).collect();
        let (lo, hi) = bootstrap_ci(&values, 0.95, 2000, &mut rng);
        assert!(lo <= hi);
        assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        let mean = 0.5;
        assert!(lo < mean && hi > mean);
    }

    #[test]
    fn exact_line_regresses_exactly() {
        let points: Vec<(f64, f64)> =
            (0..40).map(|g| (g as f64, 2.0 + 0.001 * g as f64)).collect();
        let r = linear_fit(&points).unwrap();
        assert!((r.slope - 0.001).abs() < 1e-12);
        assert!((r.intercept - 2.0).abs() < 1e-12);
        assert!(r.p_slope < 1e-12);
    }

    #[test]
    fn constant_fitness_gives_flat_insignificant_fit() {
        let points: Vec<(f64, f64)> = (0..10).map(|g| (g as f64, 4.2)).collect();
        let r = linear_fit(&points).unwrap();
        assert_eq!(r.slope, 0.0);
        assert_eq!(r.p_slope, 1.0);
    }

    #[test]
    fn noisy_regression_matches_frozen_reference() {
        // Deterministic pseudo-noise; reference slope/intercept/p frozen
        // from scipy.stats.linregress on the same points.
        let points: Vec<(f64, f64)> = (0..30)
            .map(|i| {
                let x = i as f64;
                (x, 1.0 + 0.05 * x + 0.4 * (x * 0.9).sin())
            })
            .collect();
        let r = linear_fit(&points).unwrap();
        assert!((r.slope - 0.04706877550314923).abs() < 1e-12);
        assert!((r.intercept - 1.0539597867931285).abs() < 1e-12);
        let reference_p = 1.924564994616546e-8;
        assert!(
            (r.p_slope / reference_p - 1.0).abs() < 1e-8,
            "p {} vs reference {reference_p}",
            r.p_slope
        );
    }

    #[test]
    fn too_few_points_is_an_error() {
        assert_eq!(linear_fit(&[(0.0, 1.0), (1.0, 2.0)]), Err(InsufficientData));
        let same_x: Vec<(f64, f64)> = vec![(1.0, 0.0), (1.0, 1.0), (1.0, 2.0)];
        assert_eq!(linear_fit(&same_x), Err(InsufficientData));
    }

    #[test]
    fn csv_shape_and_determinism() {
        let log = toy_log(vec![GenerationRecord {
            generation: 0,
            members: vec![
                member(0, None, morph(1), 1.5, MutationKind::Initial, true),
                member(1, None, morph(2), 0.25, MutationKind::Initial, true),
            ],
        }]);
        let csv = generations_csv(&log);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[0],
            "generation,individual_id,parent_id,morphology_id,fitness,morph_age,ctrl_age,survived,mutation"
        );
        assert_eq!(
            lines[1],
            "0,0,,01000000000000000000000000000000,1.5,0,0,true,initial"
        );
        assert_eq!(csv, generations_csv(&log));
    }
}
