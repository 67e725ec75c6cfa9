//! Non-dominated sorting, crowding distance, crowded-comparison selection and
//! the variation operators. All objectives are minimized.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;

use super::genome::{random_dropout, random_kind, random_units, Genome, SLOTS};
use crate::error::{Error, Result};

/// Validation RMSE, parameter count and depth; all minimized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objectives {
    pub val_rmse: f64,
    pub param_count: usize,
    pub depth: usize,
}

impl Objectives {
    pub fn vector(&self) -> [f64; 3] {
        [self.val_rmse, self.param_count as f64, self.depth as f64]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Genome,
    pub objectives: Objectives,
    pub rank: usize,
    pub crowding: f64,
}

impl Individual {
    pub fn new(genome: Genome, objectives: Objectives) -> Self {
        Self { genome, objectives, rank: 0, crowding: 0.0 }
    }
}

/// `a` is no worse everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Fronts of point indices, best first.
pub fn fast_non_dominated_sort<const M: usize>(points: &[[f64; M]]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for p in 0..n {
        for q in p + 1..n {
            if dominates(&points[p], &points[q]) {
                dominated_by_me[p].push(q);
                domination_count[q] += 1;
            } else if dominates(&points[q], &points[p]) {
                dominated_by_me[q].push(p);
                domination_count[p] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated_by_me[p] {
                domination_count[q] -= 1;
                if domination_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Rank of every point (index of its front).
pub fn ranks<const M: usize>(points: &[[f64; M]]) -> Vec<usize> {
    let mut out = vec![0; points.len()];
    for (r, front) in fast_non_dominated_sort(points).iter().enumerate() {
        for &i in front {
            out[i] = r;
        }
    }
    out
}

/// Crowding distance of each member of `front` (aligned with `front`).
/// Per-objective extremes get +∞; zero-range objectives add nothing.
pub fn crowding_distance<const M: usize>(points: &[[f64; M]], front: &[usize]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    for m in 0..M {
        order.sort_by(|&a, &b| points[front[a]][m].total_cmp(&points[front[b]][m]));
        let lo = points[front[order[0]]][m];
        let hi = points[front[order[n - 1]]][m];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for k in 1..n - 1 {
            let gap = points[front[order[k + 1]]][m] - points[front[order[k - 1]]][m];
            dist[order[k]] += gap / range;
        }
    }
    dist
}

/// Recomputes rank and crowding for the whole population in place.
pub fn assign_rank_and_crowding(pop: &mut [Individual]) {
    let points: Vec<[f64; 3]> = pop.iter().map(|i| i.objectives.vector()).collect();
    for (r, front) in fast_non_dominated_sort(&points).iter().enumerate() {
        let d = crowding_distance(&points, front);
        for (k, &i) in front.iter().enumerate() {
            pop[i].rank = r;
            pop[i].crowding = d[k];
        }
    }
}

/// `Less` means `a` is preferred: lower rank, then larger crowding.
pub fn crowded_cmp(a: &Individual, b: &Individual) -> Ordering {
    a.rank.cmp(&b.rank).then_with(|| b.crowding.total_cmp(&a.crowding))
}

/// Elitist truncation: whole fronts while they fit, then the least crowded
/// members of the splitting front. Repeated genomes are only kept when there
/// are too few distinct ones. Rank and crowding are reassigned on the
/// survivors.
pub fn select_survivors(combined: Vec<Individual>, n: usize) -> Vec<Individual> {
    let mut unique: Vec<Individual> = Vec::with_capacity(combined.len());
    let mut repeats = Vec::new();
    for ind in combined {
        if unique.iter().any(|u| u.genome == ind.genome) {
            repeats.push(ind);
        } else {
            unique.push(ind);
        }
    }
    let mut combined = unique;
    if combined.len() < n {
        combined.extend(repeats.into_iter().take(n - combined.len()));
    }
    assign_rank_and_crowding(&mut combined);
    let mut idx: Vec<usize> = (0..combined.len()).collect();
    idx.sort_by(|&a, &b| crowded_cmp(&combined[a], &combined[b]).then(a.cmp(&b)));
    idx.truncate(n);
    idx.sort_unstable();
    let mut out: Vec<Individual> = idx.into_iter().map(|i| combined[i].clone()).collect();
    assign_rank_and_crowding(&mut out);
    out
}

fn tournament<'a, R: Rng + ?Sized>(pop: &'a [Individual], rng: &mut R) -> &'a Individual {
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    match crowded_cmp(a, b) {
        Ordering::Less => a,
        Ordering::Greater => b,
        Ordering::Equal => {
            if rng.random_bool(0.5) {
                a
            } else {
                b
            }
        }
    }
}

fn mutate<R: Rng + ?Sized>(g: &mut Genome, prob: f64, rng: &mut R) {
    for (i, slot) in g.slots.iter_mut().enumerate() {
        if rng.random_bool(prob) {
            slot.kind = random_kind(rng, i > 0);
        }
        if rng.random_bool(prob) {
            slot.units_code = random_units(rng);
        }
        if rng.random_bool(prob) {
            slot.dropout_code = random_dropout(rng);
        }
    }
}

/// Binary tournaments, uniform per-slot crossover, per-field mutation, repair.
/// Returns as many children as there are parents.
pub fn make_offspring<R: Rng + ?Sized>(
    parents: &[Individual],
    rng: &mut R,
    crossover_prob: f64,
    mutation_prob: f64,
) -> Result<Vec<Genome>> {
    if parents.is_empty() || parents.len() % 2 != 0 {
        return Err(Error::precondition("parent population must be nonempty and even"));
    }
    if !(0.0..=1.0).contains(&crossover_prob) || !(0.0..=1.0).contains(&mutation_prob) {
        return Err(Error::precondition("operator probabilities must lie in [0, 1]"));
    }
    let mut out = Vec::with_capacity(parents.len());
    while out.len() < parents.len() {
        let mut a = tournament(parents, rng).genome;
        let mut b = tournament(parents, rng).genome;
        if rng.random_bool(crossover_prob) {
            for i in 0..SLOTS {
                if rng.random_bool(0.5) {
                    core::mem::swap(&mut a.slots[i], &mut b.slots[i]);
                }
            }
        }
        mutate(&mut a, mutation_prob, rng);
        mutate(&mut b, mutation_prob, rng);
        out.push(a.repair());
        out.push(b.repair());
    }
    Ok(out)
}

/// Rank-0 members, one per distinct genome, sorted by validation RMSE.
pub fn pareto_front(pop: &[Individual]) -> Vec<Individual> {
    let points: Vec<[f64; 3]> = pop.iter().map(|i| i.objectives.vector()).collect();
    let Some(first) = fast_non_dominated_sort(&points).into_iter().next() else {
        return Vec::new();
    };
    let mut front: Vec<Individual> = Vec::with_capacity(first.len());
    for i in first {
        if !front.iter().any(|m| m.genome == pop[i].genome) {
            let mut ind = pop[i].clone();
            ind.rank = 0;
            front.push(ind);
        }
    }
    front.sort_by(|a, b| {
        a.objectives
            .val_rmse
            .total_cmp(&b.objectives.val_rmse)
            .then(a.objectives.param_count.cmp(&b.objectives.param_count))
            .then(a.genome.cmp(&b.genome))
    });
    front
}

/// Indices into a front of its most accurate member, its smallest member, and
/// the knee: closest to the ideal point after normalizing RMSE and
/// log-parameters to [0, 1] over the front.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Representatives {
    pub accuracy: usize,
    pub balanced: usize,
    pub efficiency: usize,
}

pub fn representatives(front: &[Individual]) -> Option<Representatives> {
    if front.is_empty() {
        return None;
    }
    let rmse: Vec<f64> = front.iter().map(|i| i.objectives.val_rmse).collect();
    let logp: Vec<f64> = front.iter().map(|i| libm::log10(i.objectives.param_count.max(1) as f64)).collect();
    let argmin = |v: &[f64], tie: &[f64]| {
        (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b]).then(tie[a].total_cmp(&tie[b]))).unwrap_or(0)
    };
    let norm = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        v.iter().map(|x| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 }).collect::<Vec<_>>()
    };
    let (nr, np) = (norm(&rmse), norm(&logp));
    let dist: Vec<f64> = nr.iter().zip(&np).map(|(a, b)| libm::sqrt(a * a + b * b)).collect();
    Some(Representatives {
        accuracy: argmin(&rmse, &logp),
        balanced: argmin(&dist, &rmse),
        efficiency: argmin(&logp, &rmse),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nas::genome::{Slot, SlotKind};
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn brute_ranks(points: &[[f64; 3]]) -> Vec<usize> {
        // Peel off non-dominated layers by direct pairwise checks.
        let n = points.len();
        let mut rank = vec![usize::MAX; n];
        let mut r = 0;
        while rank.iter().any(|&x| x == usize::MAX) {
            let layer: Vec<usize> = (0..n)
                .filter(|&i| rank[i] == usize::MAX)
                .filter(|&i| !(0..n).any(|j| rank[j] == usize::MAX && dominates(&points[j], &points[i])))
                .collect();
            for i in layer {
                rank[i] = r;
            }
            r += 1;
        }
        rank
    }

    fn random_points(n: usize, seed: u64) -> Vec<[f64; 3]> {
        let mut rng = seeded(seed);
        (0..n)
            .map(|_| {
                [
                    rng.random_range(0.0..1.0),
                    f64::from(rng.random_range(0..50u32)),
                    f64::from(rng.random_range(1..5u32)),
                ]
            })
            .collect()
    }

    #[test]
    fn simple_domination() {
        let pts = [[0.1, 100.0, 1.0], [0.2, 200.0, 2.0]];
        assert_eq!(ranks(&pts), [0, 1]);
        assert_eq!(fast_non_dominated_sort(&[[1.0, 1.0, 1.0]]), [[0]]);
    }

    #[test]
    fn sort_matches_brute_force_on_500_points() {
        let pts = random_points(500, 11);
        assert_eq!(ranks(&pts), brute_ranks(&pts));
    }

    #[test]
    fn crowding_examples() {
        let pts = [[0.0, 1.0, 1.0], [1.0, 1.0, 1.0]];
        assert!(crowding_distance(&pts, &[0, 1]).iter().all(|d| d.is_infinite()));
        let pts = [[0.0, 5.0, 5.0], [0.5, 5.0, 5.0], [1.0, 5.0, 5.0]];
        let d = crowding_distance(&pts, &[0, 1, 2]);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        assert!((d[1] - 1.0).abs() < 1e-15);
        let pts = [[2.0, 2.0, 2.0]; 4];
        let d = crowding_distance(&pts, &[0, 1, 2, 3]);
        assert_eq!(d.iter().filter(|x| **x == 0.0).count(), 2);
    }

    fn ind(genome: Genome, rmse: f64, params: usize, depth: usize) -> Individual {
        Individual::new(genome, Objectives { val_rmse: rmse, param_count: params, depth })
    }

    fn genome(units_code: u8) -> Genome {
        let e = Slot::EMPTY;
        Genome::new([Slot::new(SlotKind::Gru, units_code, 0), e, e, e])
    }

    #[test]
    fn front_edge_cases() {
        let pop: Vec<Individual> = (0..4).map(|u| ind(genome(u), 0.1, 100, 1)).collect();
        assert_eq!(pareto_front(&pop).len(), 4);
        let chain: Vec<Individual> = (0..4).map(|u| ind(genome(u), 0.1 * f64::from(u + 1), 100 + usize::from(u), 1)).collect();
        let f = pareto_front(&chain);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].genome, genome(0));
    }

    #[test]
    fn degenerate_operators_clone_winners() {
        let mut rng = seeded(5);
        let mut pop: Vec<Individual> = (0..4).map(|u| ind(genome(u), 0.1 * f64::from(u + 1), 100, 1)).collect();
        assign_rank_and_crowding(&mut pop);
        let kids = make_offspring(&pop, &mut rng, 0.0, 0.0).unwrap();
        assert_eq!(kids.len(), 4);
        assert!(kids.iter().all(|k| pop.iter().any(|p| p.genome == *k)));
        assert!(make_offspring(&pop[..3], &mut rng, 0.9, 0.15).is_err());
    }

    #[test]
    fn full_mutation_changes_offspring() {
        let mut rng = seeded(9);
        let mut pop: Vec<Individual> = (0..20).map(|_| ind(genome(1), 0.1, 100, 1)).collect();
        assign_rank_and_crowding(&mut pop);
        let kids = make_offspring(&pop, &mut rng, 0.0, 1.0).unwrap();
        let changed = kids.iter().filter(|k| **k != genome(1)).count();
        assert!(changed >= 15, "{changed}");
        assert!(kids.iter().all(Genome::is_canonical));
    }

    #[test]
    fn survivors_keep_best_rmse() {
        let mut rng = seeded(2);
        let pop: Vec<Individual> = (0..40)
            .map(|_| {
                let g = Genome::random(&mut rng);
                ind(g, rng.random_range(0.0..1.0), rng.random_range(10..1000), g.depth())
            })
            .collect();
        let best = pop.iter().map(|i| i.objectives.val_rmse).fold(f64::INFINITY, f64::min);
        let kept = select_survivors(pop, 20);
        assert_eq!(kept.len(), 20);
        assert_eq!(kept.iter().map(|i| i.objectives.val_rmse).fold(f64::INFINITY, f64::min), best);
    }

    #[test]
    fn depth_minimization_equals_inverse_depth_ordering() {
        let depths = [3usize, 1, 4, 2, 2];
        let mut by_depth: Vec<usize> = (0..5).collect();
        by_depth.sort_by_key(|&i| depths[i]);
        let mut by_inverse: Vec<usize> = (0..5).collect();
        by_inverse.sort_by(|&a, &b| (1.0 / depths[b] as f64).total_cmp(&(1.0 / depths[a] as f64)));
        assert_eq!(by_depth, by_inverse);
    }

    #[test]
    fn representatives_pick_extremes() {
        let front = vec![
            ind(genome(3), 0.05, 150_000, 2),
            ind(genome(2), 0.06, 4_000, 1),
            ind(genome(0), 0.09, 1_000, 1),
        ];
        let r = representatives(&front).unwrap();
        assert_eq!((r.accuracy, r.balanced, r.efficiency), (0, 1, 2));
    }

    proptest! {
        #[test]
        fn sort_agrees_with_brute_force(n in 1usize..120, seed in any::<u64>()) {
            let pts = random_points(n, seed);
            prop_assert_eq!(ranks(&pts), brute_ranks(&pts));
        }

        #[test]
        fn crowding_boundaries_are_infinite(n in 3usize..60, seed in any::<u64>()) {
            let pts = random_points(n, seed);
            let front: Vec<usize> = (0..n).collect();
            let d = crowding_distance(&pts, &front);
            for m in 0..3 {
                let lo = pts.iter().map(|p| p[m]).fold(f64::INFINITY, f64::min);
                let hi = pts.iter().map(|p| p[m]).fold(f64::NEG_INFINITY, f64::max);
                // Some point attaining each extreme is marked infinite.
                prop_assert!((0..n).any(|i| pts[i][m] == lo && d[i].is_infinite()));
                prop_assert!((0..n).any(|i| pts[i][m] == hi && d[i].is_infinite()));
            }
            prop_assert!(d.iter().all(|x| *x >= 0.0));
        }

        #[test]
        fn front_is_mutually_non_dominated(n in 1usize..80, seed in any::<u64>()) {
            let mut rng = seeded(seed);
            let pop: Vec<Individual> = (0..n).map(|_| {
                let g = Genome::random(&mut rng);
                ind(g, rng.random_range(0.0..1.0), rng.random_range(10..1000), g.depth())
            }).collect();
            let front = pareto_front(&pop);
            prop_assert!(!front.is_empty());
            for a in &front {
                for b in &pop {
                    prop_assert!(!dominates(&b.objectives.vector(), &a.objectives.vector()));
                }
            }
        }
    }
}
