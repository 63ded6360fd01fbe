//! Property tests for the bound machinery and its supporting identities:
//! randomized vote matrices, example distributions, and posterior weights.

use proptest::prelude::*;

use damvi::cbound::{
    cbound_gradient, cbound_value, disagreement_matrix, expected_disagreement, gibbs_risk,
    margin_moments, optimize_weights, project_simplex, risk_vector, DisagreementMatrix,
    ExampleDistribution, OptimizerConfig, RiskVector, DENOMINATOR_GUARD,
};
use damvi::dataset::{make_synthetic, smote, stratified_split};
use damvi::metrics::{f1_score, pr_curve, ScoredPredictions};
use damvi::train::update_example_weights;
use damvi::tree::{fit_tree, predict_tree, TreeParams};
use damvi::vote::{mv_risk, PosteriorWeights, VoteMatrix};

#[derive(Debug, Clone)]
struct Instance {
    rows: Vec<Vec<i8>>,
    labels: Vec<i8>,
    dist: Vec<f64>,
    q: Vec<f64>,
}

fn normalize(weights: &[f64]) -> Vec<f64> {
    let sum: f64 = weights.iter().sum();
    weights.iter().map(|w| w / sum).collect()
}

fn vote_instance(max_n: usize, max_k: usize) -> impl Strategy<Value = Instance> {
    (2..=max_n, 1..=max_k).prop_flat_map(|(n, k)| {
        (
            prop::collection::vec(prop::collection::vec(prop::bool::ANY, k), n),
            prop::collection::vec(prop::bool::ANY, n),
            prop::collection::vec(1e-3..1.0f64, n),
            prop::collection::vec(1e-3..1.0f64, k),
        )
            .prop_map(|(votes, labels, raw_dist, raw_q)| Instance {
                rows: votes
                    .iter()
                    .map(|row| row.iter().map(|&b| if b { 1 } else { -1 }).collect())
                    .collect(),
                labels: labels.iter().map(|&b| if b { 1 } else { -1 }).collect(),
                dist: normalize(&raw_dist),
                q: normalize(&raw_q),
            })
    })
}

struct Built {
    votes: VoteMatrix,
    dist: ExampleDistribution,
    q: PosteriorWeights,
    risks: RiskVector,
    disagreements: DisagreementMatrix,
}

fn build(instance: &Instance) -> Built {
    let votes = VoteMatrix::from_rows(instance.rows.clone(), instance.labels.clone()).unwrap();
    let dist = ExampleDistribution::new(instance.dist.clone()).unwrap();
    let q = PosteriorWeights::new(instance.q.clone()).unwrap();
    let risks = risk_vector(&votes, &dist).unwrap();
    let disagreements = disagreement_matrix(&votes, &dist).unwrap();
    Built {
        votes,
        dist,
        q,
        risks,
        disagreements,
    }
}

proptest! {
    /// Gibbs risk equals (1 - mu1) / 2 and expected disagreement equals
    /// (1 - mu2) / 2, to near machine precision.
    #[test]
    fn moment_identities(instance in vote_instance(40, 8)) {
        let b = build(&instance);
        let gibbs = gibbs_risk(&b.q, &b.risks).unwrap();
        let dis = expected_disagreement(&b.q, &b.disagreements).unwrap();
        let mm = margin_moments(&b.q, &b.votes, &b.dist).unwrap();
        prop_assert!((gibbs - (1.0 - mm.mu1) / 2.0).abs() < 1e-12);
        prop_assert!((dis - (1.0 - mm.mu2) / 2.0).abs() < 1e-12);
        prop_assert!(mm.variance >= -1e-12);

        // Variance agrees with the centered second moment computed directly.
        let direct: f64 = (0..b.votes.n())
            .map(|i| {
                let margin = b.votes.margin(i, &b.q);
                b.dist.as_slice()[i] * (margin - mm.mu1) * (margin - mm.mu1)
            })
            .sum();
        prop_assert!((mm.variance - direct).abs() < 1e-12);
    }

    /// Disagreement under a distribution derived from actual votes stays in
    /// [0, 1/2].
    #[test]
    fn disagreement_range(instance in vote_instance(40, 8)) {
        let b = build(&instance);
        let dis = expected_disagreement(&b.q, &b.disagreements).unwrap();
        prop_assert!((-1e-12..=0.5 + 1e-12).contains(&dis));
    }

    /// The majority-vote risk never exceeds twice the Gibbs risk.
    #[test]
    fn factor_two_bound(instance in vote_instance(40, 8)) {
        let b = build(&instance);
        let gibbs = gibbs_risk(&b.q, &b.risks).unwrap();
        let risk = mv_risk(&b.votes, &b.q, Some(&b.dist)).unwrap();
        prop_assert!(risk <= 2.0 * gibbs + 1e-12);
    }

    /// Whenever the bound applies, it upper-bounds the weighted
    /// majority-vote risk.
    #[test]
    fn bound_dominates_risk(instance in vote_instance(40, 8)) {
        let b = build(&instance);
        match cbound_value(&b.q, &b.risks, &b.disagreements) {
            Ok(bound) => {
                let risk = mv_risk(&b.votes, &b.q, Some(&b.dist)).unwrap();
                prop_assert!(
                    risk <= bound + 1e-9,
                    "risk {risk} above bound {bound}"
                );
            }
            Err(_) => {
                // Gibbs risk above 1/2 or degenerate diversity: inapplicable.
            }
        }
    }

    /// Duplicating a classifier and splitting its weight in half changes
    /// nothing: the bound is scale-free in the classifier multiset.
    #[test]
    fn bound_invariant_under_duplication(instance in vote_instance(30, 6)) {
        let b = build(&instance);
        let Ok(bound) = cbound_value(&b.q, &b.risks, &b.disagreements) else {
            return Ok(());
        };

        // Duplicate the last classifier, splitting its weight.
        let rows: Vec<Vec<i8>> = instance
            .rows
            .iter()
            .map(|row| {
                let mut r = row.clone();
                r.push(*row.last().unwrap());
                r
            })
            .collect();
        let mut q = instance.q.clone();
        let last = q.pop().unwrap();
        q.push(last / 2.0);
        q.push(last / 2.0);

        let votes = VoteMatrix::from_rows(rows, instance.labels.clone()).unwrap();
        let q = PosteriorWeights::new(q).unwrap();
        let risks = risk_vector(&votes, &b.dist).unwrap();
        let disagreements = disagreement_matrix(&votes, &b.dist).unwrap();
        let bound_dup = cbound_value(&q, &risks, &disagreements).unwrap();
        prop_assert!((bound - bound_dup).abs() < 1e-12);
    }

    /// Analytic gradient against central finite differences of the raw
    /// objective, at random interior simplex points.
    #[test]
    fn gradient_matches_finite_differences(instance in vote_instance(30, 6)) {
        let b = build(&instance);
        let denominator = 1.0 - 2.0 * expected_disagreement(&b.q, &b.disagreements).unwrap();
        prop_assume!(denominator > 1e-3);

        let grad = cbound_gradient(&b.q, &b.risks, &b.disagreements).unwrap();
        let objective = |q: &[f64]| -> f64 {
            let gibbs: f64 = q.iter().zip(b.risks.as_slice()).map(|(&w, &r)| w * r).sum();
            let dis: f64 = (0..q.len())
                .map(|i| {
                    (0..q.len())
                        .map(|j| q[i] * q[j] * b.disagreements.get(i, j))
                        .sum::<f64>()
                })
                .sum();
            (1.0 - 2.0 * gibbs).powi(2) / (1.0 - 2.0 * dis)
        };

        let h = 1e-6;
        for i in 0..b.q.len() {
            let mut plus = b.q.as_slice().to_vec();
            let mut minus = plus.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
            let scale = grad[i].abs().max(fd.abs()).max(1.0);
            prop_assert!(
                (grad[i] - fd).abs() / scale < 1e-5,
                "component {i}: analytic {} vs fd {fd}",
                grad[i]
            );
        }
    }

    /// Projection lands on the simplex and is idempotent.
    #[test]
    fn projection_feasible_and_idempotent(v in prop::collection::vec(-3.0..3.0f64, 1..10)) {
        let p = project_simplex(&v);
        let sum: f64 = p.as_slice().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(p.as_slice().iter().all(|&w| w >= 0.0));
        let again = project_simplex(p.as_slice());
        for (a, b) in p.as_slice().iter().zip(again.as_slice()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    /// Projection is the closest simplex point: no grid point does better.
    #[test]
    fn projection_is_euclidean_closest(v in prop::collection::vec(-2.0..2.0f64, 2..4usize)) {
        let p = project_simplex(&v);
        let dist2 = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
        };
        let d_proj = dist2(&v, p.as_slice());
        for grid in simplex_grid(v.len(), 50) {
            prop_assert!(d_proj <= dist2(&v, &grid) + 1e-9);
        }
    }

    /// The weight update preserves normalization exactly, never reweighs one
    /// negative against another, and orders positives by margin.
    #[test]
    fn weight_update_contract(instance in vote_instance(30, 6)) {
        let b = build(&instance);
        let updated = update_example_weights(&b.dist, &b.votes, &b.q).unwrap();
        let sum: f64 = updated.as_slice().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);

        let old = b.dist.as_slice();
        let new = updated.as_slice();
        let negatives: Vec<usize> = (0..b.votes.n()).filter(|&i| b.votes.label(i) == -1).collect();
        for pair in negatives.windows(2) {
            let (i, j) = (pair[0], pair[1]);
            prop_assert!((new[i] / new[j] - old[i] / old[j]).abs() < 1e-9);
        }

        let positives: Vec<usize> = (0..b.votes.n()).filter(|&i| b.votes.label(i) == 1).collect();
        for pair in positives.windows(2) {
            let (i, j) = (pair[0], pair[1]);
            let expected = (old[i] / old[j])
                * (b.votes.margin(j, &b.q) - b.votes.margin(i, &b.q)).exp();
            prop_assert!(
                (new[i] / new[j] - expected).abs() < 1e-9,
                "positive ratio {} vs {expected}",
                new[i] / new[j]
            );
        }
    }

    /// Ensemble scores are bounded and invariant under permuting classifiers
    /// together with their weights.
    #[test]
    fn score_bounded_and_permutation_invariant(instance in vote_instance(20, 6)) {
        let b = build(&instance);
        for i in 0..b.votes.n() {
            let score = b.votes.score(i, &b.q);
            prop_assert!(score.abs() <= 1.0 + 1e-12);
        }

        // Reverse classifiers and weights together.
        let rows_rev: Vec<Vec<i8>> = instance
            .rows
            .iter()
            .map(|row| row.iter().rev().copied().collect())
            .collect();
        let q_rev: Vec<f64> = instance.q.iter().rev().copied().collect();
        let votes_rev = VoteMatrix::from_rows(rows_rev, instance.labels.clone()).unwrap();
        let q_rev = PosteriorWeights::new(q_rev).unwrap();
        for i in 0..b.votes.n() {
            prop_assert!((b.votes.score(i, &b.q) - votes_rev.score(i, &q_rev)).abs() < 1e-12);
        }
    }
}

/// All points of the step-1/resolution grid on the (k-1)-simplex.
fn simplex_grid(k: usize, resolution: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; k];
    fill_grid(k, resolution, 0, resolution, &mut current, &mut out);
    out
}

fn fill_grid(
    k: usize,
    resolution: usize,
    index: usize,
    remaining: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<f64>>,
) {
    if index == k - 1 {
        current[index] = remaining;
        out.push(
            current
                .iter()
                .map(|&c| c as f64 / resolution as f64)
                .collect(),
        );
        return;
    }
    for c in 0..=remaining {
        current[index] = c;
        fill_grid(k, resolution, index + 1, remaining - c, current, out);
    }
}

/// Vote-matrix entries agree with individual tree predictions, element by
/// element.
#[test]
fn vote_matrix_matches_elementwise_predictions() {
    let ds = make_synthetic(120, 3, 0.25, 1.5, 43).unwrap();
    let trees: Vec<_> = (0..4)
        .map(|seed| {
            let sample = damvi::dataset::bootstrap_sample(&ds, 0.5, seed).unwrap();
            fit_tree(&sample, &TreeParams::default(), seed).unwrap()
        })
        .collect();
    let votes = damvi::vote::vote_matrix(&trees, &ds).unwrap();
    for (i, ex) in ds.examples().iter().enumerate() {
        for (k, tree) in trees.iter().enumerate() {
            assert_eq!(votes.vote(i, k), predict_tree(tree, &ex.features).unwrap());
        }
        assert_eq!(votes.label(i), ex.label);
    }
}

/// With wide class separation, a depth-1 tree reaches F1 > 0.9 on a held-out
/// split, and a brute-force threshold search confirms a stump of that
/// quality exists in the data at all.
#[test]
fn well_separated_synthetic_is_stump_learnable() {
    let ds = make_synthetic(2000, 2, 0.2, 6.0, 31).unwrap();
    let (train, test) = stratified_split(&ds, 0.3, 7).unwrap();

    let stump_params = TreeParams {
        max_depth: Some(1),
        ..TreeParams::default()
    };
    let stump = fit_tree(&train, &stump_params, 0).unwrap();
    let predictions: Vec<i8> = test
        .examples()
        .iter()
        .map(|e| predict_tree(&stump, &e.features).unwrap())
        .collect();
    let fitted_f1 = f1_score(&predictions, &test.labels()).unwrap();
    assert!(fitted_f1 > 0.9, "fitted stump F1 {fitted_f1}");

    // Brute force: the best single-feature threshold on the train split
    // already separates the classes this well.
    let mut best_oracle_f1: f64 = 0.0;
    for feature in 0..train.dimension() {
        let mut values: Vec<f64> = train
            .examples()
            .iter()
            .map(|e| e.features[feature])
            .collect();
        values.sort_by(|a, b| a.total_cmp(b));
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            for flip in [1i8, -1i8] {
                let predictions: Vec<i8> = test
                    .examples()
                    .iter()
                    .map(|e| {
                        if e.features[feature] <= t {
                            -flip
                        } else {
                            flip
                        }
                    })
                    .collect();
                best_oracle_f1 =
                    best_oracle_f1.max(f1_score(&predictions, &test.labels()).unwrap());
            }
        }
    }
    assert!(best_oracle_f1 > 0.9, "oracle stump F1 {best_oracle_f1}");
    assert!(fitted_f1 >= best_oracle_f1 - 0.05);
}

/// With zero separation the classes are identically distributed, so any
/// classifier's balanced accuracy on a fresh draw sits near one half.
#[test]
fn zero_separation_gives_chance_level_balanced_accuracy() {
    let train = make_synthetic(2000, 3, 0.3, 0.0, 5).unwrap();
    let fresh = make_synthetic(2000, 3, 0.3, 0.0, 6).unwrap();
    let tree = fit_tree(&train, &TreeParams::default(), 0).unwrap();

    let mut tp = 0.0;
    let mut tn = 0.0;
    for ex in fresh.examples() {
        let pred = predict_tree(&tree, &ex.features).unwrap();
        if pred == 1 && ex.label == 1 {
            tp += 1.0;
        }
        if pred == -1 && ex.label == -1 {
            tn += 1.0;
        }
    }
    let balanced_accuracy =
        0.5 * (tp / fresh.positive_count() as f64) + 0.5 * (tn / fresh.negative_count() as f64);
    assert!(
        (balanced_accuracy - 0.5).abs() < 0.15,
        "balanced accuracy {balanced_accuracy}"
    );
}

/// Optimizer against a brute-force grid (coarse version; the acceptance
/// suite runs the full sweep).
#[test]
fn optimizer_beats_grid_on_random_instances() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for k in 2..=3usize {
        for _ in 0..12 {
            let r = RiskVector::new((0..k).map(|_| rng.random::<f64>()).collect()).unwrap();
            let mut m = vec![0.0; k * k];
            for i in 0..k {
                for j in (i + 1)..k {
                    let v = rng.random::<f64>();
                    m[i * k + j] = v;
                    m[j * k + i] = v;
                }
            }
            let m = DisagreementMatrix::new(m, k).unwrap();
            let init = PosteriorWeights::uniform(k).unwrap();
            let out = optimize_weights(&r, &m, &init, &OptimizerConfig::default()).unwrap();

            let mut best_grid = f64::NEG_INFINITY;
            for q in simplex_grid(k, 50) {
                let gibbs: f64 = q.iter().zip(r.as_slice()).map(|(&w, &risk)| w * risk).sum();
                let dis: f64 = (0..k)
                    .map(|i| (0..k).map(|j| q[i] * q[j] * m.get(i, j)).sum::<f64>())
                    .sum();
                let den = 1.0 - 2.0 * dis;
                if den < DENOMINATOR_GUARD {
                    continue;
                }
                best_grid = best_grid.max((1.0 - 2.0 * gibbs).powi(2) / den);
            }
            assert!(
                out.objective >= best_grid - 1e-3,
                "k={k}: optimizer {} below grid {best_grid}",
                out.objective
            );
        }
    }
}

proptest! {
    /// Stratified splits keep per-class proportions within one example and
    /// partition the input exactly.
    #[test]
    fn split_partitions_and_balances(
        n_pos in 2..30usize,
        n_neg in 2..120usize,
        fraction in 0.1..0.9f64,
        seed in 0..1000u64,
    ) {
        let ds = make_synthetic(
            n_pos + n_neg,
            2,
            (n_pos as f64 / (n_pos + n_neg) as f64).clamp(1e-6, 0.5),
            1.0,
            seed,
        );
        let Ok(ds) = ds else { return Ok(()); };
        prop_assume!(ds.positive_count() >= 1 && ds.negative_count() >= 1);

        let Ok((train, test)) = stratified_split(&ds, fraction, seed) else {
            return Ok(());
        };
        prop_assert_eq!(train.len() + test.len(), ds.len());

        let expected_pos = ds.positive_count() as f64 * fraction;
        prop_assert!((test.positive_count() as f64 - expected_pos).abs() <= 1.0);
        let expected_neg = ds.negative_count() as f64 * fraction;
        prop_assert!((test.negative_count() as f64 - expected_neg).abs() <= 1.0);
    }

    /// Curve precisions stay in (0, 1] and recall ends at 1.0.
    #[test]
    fn pr_curve_shape(
        raw in prop::collection::vec((0.0..1.0f64, prop::bool::ANY), 2..40)
            .prop_filter("needs a positive", |v| v.iter().any(|(_, pos)| *pos)),
        quantize in prop::bool::ANY,
    ) {
        let scores: Vec<f64> = raw
            .iter()
            .map(|(s, _)| if quantize { (s * 4.0).round() / 4.0 } else { *s })
            .collect();
        let labels: Vec<i8> = raw.iter().map(|(_, pos)| if *pos { 1 } else { -1 }).collect();
        let sp = ScoredPredictions::new(scores, labels).unwrap();
        let points = pr_curve(&sp).unwrap();
        prop_assert!(!points.is_empty());
        let mut prev_recall = 0.0;
        for p in &points {
            prop_assert!(p.precision > 0.0 && p.precision <= 1.0);
            prop_assert!(p.recall >= prev_recall);
            prev_recall = p.recall;
        }
        prop_assert!((points.last().unwrap().recall - 1.0).abs() < 1e-12);
    }

    /// Every synthetic SMOTE point is a convex combination of two original
    /// minority points; with two minority points, it sits on their segment.
    #[test]
    fn smote_stays_on_segment(seed in 0..500u64, ax in -5.0..5.0f64, ay in -5.0..5.0f64) {
        use damvi::dataset::{Dataset, Example};
        let bx = ax + 2.0;
        let by = ay - 1.0;
        let examples = vec![
            Example::new(vec![ax, ay], 1).unwrap(),
            Example::new(vec![bx, by], 1).unwrap(),
            Example::new(vec![10.0, 10.0], -1).unwrap(),
            Example::new(vec![11.0, 10.0], -1).unwrap(),
            Example::new(vec![10.0, 11.0], -1).unwrap(),
            Example::new(vec![11.0, 11.0], -1).unwrap(),
            Example::new(vec![12.0, 11.0], -1).unwrap(),
        ];
        let ds = Dataset::new(examples, 2).unwrap();
        let out = smote(&ds, 1, seed).unwrap();
        for synthetic in &out.examples()[7..] {
            let (x, y) = (synthetic.features[0], synthetic.features[1]);
            // Collinear with (ax, ay) -> (bx, by), parameter in [0, 1].
            let t = (x - ax) / (bx - ax);
            let expected_y = ay + t * (by - ay);
            prop_assert!((y - expected_y).abs() < 1e-9);
            prop_assert!((-1e-9..=1.0 + 1e-9).contains(&t));
        }
    }
}
