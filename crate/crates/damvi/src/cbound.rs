//! Empirical C-bound machinery: Gibbs risk, expected disagreement, the bound
//! itself, its analytic gradient, and a simplex-constrained maximizer of the
//! accuracy/diversity objective
//!
//! ```text
//!     f(q) = (1 - 2 G(q))^2 / (1 - 2 d(q))
//! ```
//!
//! where `G(q) = q . r` is the Gibbs risk and `d(q) = q' M q` the expected
//! pairwise disagreement, both under a distribution over examples. The bound
//! on the weighted majority-vote risk is `1 - f(q)`, valid while
//! `G(q) <= 1/2` and the denominator stays away from zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vote::{PosteriorWeights, VoteMatrix};

/// Guard on the bound denominator `1 - 2 d(q)`; the bound diverges as the
/// disagreement approaches 1/2, and the optimizer must not cross it.
pub const DENOMINATOR_GUARD: f64 = 1e-9;

/// A weighting over training examples: non-negative, sums to one within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleDistribution(Vec<f64>);

impl ExampleDistribution {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::InvalidDistribution {
                reason: "empty example distribution".to_string(),
            });
        }
        let mut sum = 0.0;
        for &w in &d {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidDistribution {
                    reason: format!("weight {w} is negative or not finite"),
                });
            }
            sum += w;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution {
                reason: format!("weights sum to {sum}, expected 1"),
            });
        }
        Ok(Self(d))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution {
                reason: "empty example distribution".to_string(),
            });
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Per-classifier weighted 0/1 risks, each in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct RiskVector(Vec<f64>);

impl RiskVector {
    pub fn new(r: Vec<f64>) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::InvalidParameter {
                name: "risk_vector",
                reason: "must not be empty".to_string(),
            });
        }
        let mut clamped = Vec::with_capacity(r.len());
        for &v in &r {
            if !v.is_finite() || !(-1e-9..=1.0 + 1e-9).contains(&v) {
                return Err(Error::InvalidParameter {
                    name: "risk_vector",
                    reason: format!("entry {v} outside [0, 1]"),
                });
            }
            clamped.push(v.clamp(0.0, 1.0));
        }
        Ok(Self(clamped))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Symmetric K x K matrix of pairwise weighted disagreements, zero diagonal,
/// entries in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct DisagreementMatrix {
    m: Vec<f64>, // row-major, k * k
    k: usize,
}

impl DisagreementMatrix {
    pub fn new(m: Vec<f64>, k: usize) -> Result<Self> {
        if k == 0 || m.len() != k * k {
            return Err(Error::InvalidParameter {
                name: "disagreement_matrix",
                reason: format!("expected {k}x{k} entries, got {}", m.len()),
            });
        }
        let mut clamped = m;
        for i in 0..k {
            for j in 0..k {
                let v = clamped[i * k + j];
                if !v.is_finite() || !(-1e-9..=1.0 + 1e-9).contains(&v) {
                    return Err(Error::InvalidParameter {
                        name: "disagreement_matrix",
                        reason: format!("entry ({i}, {j}) = {v} outside [0, 1]"),
                    });
                }
                if (v - clamped[j * k + i]).abs() > 1e-12 {
                    return Err(Error::InvalidParameter {
                        name: "disagreement_matrix",
                        reason: format!("asymmetric at ({i}, {j})"),
                    });
                }
            }
            if clamped[i * k + i] != 0.0 {
                return Err(Error::InvalidParameter {
                    name: "disagreement_matrix",
                    reason: format!("non-zero diagonal at {i}"),
                });
            }
        }
        for v in &mut clamped {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self { m: clamped, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i * self.k + j]
    }

    /// Matrix-vector product `M q`.
    pub fn mul(&self, q: &[f64]) -> Vec<f64> {
        (0..self.k)
            .map(|i| q.iter().enumerate().map(|(j, &w)| self.get(i, j) * w).sum())
            .collect()
    }
}

/// Weighted risk of each classifier column of the vote matrix.
pub fn risk_vector(v: &VoteMatrix, dist: &ExampleDistribution) -> Result<RiskVector> {
    if dist.len() != v.n() {
        return Err(Error::LengthMismatch {
            left: dist.len(),
            right: v.n(),
        });
    }
    let d = dist.as_slice();
    let r: Vec<f64> = (0..v.k())
        .map(|k| {
            (0..v.n())
                .filter(|&i| v.vote(i, k) != v.label(i))
                .map(|i| d[i])
                .sum()
        })
        .collect();
    RiskVector::new(r)
}

/// Weighted pairwise disagreement between every pair of classifier columns.
pub fn disagreement_matrix(
    v: &VoteMatrix,
    dist: &ExampleDistribution,
) -> Result<DisagreementMatrix> {
    if dist.len() != v.n() {
        return Err(Error::LengthMismatch {
            left: dist.len(),
            right: v.n(),
        });
    }
    let d = dist.as_slice();
    let k = v.k();
    let mut m = vec![0.0; k * k];
    for a in 0..k {
        for b in (a + 1)..k {
            let dis: f64 = (0..v.n())
                .filter(|&i| v.vote(i, a) != v.vote(i, b))
                .map(|i| d[i])
                .sum();
            m[a * k + b] = dis;
            m[b * k + a] = dis;
        }
    }
    DisagreementMatrix::new(m, k)
}

/// Q-expected individual classifier risk, `q . r`.
pub fn gibbs_risk(q: &PosteriorWeights, r: &RiskVector) -> Result<f64> {
    if q.len() != r.len() {
        return Err(Error::LengthMismatch {
            left: q.len(),
            right: r.len(),
        });
    }
    Ok(q.as_slice()
        .iter()
        .zip(r.as_slice())
        .map(|(&w, &risk)| w * risk)
        .sum())
}

/// Probability that two classifiers drawn independently from Q disagree on
/// an example drawn from the distribution: `q' M q`.
pub fn expected_disagreement(q: &PosteriorWeights, m: &DisagreementMatrix) -> Result<f64> {
    if q.len() != m.k() {
        return Err(Error::LengthMismatch {
            left: q.len(),
            right: m.k(),
        });
    }
    let mq = m.mul(q.as_slice());
    Ok(q.as_slice().iter().zip(&mq).map(|(&w, &v)| w * v).sum())
}

/// The C-bound `1 - (1 - 2G)^2 / (1 - 2d)` on the weighted majority-vote
/// risk. Fails when the Gibbs risk exceeds 1/2 (bound inapplicable) or when
/// the denominator falls below [`DENOMINATOR_GUARD`].
pub fn cbound_value(q: &PosteriorWeights, r: &RiskVector, m: &DisagreementMatrix) -> Result<f64> {
    let gibbs = gibbs_risk(q, r)?;
    let dis = expected_disagreement(q, m)?;
    let denominator = 1.0 - 2.0 * dis;
    if denominator < DENOMINATOR_GUARD {
        return Err(Error::DegenerateDenominator { denominator });
    }
    if gibbs > 0.5 {
        return Err(Error::BoundInapplicable { gibbs });
    }
    let numerator = (1.0 - 2.0 * gibbs).powi(2);
    Ok(1.0 - numerator / denominator)
}

/// Gradient of the maximized objective `(1 - 2 q.r)^2 / (1 - 2 q'Mq)` with
/// respect to q, evaluated componentwise.
pub fn cbound_gradient(
    q: &PosteriorWeights,
    r: &RiskVector,
    m: &DisagreementMatrix,
) -> Result<Vec<f64>> {
    if q.len() != r.len() {
        return Err(Error::LengthMismatch {
            left: q.len(),
            right: r.len(),
        });
    }
    if q.len() != m.k() {
        return Err(Error::LengthMismatch {
            left: q.len(),
            right: m.k(),
        });
    }
    let gibbs = gibbs_risk(q, r)?;
    let dis = expected_disagreement(q, m)?;
    let denominator = 1.0 - 2.0 * dis;
    if denominator < DENOMINATOR_GUARD {
        return Err(Error::DegenerateDenominator { denominator });
    }
    let margin_term = 1.0 - 2.0 * gibbs; // 1 - 2G
    let numerator = margin_term * margin_term; // N = (1 - 2G)^2
    let mq = m.mul(q.as_slice());
    Ok(r.as_slice()
        .iter()
        .zip(&mq)
        .map(|(&r_k, &mq_k)| {
            (-4.0 * margin_term * r_k * denominator + 4.0 * numerator * mq_k)
                / (denominator * denominator)
        })
        .collect())
}

/// Euclidean projection onto the probability simplex via sort-and-threshold.
///
/// Panics if `v` is empty; the projection of nothing is undefined.
pub fn project_simplex(v: &[f64]) -> PosteriorWeights {
    assert!(!v.is_empty(), "cannot project an empty vector");
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));

    let mut cumsum = 0.0;
    let mut threshold = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            threshold = candidate;
        }
    }

    let mut w: Vec<f64> = v.iter().map(|&x| (x - threshold).max(0.0)).collect();
    let sum: f64 = w.iter().sum();
    for x in &mut w {
        *x /= sum;
    }
    PosteriorWeights::new(w).expect("projection output is on the simplex")
}

/// First and second moments of the margin under an example distribution,
/// and their difference, the margin variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginMoments {
    pub mu1: f64,
    pub mu2: f64,
    pub variance: f64,
}

/// Computes the margin moments `mu1 = E[y * score]`, `mu2 = E[score^2]`, and
/// `variance = mu2 - mu1^2`.
pub fn margin_moments(
    q: &PosteriorWeights,
    v: &VoteMatrix,
    dist: &ExampleDistribution,
) -> Result<MarginMoments> {
    if q.len() != v.k() {
        return Err(Error::LengthMismatch {
            left: q.len(),
            right: v.k(),
        });
    }
    if dist.len() != v.n() {
        return Err(Error::LengthMismatch {
            left: dist.len(),
            right: v.n(),
        });
    }
    let mut mu1 = 0.0;
    let mut mu2 = 0.0;
    for (i, &w) in dist.as_slice().iter().enumerate() {
        let score = v.score(i, q);
        mu1 += w * v.label(i) as f64 * score;
        mu2 += w * score * score;
    }
    Ok(MarginMoments {
        mu1,
        mu2,
        variance: mu2 - mu1 * mu1,
    })
}

/// Settings for [`optimize_weights`]: projected-gradient ascent with Armijo
/// backtracking plus random Dirichlet(1) restarts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Stop when the objective improvement or the iterate movement falls
    /// below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of random restarts in addition to the supplied init.
    pub restarts: usize,
    pub initial_step: f64,
    /// Backtracking shrink factor.
    pub shrink: f64,
    /// Armijo sufficient-increase coefficient.
    pub armijo_c: f64,
    /// Seed for the restart draws.
    pub seed: u64,
    /// Record an (iteration, objective, step) trace for the returned run.
    pub record_trace: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
            restarts: 4,
            initial_step: 1.0,
            shrink: 0.5,
            armijo_c: 1e-4,
            seed: 0,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerStatus {
    Converged,
    MaxIterations,
    /// Every start point violated the denominator guard; the init was
    /// returned untouched.
    DegenerateDenominator,
}

/// One recorded optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub step_size: f64,
}

/// Result of a weight optimization: the best feasible point found, the
/// objective there, and the corresponding bound value `1 - objective`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub weights: PosteriorWeights,
    pub objective: f64,
    pub cbound: f64,
    pub iterations: usize,
    pub status: OptimizerStatus,
    pub trace: Vec<TraceRow>,
}

struct Objective<'a> {
    r: &'a RiskVector,
    m: &'a DisagreementMatrix,
}

impl Objective<'_> {
    fn denominator(&self, q: &[f64]) -> f64 {
        let mq = self.m.mul(q);
        let dis: f64 = q.iter().zip(&mq).map(|(&w, &v)| w * v).sum();
        1.0 - 2.0 * dis
    }

    fn eval(&self, q: &[f64]) -> Option<f64> {
        let den = self.denominator(q);
        if den < DENOMINATOR_GUARD {
            return None;
        }
        let gibbs: f64 = q
            .iter()
            .zip(self.r.as_slice())
            .map(|(&w, &risk)| w * risk)
            .sum();
        Some((1.0 - 2.0 * gibbs).powi(2) / den)
    }

    fn gradient(&self, q: &PosteriorWeights) -> Result<Vec<f64>> {
        cbound_gradient(q, self.r, self.m)
    }
}

struct Run {
    weights: PosteriorWeights,
    objective: f64,
    iterations: usize,
    status: OptimizerStatus,
    trace: Vec<TraceRow>,
}

/// Maximizes the C-bound objective over the simplex. Runs projected-gradient
/// ascent from the supplied init, from every simplex vertex, and from
/// `restarts` random Dirichlet(1) points, returning the best feasible
/// result; ascent never decreases the objective, so the result is at least
/// as good as the init. The vertex starts cover the basins on the far side
/// of the Gibbs-risk-1/2 valley, where the squared numerator has its
/// mirrored peaks; interior starts alone cannot cross that valley.
pub fn optimize_weights(
    r: &RiskVector,
    m: &DisagreementMatrix,
    init: &PosteriorWeights,
    config: &OptimizerConfig,
) -> Result<OptimizeOutcome> {
    let k = init.len();
    if r.len() != k {
        return Err(Error::LengthMismatch {
            left: r.len(),
            right: k,
        });
    }
    if m.k() != k {
        return Err(Error::LengthMismatch {
            left: m.k(),
            right: k,
        });
    }

    let objective = Objective { r, m };

    if k == 1 {
        let q = PosteriorWeights::uniform(1)?;
        let value = objective.eval(q.as_slice()).unwrap_or(f64::NAN);
        return Ok(OptimizeOutcome {
            weights: q,
            objective: value,
            cbound: 1.0 - value,
            iterations: 0,
            status: OptimizerStatus::Converged,
            trace: Vec::new(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut starts = vec![init.clone()];
    for vertex in 0..k {
        let mut point = vec![0.0; k];
        point[vertex] = 1.0;
        starts.push(PosteriorWeights::new(point)?);
    }
    for _ in 0..config.restarts {
        starts.push(dirichlet_uniform(k, &mut rng));
    }

    let mut best: Option<Run> = None;
    for start in &starts {
        let Some(run) = ascend(&objective, start, config) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some(b) => run.objective > b.objective,
        };
        if better {
            best = Some(run);
        }
    }

    match best {
        Some(run) => Ok(OptimizeOutcome {
            weights: run.weights,
            objective: run.objective,
            cbound: 1.0 - run.objective,
            iterations: run.iterations,
            status: run.status,
            trace: run.trace,
        }),
        None => Ok(OptimizeOutcome {
            weights: init.clone(),
            objective: f64::NAN,
            cbound: f64::NAN,
            iterations: 0,
            status: OptimizerStatus::DegenerateDenominator,
            trace: Vec::new(),
        }),
    }
}

const MAX_BACKTRACKS: usize = 60;

fn ascend(
    objective: &Objective,
    start: &PosteriorWeights,
    config: &OptimizerConfig,
) -> Option<Run> {
    let mut q = start.clone();
    let mut value = objective.eval(q.as_slice())?;
    let mut trace = Vec::new();
    if config.record_trace {
        trace.push(TraceRow {
            iteration: 0,
            objective: value,
            step_size: 0.0,
        });
    }

    let mut status = OptimizerStatus::MaxIterations;
    let mut iterations = 0;
    for iter in 1..=config.max_iter {
        iterations = iter;
        let grad = objective
            .gradient(&q)
            .expect("iterates stay inside the denominator guard");

        let mut accepted: Option<(PosteriorWeights, f64, f64, f64)> = None;
        let mut step = config.initial_step;
        for _ in 0..MAX_BACKTRACKS {
            let shifted: Vec<f64> = q
                .as_slice()
                .iter()
                .zip(&grad)
                .map(|(&w, &g)| w + step * g)
                .collect();
            let candidate = project_simplex(&shifted);
            if let Some(cand_value) = objective.eval(candidate.as_slice()) {
                let movement = q
                    .as_slice()
                    .iter()
                    .zip(candidate.as_slice())
                    .map(|(&a, &b)| (a - b).abs())
                    .fold(0.0, f64::max);
                let directional: f64 = grad
                    .iter()
                    .zip(candidate.as_slice().iter().zip(q.as_slice()))
                    .map(|(&g, (&c, &w))| g * (c - w))
                    .sum();
                if movement > 0.0 && cand_value >= value + config.armijo_c * directional {
                    accepted = Some((candidate, cand_value, movement, step));
                    break;
                }
            }
            step *= config.shrink;
        }

        let Some((next_q, next_value, movement, used_step)) = accepted else {
            // No feasible improving step in the line search: stationary.
            status = OptimizerStatus::Converged;
            iterations = iter - 1;
            break;
        };

        let improvement = next_value - value;
        q = next_q;
        value = next_value;
        if config.record_trace {
            trace.push(TraceRow {
                iteration: iter,
                objective: value,
                step_size: used_step,
            });
        }
        if improvement < config.tol || movement < config.tol {
            status = OptimizerStatus::Converged;
            break;
        }
    }

    Some(Run {
        weights: q,
        objective: value,
        iterations,
        status,
        trace,
    })
}

/// Uniform draw from the simplex (Dirichlet with unit concentration), via
/// normalized exponentials.
fn dirichlet_uniform(k: usize, rng: &mut ChaCha8Rng) -> PosteriorWeights {
    let draws: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let sum: f64 = draws.iter().sum();
    if sum <= 0.0 {
        return PosteriorWeights::uniform(k).expect("k >= 1");
    }
    PosteriorWeights::new(draws.iter().map(|&e| e / sum).collect())
        .expect("normalized exponentials lie on the simplex")
}

/// Writes an optimizer trace as CSV with columns iteration, objective,
/// step_size.
pub fn write_trace_csv<W: std::io::Write>(trace: &[TraceRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["iteration", "objective", "step_size"])?;
    for row in trace {
        wtr.write_record([
            row.iteration.to_string(),
            format!("{}", row.objective),
            format!("{}", row.step_size),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
