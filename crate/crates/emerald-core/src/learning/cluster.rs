//! Unsupervised grouping on standardized features: k-means with k-means++
//! seeding and restarts, and affinity propagation message passing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax_first, derive_seed, rng_from, Dataset};
use crate::error::{Error, Result};
use crate::features::StandardizationParams;
use crate::num::Real;

/// Cluster centers: coordinates for k-means, data-point indices for
/// affinity propagation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centers<F: Real = f64> {
    /// Centroids in standardized feature space.
    Centroids(Vec<Vec<F>>),
    Exemplars(Vec<usize>),
}

/// A cluster assignment of every instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering<F: Real = f64> {
    pub assignments: Vec<usize>,
    pub k: usize,
    pub centers: Centers<F>,
    /// False when the iteration limit was reached before stabilizing; the
    /// last assignment is still returned.
    pub converged: bool,
}

fn sq_dist<F: Real>(a: &[F], b: &[F]) -> F {
    let mut acc = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += (x - y) * (x - y);
    }
    acc
}

/// Standardization that also accepts a single row (clustering may
/// legitimately run on one instance with k = 1).
fn standardized_rows<F: Real>(data: &Dataset<F>) -> Vec<Vec<F>> {
    if data.len() < 2 {
        return data.rows().to_vec();
    }
    let params = StandardizationParams::fit_rows(data.rows()).expect("len checked");
    data.rows().iter().map(|r| params.apply_row(r)).collect()
}

const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITERS: usize = 300;

/// Lloyd's algorithm with k-means++ seeding, 10 restarts (best
/// within-cluster sum of squares wins) and farthest-point re-seeding of
/// empty clusters.
pub fn kmeans<F: Real>(data: &Dataset<F>, k: usize, seed: u64) -> Result<Clustering<F>> {
    if k == 0 {
        return Err(Error::Validation("k must be at least 1".into()));
    }
    if data.len() < k {
        return Err(Error::TooFewInstances {
            needed: k,
            got: data.len(),
        });
    }
    let x = standardized_rows(data);
    let mut best: Option<(f64, Clustering<F>)> = None;
    for restart in 0..KMEANS_RESTARTS {
        let mut rng = rng_from(derive_seed(seed, restart as u64));
        let mut centroids = seed_plus_plus(&x, k, &mut rng);
        let mut assignments = vec![usize::MAX; x.len()];
        let mut converged = false;
        let mut prev_wcss = f64::INFINITY;
        let mut reseeded = false;
        for _ in 0..KMEANS_MAX_ITERS {
            // assignment step; ties go to the lowest cluster index
            let mut changed = false;
            let mut wcss = 0.0f64;
            for (i, xi) in x.iter().enumerate() {
                let mut best_c = 0usize;
                let mut best_d = sq_dist(xi, &centroids[0]);
                for (c, centroid) in centroids.iter().enumerate().skip(1) {
                    let d = sq_dist(xi, centroid);
                    if d < best_d {
                        best_d = d;
                        best_c = c;
                    }
                }
                wcss += best_d.into_f64();
                if assignments[i] != best_c {
                    assignments[i] = best_c;
                    changed = true;
                }
            }
            if !reseeded {
                // Lloyd steps cannot increase the objective
                debug_assert!(wcss <= prev_wcss * (1.0 + 1e-9) + 1e-9);
            }
            prev_wcss = wcss;
            // update step; runs with the final assignment too, so the
            // returned centroids are the cluster means
            let mut sums = vec![vec![F::zero(); data.width()]; k];
            let mut counts = vec![0usize; k];
            for (xi, &c) in x.iter().zip(&assignments) {
                counts[c] += 1;
                for (s, &v) in sums[c].iter_mut().zip(xi) {
                    *s += v;
                }
            }
            let was_reseeded = reseeded;
            reseeded = false;
            let mut taken: Vec<usize> = Vec::new();
            for c in 0..k {
                if counts[c] > 0 {
                    let n = F::from_usize(counts[c]);
                    for s in &mut sums[c] {
                        *s /= n;
                    }
                    centroids[c] = sums[c].clone();
                } else {
                    // re-seed an empty cluster from the farthest point
                    let mut far_i = 0usize;
                    let mut far_d = F::neg_infinity();
                    for (i, xi) in x.iter().enumerate() {
                        if taken.contains(&i) {
                            continue;
                        }
                        let d = sq_dist(xi, &centroids[assignments[i]]);
                        if d > far_d {
                            far_d = d;
                            far_i = i;
                        }
                    }
                    taken.push(far_i);
                    centroids[c] = x[far_i].clone();
                    reseeded = true;
                }
            }
            if !changed && !was_reseeded && !reseeded {
                converged = true;
                break;
            }
        }
        let wcss: f64 = x
            .iter()
            .zip(&assignments)
            .map(|(xi, &c)| sq_dist(xi, &centroids[c]).into_f64())
            .sum();
        if best.as_ref().is_none_or(|(b, _)| wcss < *b) {
            best = Some((
                wcss,
                Clustering {
                    assignments,
                    k,
                    centers: Centers::Centroids(centroids),
                    converged,
                },
            ));
        }
    }
    Ok(best.expect("at least one restart ran").1)
}

/// k-means++ seeding: first centroid uniform, then D^2-weighted draws.
fn seed_plus_plus<F: Real>(
    x: &[Vec<F>],
    k: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<Vec<F>> {
    let n = x.len();
    let first = rng.random_range(0..n);
    let mut chosen = vec![first];
    let mut centroids = vec![x[first].clone()];
    let mut d2: Vec<f64> = x
        .iter()
        .map(|xi| sq_dist(xi, &x[first]).into_f64())
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut cum = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                cum += w;
                if w > 0.0 && cum > target {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| {
                d2.iter()
                    .rposition(|&w| w > 0.0)
                    .expect("total positive implies a positive weight")
            })
        } else {
            // all remaining points coincide with chosen centroids
            (0..n)
                .find(|i| !chosen.contains(i))
                .expect("k <= n leaves an unchosen index")
        };
        chosen.push(pick);
        centroids.push(x[pick].clone());
        for (i, xi) in x.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(xi, &x[pick]).into_f64());
        }
    }
    centroids
}

/// Affinity propagation configuration. `preference` defaults to the median
/// off-diagonal similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApConfig {
    pub damping: f64,
    pub preference: Option<f64>,
    pub max_iterations: usize,
    pub convergence_iterations: usize,
}

impl Default for ApConfig {
    fn default() -> Self {
        Self {
            damping: 0.9,
            preference: None,
            max_iterations: 1000,
            convergence_iterations: 50,
        }
    }
}

/// Responsibility/availability message passing on similarities
/// `s(i,j) = -||x_i - x_j||^2` over standardized features. The seed feeds
/// a vanishing symmetric perturbation of the similarities that breaks
/// degenerate ties between identical points.
pub fn affinity_propagation<F: Real>(
    data: &Dataset<F>,
    config: &ApConfig,
    seed: u64,
) -> Result<Clustering<F>> {
    let n = data.len();
    if n < 2 {
        return Err(Error::TooFewInstances { needed: 2, got: n });
    }
    if !(0.5..1.0).contains(&config.damping) {
        return Err(Error::Validation(format!(
            "damping must lie in [0.5, 1), got {}",
            config.damping
        )));
    }
    let x = standardized_rows(data);
    let mut s = vec![F::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s[i * n + j] = -sq_dist(&x[i], &x[j]);
            }
        }
    }
    let preference = match config.preference {
        Some(p) => F::from_f64(p),
        None => {
            let mut off: Vec<F> = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| s[i * n + j])
                .collect();
            off.sort_by(|a, b| a.partial_cmp(b).expect("similarities are finite"));
            let m = off.len();
            if m % 2 == 1 {
                off[m / 2]
            } else {
                (off[m / 2 - 1] + off[m / 2]) / F::from_f64(2.0)
            }
        }
    };
    for i in 0..n {
        s[i * n + i] = preference;
    }
    // tiny seeded perturbation so exact ties cannot oscillate
    let mut rng = rng_from(seed);
    let tiny = F::min_positive_value() * F::from_f64(100.0);
    for v in &mut s {
        let u = F::from_f64(rng.random::<f64>() - 0.5);
        *v += (F::epsilon() * v.abs() + tiny) * u;
    }

    let damp = F::from_f64(config.damping);
    let keep = F::one() - damp;
    let mut r = vec![F::zero(); n * n];
    let mut a = vec![F::zero(); n * n];
    let mut exemplars: Vec<usize> = Vec::new();
    let mut stable = 0usize;
    let mut converged = false;

    for _ in 0..config.max_iterations {
        // responsibilities: r(i,k) <- s(i,k) - max_{k' != k}(a(i,k') + s(i,k'))
        for i in 0..n {
            let row = i * n;
            let mut best = F::neg_infinity();
            let mut second = F::neg_infinity();
            let mut best_k = 0usize;
            for k in 0..n {
                let v = a[row + k] + s[row + k];
                if v > best {
                    second = best;
                    best = v;
                    best_k = k;
                } else if v > second {
                    second = v;
                }
            }
            for k in 0..n {
                let competitor = if k == best_k { second } else { best };
                let new = s[row + k] - competitor;
                r[row + k] = damp * r[row + k] + keep * new;
            }
        }
        // availabilities: a(i,k) <- min(0, r(k,k) + sum_{i' != i,k} max(0, r(i',k)))
        // accumulated with r(k,k) inside the column sum; starting the sum
        // from the O(1) diagonal absorbs vanishing tie-break noise exactly
        // like the reference message-passing arithmetic, which keeps
        // degenerate duplicate points from stalling on a symmetric plateau
        for k in 0..n {
            let mut col_total = F::zero();
            for i in 0..n {
                col_total += if i == k {
                    r[k * n + k]
                } else {
                    r[i * n + k].max(F::zero())
                };
            }
            for i in 0..n {
                let new = if i == k {
                    col_total - r[k * n + k]
                } else {
                    (col_total - r[i * n + k].max(F::zero())).min(F::zero())
                };
                a[i * n + k] = damp * a[i * n + k] + keep * new;
            }
        }
        let current: Vec<usize> = (0..n)
            .filter(|&k| r[k * n + k] + a[k * n + k] > F::zero())
            .collect();
        if !current.is_empty() && current == exemplars {
            stable += 1;
            if stable >= config.convergence_iterations {
                converged = true;
                break;
            }
        } else {
            stable = 0;
        }
        exemplars = current;
    }

    if exemplars.is_empty() {
        // no point ever elected itself; fall back to the strongest diagonal
        let diag: Vec<F> = (0..n).map(|k| r[k * n + k] + a[k * n + k]).collect();
        exemplars = vec![argmax_first(&diag)];
    }
    let k = exemplars.len();
    let assignments: Vec<usize> = (0..n)
        .map(|i| {
            if let Some(pos) = exemplars.iter().position(|&e| e == i) {
                return pos;
            }
            let sims: Vec<F> = exemplars.iter().map(|&e| s[i * n + e]).collect();
            argmax_first(&sims)
        })
        .collect();
    Ok(Clustering {
        assignments,
        k,
        centers: Centers::Exemplars(exemplars),
        converged,
    })
}
