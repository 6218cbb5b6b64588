//! Agreement statistics between objective scores and subjective ratings:
//! PLCC (after five-parameter logistic regression), SRCC, KRCC, and the PSNR
//! baseline.

use std::cmp::Ordering;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::image::GrayImage;

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::TooFewPoints {
            need: 2,
            got: x.len(),
        });
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pearson linear correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank-order correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Pairs within runs of equal values in a sorted sequence.
fn tied_pairs<T>(sorted: &[T], eq: impl Fn(&T, &T) -> bool) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if eq(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` in place and returns the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall tau-b with tie correction, `O(n log n)`.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as u64;
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let n0 = n * (n - 1) / 2;
    let ties_x = tied_pairs(&pairs, |a, b| a.0 == b.0);
    let ties_xy = tied_pairs(&pairs, |a, b| a.0 == b.0 && a.1 == b.1);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = Vec::with_capacity(ys.len());
    let discordant = merge_count(&mut ys, &mut buf);
    let ties_y = tied_pairs(&ys, |a, b| a == b);

    let denom = ((n0 - ties_x) as f64) * ((n0 - ties_y) as f64);
    if denom == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    // concordant - discordant over pairs untied in both coordinates
    let numer =
        n0 as f64 - ties_x as f64 - ties_y as f64 + ties_xy as f64 - 2.0 * discordant as f64;
    Ok((numer / denom.sqrt()).clamp(-1.0, 1.0))
}

/// `q(x) = b1 (1/2 - 1/(1 + exp(b2 (x - b3)))) + b4 x + b5`, with the
/// logistic saturated once `|b2 (x - b3)|` exceeds 500.
pub fn logistic5_eval(beta: &[f64; 5], x: f64) -> f64 {
    let z = beta[1] * (x - beta[2]);
    let logistic = if z > 500.0 {
        0.5
    } else if z < -500.0 {
        -0.5
    } else {
        0.5 - 1.0 / (1.0 + z.exp())
    };
    beta[0] * logistic + beta[3] * x + beta[4]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogisticFit {
    pub beta: [f64; 5],
    /// Residual sum of squares at `beta`.
    pub sse: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl LogisticFit {
    pub fn predict(&self, x: f64) -> f64 {
        logistic5_eval(&self.beta, x)
    }
}

pub const MIN_FIT_POINTS: usize = 10;
pub const MAX_FIT_ITERATIONS: usize = 20_000;
const FIT_TOLERANCE: f64 = 1e-10;
const FIT_ABS_FLOOR: f64 = 1e-30;

fn sse(beta: &[f64; 5], scores: &[f64], mos: &[f64]) -> f64 {
    let s: f64 = scores
        .iter()
        .zip(mos)
        .map(|(&x, &y)| (logistic5_eval(beta, x) - y).powi(2))
        .sum();
    if s.is_finite() {
        s
    } else {
        f64::INFINITY
    }
}

fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Least-squares `a, b` for `y ~ a f + b`; `None` when `f` is constant.
fn affine_fit(f: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let (mf, my) = (mean(f), mean(y));
    let (mut sfy, mut sff) = (0.0, 0.0);
    for (&a, &b) in f.iter().zip(y) {
        sfy += (a - mf) * (b - my);
        sff += (a - mf) * (a - mf);
    }
    (sff > 0.0).then(|| {
        let a = sfy / sff;
        (a, my - a * mf)
    })
}

struct NelderMead {
    alpha: f64,
    gamma: f64,
    rho: f64,
    sigma: f64,
}

impl NelderMead {
    const STANDARD: NelderMead = NelderMead {
        alpha: 1.0,
        gamma: 2.0,
        rho: 0.5,
        sigma: 0.5,
    };

    /// Runs until the relative SSE spread of the simplex falls below the
    /// tolerance or `budget` iterations are spent. Returns `(best, f(best),
    /// iterations, converged)`.
    fn minimize(
        &self,
        f: &impl Fn(&[f64; 5]) -> f64,
        start: [f64; 5],
        steps: [f64; 5],
        budget: usize,
        observer: &mut impl FnMut(f64),
    ) -> ([f64; 5], f64, usize, bool) {
        let mut simplex: Vec<([f64; 5], f64)> = Vec::with_capacity(6);
        simplex.push((start, f(&start)));
        for i in 0..5 {
            let mut p = start;
            p[i] += steps[i];
            simplex.push((p, f(&p)));
        }

        let mut iterations = 0;
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[5].1;
            if worst - best <= FIT_TOLERANCE * best.abs() + FIT_ABS_FLOOR {
                return (simplex[0].0, best, iterations, true);
            }
            if iterations >= budget {
                return (simplex[0].0, best, iterations, false);
            }
            iterations += 1;

            let mut centroid = [0.0; 5];
            for (p, _) in &simplex[..5] {
                for (c, v) in centroid.iter_mut().zip(p) {
                    *c += v / 5.0;
                }
            }
            let along = |t: f64| {
                let mut p = [0.0; 5];
                for i in 0..5 {
                    p[i] = centroid[i] + t * (simplex[5].0[i] - centroid[i]);
                }
                p
            };

            let reflected = along(-self.alpha);
            let fr = f(&reflected);
            if fr < simplex[0].1 {
                let expanded = along(-self.alpha * self.gamma);
                let fe = f(&expanded);
                simplex[5] = if fe < fr {
                    (expanded, fe)
                } else {
                    (reflected, fr)
                };
            } else if fr < simplex[4].1 {
                simplex[5] = (reflected, fr);
            } else {
                let (contracted, fc) = if fr < simplex[5].1 {
                    let p = along(-self.alpha * self.rho);
                    (p, f(&p))
                } else {
                    let p = along(self.rho);
                    (p, f(&p))
                };
                if fc < fr.min(simplex[5].1) {
                    simplex[5] = (contracted, fc);
                } else {
                    let anchor = simplex[0].0;
                    for (p, fp) in simplex[1..].iter_mut() {
                        for i in 0..5 {
                            p[i] = anchor[i] + self.sigma * (p[i] - anchor[i]);
                        }
                        *fp = f(p);
                    }
                }
            }
            let current = simplex.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
            observer(current);
        }
    }
}

/// Fits the five-parameter logistic to `(scores, mos)` by least squares.
pub fn logistic5_fit(scores: &[f64], mos: &[f64]) -> Result<LogisticFit> {
    fit_observed(scores, mos, &mut |_| {})
}

pub(crate) fn fit_observed(
    scores: &[f64],
    mos: &[f64],
    observer: &mut impl FnMut(f64),
) -> Result<LogisticFit> {
    if scores.len() != mos.len() {
        return Err(Error::LengthMismatch(scores.len(), mos.len()));
    }
    if scores.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            need: MIN_FIT_POINTS,
            got: scores.len(),
        });
    }
    let sx = std_dev(scores);
    if !(sx > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let (lo, hi) = mos
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    let orientation = match pearson(scores, mos) {
        Ok(r) if r < 0.0 => -1.0,
        _ => 1.0,
    };
    let start = [
        orientation * (hi - lo),
        1.0 / sx,
        mean(scores),
        0.0,
        mean(mos),
    ];
    let slope_scale = if hi > lo { (hi - lo) / (4.0 * sx) } else { 1.0 };
    let mos_scale = if hi > lo { hi - lo } else { 1.0 };
    let steps = [
        0.1 * mos_scale,
        0.1 / sx,
        0.1 * sx,
        0.1 * slope_scale,
        0.1 * mos_scale,
    ];

    let objective = |b: &[f64; 5]| sse(b, scores, mos);
    let nm = NelderMead::STANDARD;
    let mut best = start;
    let mut best_f = objective(&start);
    let mut total = 0;
    let mut converged = false;
    // restart from the best point until a fresh simplex stops improving it
    while total < MAX_FIT_ITERATIONS {
        let (p, fp, used, done) = nm.minimize(
            &objective,
            best,
            steps,
            MAX_FIT_ITERATIONS - total,
            observer,
        );
        total += used;
        let improved = fp < best_f;
        let rel_gain = if improved {
            (best_f - fp) / best_f.max(FIT_ABS_FLOOR)
        } else {
            0.0
        };
        if improved {
            best = p;
            best_f = fp;
        }
        if !done {
            break;
        }
        if rel_gain < FIT_TOLERANCE || best_f <= FIT_ABS_FLOOR || used == 0 {
            converged = true;
            break;
        }
    }

    // the optimal affine rescaling of q is inside the family and never raises SSE
    let fitted: Vec<f64> = scores.iter().map(|&x| logistic5_eval(&best, x)).collect();
    if let Some((a, b)) = affine_fit(&fitted, mos) {
        let candidate = [best[0] * a, best[1], best[2], best[3] * a, best[4] * a + b];
        let fc = objective(&candidate);
        if fc <= best_f {
            best = candidate;
            best_f = fc;
            observer(best_f);
        }
    }
    // the purely affine subfamily
    if let Some((a, b)) = affine_fit(scores, mos) {
        let candidate = [0.0, start[1], start[2], a, b];
        let fc = objective(&candidate);
        if fc < best_f {
            best = candidate;
            best_f = fc;
            observer(best_f);
        }
    }

    Ok(LogisticFit {
        beta: best,
        sse: best_f,
        converged,
        iterations: total,
    })
}

/// PLCC between MOS and the regressed scores of an existing fit.
pub fn plcc_with_fit(fit: &LogisticFit, scores: &[f64], mos: &[f64]) -> Result<f64> {
    let predicted: Vec<f64> = scores.iter().map(|&x| fit.predict(x)).collect();
    pearson(&predicted, mos)
}

pub fn plcc_after_regression(scores: &[f64], mos: &[f64]) -> Result<f64> {
    let fit = logistic5_fit(scores, mos)?;
    plcc_with_fit(&fit, scores, mos)
}

/// PSNR in dB at peak 255.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Psnr {
    /// Zero MSE.
    Identical,
    Db(f64),
}

impl Psnr {
    pub fn db(&self) -> f64 {
        match self {
            Psnr::Identical => f64::INFINITY,
            Psnr::Db(v) => *v,
        }
    }
}

impl PartialOrd for Psnr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.db().partial_cmp(&other.db())
    }
}

impl std::fmt::Display for Psnr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Psnr::Identical => f.write_str("inf"),
            Psnr::Db(v) => write!(f, "{v:.4}"),
        }
    }
}

impl Serialize for Psnr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Psnr::Identical => s.serialize_str("identical"),
            Psnr::Db(v) => s.serialize_f64(*v),
        }
    }
}

pub fn psnr(reference: &GrayImage, dist: &GrayImage) -> Result<Psnr> {
    if !reference.same_dims(dist) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", reference.width(), reference.height()),
            got: format!("{}x{}", dist.width(), dist.height()),
        });
    }
    let n = reference.data().len() as f64;
    let mse = reference
        .data()
        .iter()
        .zip(dist.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(Psnr::Identical);
    }
    Ok(Psnr::Db(10.0 * (255.0 * 255.0 / mse).log10()))
}
