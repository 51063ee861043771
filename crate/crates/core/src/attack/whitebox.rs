//! Whitebox membership inference from intermediate embeddings.
//!
//! An autoencoder squeezes each embedding row through a scalar
//! bottleneck; k-means with k=2 splits the scalar codes, and a handful of
//! anchor nodes with known membership decide which cluster means "member".
//!
//! Rows are processed in a canonical (lexicographic) order, so the result
//! does not depend on how the caller ordered the embedding matrix.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::kmeans::kmeans;
use super::AttackResult;
use crate::error::{Error, Result};
use crate::metrics::MetricBundle;
use crate::rng::{derive_seed, rng_from_seed};
use crate::tensor::{Matrix, Optimizer, Tape, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WhiteboxConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub anchor_members: usize,
    pub anchor_nonmembers: usize,
    pub seed: u64,
}

impl Default for WhiteboxConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            epochs: 200,
            learning_rate: 0.01,
            anchor_members: 10,
            anchor_nonmembers: 10,
            seed: 0,
        }
    }
}

/// Picks anchor row indices: `members` rows with `truth == true` and
/// `nonmembers` with `truth == false`, uniformly at random.
pub fn pick_anchors(
    truth: &[bool],
    members: usize,
    nonmembers: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let mut rng = rng_from_seed(derive_seed(seed, "whitebox/anchors"));
    let mut out = Vec::new();
    for (want, count) in [(true, members), (false, nonmembers)] {
        let mut pool: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] == want).collect();
        if pool.len() < count {
            return Err(Error::invalid(format!(
                "asked for {count} anchors with membership {want}, only {} available",
                pool.len()
            )));
        }
        pool.shuffle(&mut rng);
        out.extend_from_slice(&pool[..count]);
    }
    out.sort_unstable();
    Ok(out)
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn encode(tape: &mut Tape, p: &[Var], x: Var) -> Result<Var> {
    let h = tape.matmul(x, p[0])?;
    let h = tape.add_row(h, p[1])?;
    let h = tape.relu(h)?;
    let code = tape.matmul(h, p[2])?;
    tape.add_row(code, p[3])
}

fn decode(tape: &mut Tape, p: &[Var], code: Var) -> Result<Var> {
    let h = tape.matmul(code, p[4])?;
    let h = tape.add_row(h, p[5])?;
    let h = tape.relu(h)?;
    let out = tape.matmul(h, p[6])?;
    tape.add_row(out, p[7])
}

/// Trains the autoencoder on `x` and returns each row's scalar code.
fn scalar_codes(x: &Matrix, cfg: &WhiteboxConfig) -> Result<Vec<f64>> {
    let d = x.cols();
    let h = cfg.hidden;
    let mut rng = rng_from_seed(derive_seed(cfg.seed, "whitebox/autoencoder"));
    let mut params = vec![
        Matrix::glorot(d, h, &mut rng),
        Matrix::zeros(1, h),
        Matrix::glorot(h, 1, &mut rng),
        Matrix::zeros(1, 1),
        Matrix::glorot(1, h, &mut rng),
        Matrix::zeros(1, h),
        Matrix::glorot(h, d, &mut rng),
        Matrix::zeros(1, d),
    ];
    let mut opt = Optimizer::adam(cfg.learning_rate)?;
    for _ in 0..cfg.epochs {
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|m| tape.param(m.clone())).collect();
        let xv = tape.constant(x.clone());
        let code = encode(&mut tape, &vars, xv)?;
        let recon = decode(&mut tape, &vars, code)?;
        let diff = tape.sub(recon, xv)?;
        let sq = tape.mul(diff, diff)?;
        let loss = tape.mean(sq)?;
        let grads = tape.backward(loss)?.get_all(&vars)?;
        opt.step(&mut params, &grads)?;
    }
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.into_iter().map(|m| tape.constant(m)).collect();
    let xv = tape.constant(x.clone());
    let code = encode(&mut tape, &vars, xv)?;
    Ok(tape.value(code)?.data().to_vec())
}

/// Runs the attack on embedding rows with known membership `truth`.
///
/// Only rows listed in `anchors` reveal their membership to the attack;
/// metrics are computed on all other rows.
pub fn whitebox_attack(
    embeddings: &Matrix,
    truth: &[bool],
    anchors: &[usize],
    cfg: &WhiteboxConfig,
) -> Result<AttackResult> {
    let n = embeddings.rows();
    if truth.len() != n {
        return Err(Error::invalid(format!(
            "{} membership bits for {n} rows",
            truth.len()
        )));
    }
    let mut is_anchor = vec![false; n];
    for &a in anchors {
        if a >= n {
            return Err(Error::NodeOutOfRange { node: a, n });
        }
        is_anchor[a] = true;
    }
    if !anchors.iter().any(|&a| truth[a]) || !anchors.iter().any(|&a| !truth[a]) {
        return Err(Error::invalid(
            "anchors need at least one member and one non-member",
        ));
    }
    if anchors.len() >= n {
        return Err(Error::EmptyInput("no rows left after removing anchors"));
    }

    // Canonical row order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lex_cmp(embeddings.row(a), embeddings.row(b)));
    let x = embeddings.select_rows(&order);

    let sorted_codes = scalar_codes(&x, cfg)?;
    let clusters = kmeans(
        &Matrix::from_vec(n, 1, sorted_codes.clone())?,
        2,
        derive_seed(cfg.seed, "whitebox/kmeans"),
    )?;
    let mut codes = vec![0.0; n];
    let mut assign = vec![0usize; n];
    for (pos, &row) in order.iter().enumerate() {
        codes[row] = sorted_codes[pos];
        assign[row] = clusters.assignments[pos];
    }
    let centroid = [clusters.centroids[(0, 0)], clusters.centroids[(1, 0)]];

    let mut vote = [0i64; 2];
    for &a in anchors {
        vote[assign[a]] += if truth[a] { 1 } else { -1 };
    }
    let member_cluster = match vote[0].cmp(&vote[1]) {
        Ordering::Greater => 0,
        Ordering::Less => 1,
        Ordering::Equal => {
            let used: Vec<usize> = anchors.iter().map(|&a| assign[a]).collect();
            if used.iter().all(|&c| c == used[0]) {
                return Err(Error::Degenerate(
                    "all anchors fall in one cluster with a tied vote; supply more anchors".into(),
                ));
            }
            let mean_of = |want: bool| {
                let mut v: Vec<f64> = anchors
                    .iter()
                    .filter(|&&a| truth[a] == want)
                    .map(|&a| codes[a])
                    .collect();
                v.sort_by(f64::total_cmp);
                v.iter().sum::<f64>() / v.len() as f64
            };
            let (m, o) = (mean_of(true), mean_of(false));
            let keep = (centroid[0] - m).abs() + (centroid[1] - o).abs();
            let swap = (centroid[1] - m).abs() + (centroid[0] - o).abs();
            match keep.total_cmp(&swap) {
                Ordering::Less => 0,
                Ordering::Greater => 1,
                Ordering::Equal => {
                    return Err(Error::Degenerate(
                        "anchor vote is tied and cannot be broken; supply more anchors".into(),
                    ))
                }
            }
        }
    };
    let non_cluster = 1 - member_cluster;

    // Metrics are taken in canonical order too, since average precision
    // depends on the order of tied scores.
    let eval_rows: Vec<usize> = order.iter().copied().filter(|&r| !is_anchor[r]).collect();
    let scores: Vec<f64> = eval_rows
        .iter()
        .map(|&r| {
            (codes[r] - centroid[non_cluster]).abs() - (codes[r] - centroid[member_cluster]).abs()
        })
        .collect();
    let decisions: Vec<bool> = eval_rows
        .iter()
        .map(|&r| assign[r] == member_cluster)
        .collect();
    let eval_truth: Vec<bool> = eval_rows.iter().map(|&r| truth[r]).collect();
    let metrics = MetricBundle::binary(&scores, &decisions, &eval_truth)?;
    Ok(AttackResult {
        attack: "whitebox".into(),
        metrics,
        scores,
        decisions,
        truth: eval_truth,
        ..AttackResult::default()
    }
    .param("anchors", anchors.len())
    .param("autoencoder_hidden", cfg.hidden)
    .param("autoencoder_epochs", cfg.epochs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn planted(n_each: usize, gap: f64, seed: u64) -> (Matrix, Vec<bool>) {
        let mut rng = rng_from_seed(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let d = 8;
        let mut data = Vec::new();
        let mut truth = Vec::new();
        for i in 0..2 * n_each {
            let member = i % 2 == 0;
            for c in 0..d {
                let shift = if member && c == 0 { gap } else { 0.0 };
                data.push(shift + noise.sample(&mut rng));
            }
            truth.push(member);
        }
        (Matrix::from_vec(2 * n_each, d, data).unwrap(), truth)
    }

    #[test]
    fn anchors_are_balanced_and_valid() {
        let truth = [true, false, true, false, true];
        let a = pick_anchors(&truth, 2, 1, 0).unwrap();
        assert_eq!(a.iter().filter(|&&i| truth[i]).count(), 2);
        assert_eq!(a.len(), 3);
        assert!(pick_anchors(&truth, 4, 1, 0).is_err());
    }

    #[test]
    fn needs_both_anchor_kinds() {
        let (x, truth) = planted(10, 10.0, 1);
        let members: Vec<usize> = (0..20).filter(|&i| truth[i]).take(3).collect();
        assert!(whitebox_attack(&x, &truth, &members, &WhiteboxConfig::default()).is_err());
    }

    #[test]
    fn separated_gaussians_are_recovered() {
        let (x, truth) = planted(100, 10.0, 2);
        let anchors = pick_anchors(&truth, 10, 10, 2).unwrap();
        let r = whitebox_attack(&x, &truth, &anchors, &WhiteboxConfig::default()).unwrap();
        assert!(r.accuracy() >= 0.99, "{}", r.accuracy());
        assert_eq!(r.truth.len(), 180);
    }

    #[test]
    fn row_permutation_does_not_matter() {
        let (x, truth) = planted(30, 3.0, 3);
        let anchors = pick_anchors(&truth, 5, 5, 3).unwrap();
        let cfg = WhiteboxConfig {
            epochs: 50,
            ..WhiteboxConfig::default()
        };
        let base = whitebox_attack(&x, &truth, &anchors, &cfg).unwrap();

        let n = x.rows();
        let perm: Vec<usize> = (0..n).rev().collect();
        let px = x.select_rows(&perm);
        let pt: Vec<bool> = perm.iter().map(|&i| truth[i]).collect();
        let mut inv = vec![0; n];
        perm.iter()
            .enumerate()
            .for_each(|(new, &old)| inv[old] = new);
        let pa: Vec<usize> = anchors.iter().map(|&a| inv[a]).collect();
        let permuted = whitebox_attack(&px, &pt, &pa, &cfg).unwrap();
        assert_eq!(base.metrics, permuted.metrics);
    }
}
