//! Posterior prediction and performance measurement: directed and joint tie
//! probability surfaces, ranking metrics (ROC and precision-recall areas),
//! and in-/out-of-sample comparison across model variants.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gibbs::{
    means_from_parts, run_chain_masked, DyadMask, FitConfig, ModelVariant, PosteriorDraws,
};
use crate::model::{CovariateSet, ImputedCovariates, ObservedNetwork};
use crate::samplers::RngStream;
use crate::scalar::Real;
use crate::special::{bvn_orthant, norm_cdf};

/// Posterior tie-probability surfaces: `directed_prob[(i, j)]` is the
/// posterior mean probability that `i` extends a tie to `j`, and
/// `joint_prob` the symmetric posterior mean probability of observing the
/// undirected tie. Diagonals are structurally zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSurface<F: Real> {
    pub directed_prob: DMatrix<F>,
    pub joint_prob: DMatrix<F>,
}

impl<F: Real> PredictionSurface<F> {
    pub fn n_nodes(&self) -> usize {
        self.directed_prob.nrows()
    }
}

/// Average per-draw probabilities over the saved states (probabilities are
/// averaged, not systematic means). Deterministic given the draws.
pub fn predict_surface<F: Real>(
    draws: &PosteriorDraws<F>,
    cov: &CovariateSet<F>,
) -> Result<PredictionSurface<F>> {
    predict_surface_impl(draws, |_| cov)
}

/// Like [`predict_surface`], but each saved state is paired with the
/// covariate replicate its iteration used (imputation cycling).
pub fn predict_surface_multi<F: Real>(
    draws: &PosteriorDraws<F>,
    cov: &ImputedCovariates<F>,
) -> Result<PredictionSurface<F>> {
    if cov.len() == 1 {
        return predict_surface_impl(draws, |_| cov.first());
    }
    let reps: Vec<usize> = draws.traces.iter().map(|t| t.replicate).collect();
    predict_surface_impl(draws, move |state_idx| cov.replicate(reps[state_idx]))
}

fn predict_surface_impl<'a, F: Real>(
    draws: &PosteriorDraws<F>,
    cov_for: impl Fn(usize) -> &'a CovariateSet<F>,
) -> Result<PredictionSurface<F>> {
    if draws.states.is_empty() {
        return Err(Error::contract("prediction requires at least one saved draw"));
    }
    let n = draws.meta.n_nodes;
    let first = cov_for(0);
    if first.n_nodes() != n || first.p_node() != draws.meta.p_node || first.p_dyad() != draws.meta.p_dyad
    {
        return Err(Error::contract(format!(
            "covariate shape ({}, {}, {}) does not match the fitted chain ({n}, {}, {})",
            first.n_nodes(),
            first.p_node(),
            first.p_dyad(),
            draws.meta.p_node,
            draws.meta.p_dyad
        )));
    }
    let mut directed = DMatrix::<F>::zeros(n, n);
    let mut joint = DMatrix::<F>::zeros(n, n);
    for (t, snap) in draws.states.iter().enumerate() {
        let cov = cov_for(t);
        let means = means_from_parts(&snap.coef.beta_d, &snap.s, &snap.r, &snap.u, &snap.v, cov);
        let rho = snap.rho;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    directed[(i, j)] += norm_cdf(means[(i, j)]);
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let p = if rho == F::zero() {
                    norm_cdf(means[(i, j)]) * norm_cdf(means[(j, i)])
                } else {
                    bvn_orthant(means[(i, j)], means[(j, i)], rho)
                };
                joint[(i, j)] += p;
                joint[(j, i)] += p;
            }
        }
    }
    let count = F::from_usize(draws.states.len()).unwrap();
    directed /= count;
    joint /= count;
    Ok(PredictionSurface {
        directed_prob: directed,
        joint_prob: joint,
    })
}

/// Area under the ROC curve: the Mann-Whitney statistic (probability that a
/// random positive outscores a random negative, ties counted one half).
pub fn auc_roc<F: Real>(scores: &[F], labels: &[bool]) -> Result<F> {
    if scores.len() != labels.len() {
        return Err(Error::contract("scores and labels must have equal length"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "ROC area needs at least one positive and one negative label".into(),
        ));
    }
    if scores.iter().any(|s| *s != *s) {
        return Err(Error::contract("scores must not contain NaN"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    // average ranks over tie groups, accumulate positive ranks
    let mut rank_sum_pos = 0.0f64;
    let mut idx = 0;
    while idx < order.len() {
        let mut end = idx + 1;
        while end < order.len() && scores[order[end]] == scores[order[idx]] {
            end += 1;
        }
        let avg_rank = (idx + 1 + end) as f64 / 2.0; // ranks are 1-based
        for &item in &order[idx..end] {
            if labels[item] {
                rank_sum_pos += avg_rank;
            }
        }
        idx = end;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(F::of(u / (n_pos as f64 * n_neg as f64)))
}

/// Area under the precision-recall step curve by the average-precision
/// summation over a descending-score sweep (tied scores form one step).
pub fn auc_pr<F: Real>(scores: &[F], labels: &[bool]) -> Result<F> {
    if scores.len() != labels.len() {
        return Err(Error::contract("scores and labels must have equal length"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Err(Error::UndefinedMetric(
            "PR area needs at least one positive label".into(),
        ));
    }
    if scores.iter().any(|s| *s != *s) {
        return Err(Error::contract("scores must not contain NaN"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut ap = 0.0f64;
    let mut idx = 0;
    while idx < order.len() {
        let mut end = idx + 1;
        while end < order.len() && scores[order[end]] == scores[order[idx]] {
            end += 1;
        }
        let tp_in_group = order[idx..end].iter().filter(|&&i| labels[i]).count();
        tp += tp_in_group;
        seen += end - idx;
        if tp_in_group > 0 {
            let precision = tp as f64 / seen as f64;
            let recall_gain = tp_in_group as f64 / n_pos as f64;
            ap += precision * recall_gain;
        }
        idx = end;
    }
    Ok(F::of(ap))
}

/// Evaluation sample: dyads the chain saw versus dyads hidden from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    InSample,
    OutOfSample,
}

impl SampleKind {
    pub fn label(self) -> &'static str {
        match self {
            SampleKind::InSample => "in",
            SampleKind::OutOfSample => "out",
        }
    }
}

/// Ranking quality of one variant on one evaluation sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfReport<F: Real> {
    pub variant: ModelVariant,
    pub sample: SampleKind,
    pub auc_roc: F,
    pub auc_pr: F,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Holdout design: the fraction of unordered dyads hidden from training,
/// stratified by outcome, and the split seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldoutSpec {
    pub frac: f64,
    pub seed: u64,
}

impl Default for HoldoutSpec {
    fn default() -> Self {
        HoldoutSpec { frac: 0.1, seed: 0 }
    }
}

/// Build the stratified holdout mask: `frac` of the tie dyads and `frac` of
/// the non-tie dyads, leaving at least one of each class on both sides.
pub fn holdout_mask(net: &ObservedNetwork, spec: &HoldoutSpec) -> Result<DyadMask> {
    if !(spec.frac > 0.0 && spec.frac < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "holdout fraction must lie in (0, 1), got {}",
            spec.frac
        )));
    }
    let n = net.n_nodes();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if net.tie(i, j) {
                pos.push((i, j));
            } else {
                neg.push((i, j));
            }
        }
    }
    if pos.len() < 2 || neg.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "degenerate split: need at least two dyads of each outcome, have {} ties and {} non-ties",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = RngStream::new(spec.seed, 0x51D);
    let mut mask = DyadMask::none(n);
    for class in [&mut pos, &mut neg] {
        // Fisher-Yates, then take the stratified share
        for k in (1..class.len()).rev() {
            let swap = rng.random_range(0..=k);
            class.swap(k, swap);
        }
        let want = ((class.len() as f64 * spec.frac).round() as usize).clamp(1, class.len() - 1);
        for &(i, j) in class.iter().take(want) {
            mask.hide(i, j);
        }
    }
    Ok(mask)
}

/// Undirected score of one unordered dyad under one posterior: the joint
/// tie probability for the latent-effect variants, the fitted probit
/// probability for the pooled baseline.
fn dyad_scores<F: Real>(
    surface: &PredictionSurface<F>,
    variant: ModelVariant,
    pairs: &[(usize, usize)],
) -> Vec<F> {
    pairs
        .iter()
        .map(|&(i, j)| match variant {
            ModelVariant::PooledProbit => surface.directed_prob[(i.min(j), i.max(j))],
            _ => surface.joint_prob[(i, j)],
        })
        .collect()
}

/// Fit every supplied configuration on the training split and report ROC
/// and PR areas on both the training dyads and the held-out dyads.
///
/// Held-out dyads contribute nothing to estimation; their scores use the
/// node effects fitted from the rest of the network.
pub fn evaluate_variants<F: Real>(
    net: &ObservedNetwork,
    cov: &ImputedCovariates<F>,
    cfgs: &[FitConfig<F>],
    split: &HoldoutSpec,
) -> Result<Vec<PerfReport<F>>> {
    let mask = holdout_mask(net, split)?;
    let n = net.n_nodes();
    let mut train_pairs = Vec::new();
    let mut held_pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if mask.is_hidden(i, j) {
                held_pairs.push((i, j));
            } else {
                train_pairs.push((i, j));
            }
        }
    }
    let labels_of = |pairs: &[(usize, usize)]| -> Vec<bool> {
        pairs.iter().map(|&(i, j)| net.tie(i, j)).collect()
    };
    let train_labels = labels_of(&train_pairs);
    let held_labels = labels_of(&held_pairs);

    let mut reports = Vec::with_capacity(cfgs.len() * 2);
    for cfg in cfgs {
        let draws = run_chain_masked(net, cov, cfg, &mask).map_err(|f| f.error.clone())?;
        let surface = predict_surface_multi(&draws, cov)?;
        for (pairs, labels, sample) in [
            (&train_pairs, &train_labels, SampleKind::InSample),
            (&held_pairs, &held_labels, SampleKind::OutOfSample),
        ] {
            let scores = dyad_scores(&surface, cfg.variant, pairs);
            reports.push(PerfReport {
                variant: cfg.variant,
                sample,
                auc_roc: auc_roc(&scores, labels)?,
                auc_pr: auc_pr(&scores, labels)?,
                n_pos: labels.iter().filter(|&&l| l).count(),
                n_neg: labels.iter().filter(|&&l| !l).count(),
            });
        }
    }
    Ok(reports)
}

/// One row of the latent-dimension selection table.
#[derive(Debug, Clone, PartialEq)]
pub struct KSelectionRow<F: Real> {
    pub k_dim: usize,
    pub auc_roc: F,
    pub auc_pr: F,
}

/// In-sample fit for each candidate latent dimension: one full-data fit per
/// K, scored on every observed dyad.
pub fn k_selection_table<F: Real>(
    net: &ObservedNetwork,
    cov: &ImputedCovariates<F>,
    cfg: &FitConfig<F>,
    k_values: &[usize],
) -> Result<Vec<KSelectionRow<F>>> {
    if k_values.is_empty() {
        return Err(Error::contract("at least one latent dimension is required"));
    }
    let n = net.n_nodes();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }
    let labels: Vec<bool> = pairs.iter().map(|&(i, j)| net.tie(i, j)).collect();
    let mut rows = Vec::with_capacity(k_values.len());
    let mut sorted = k_values.to_vec();
    sorted.sort_unstable();
    for k in sorted {
        let k_cfg = cfg.clone().with_k(k);
        let draws = run_chain_masked(net, cov, &k_cfg, &DyadMask::none(n))
            .map_err(|f| f.error.clone().at(format!("K = {k}")))?;
        let surface = predict_surface_multi(&draws, cov)?;
        let scores = dyad_scores(&surface, k_cfg.variant, &pairs);
        rows.push(KSelectionRow {
            k_dim: k,
            auc_roc: auc_roc(&scores, &labels).map_err(|e| e.at(format!("K = {k}")))?,
            auc_pr: auc_pr(&scores, &labels).map_err(|e| e.at(format!("K = {k}")))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::{FitMeta, StateSnapshot, TraceRow};
    use crate::model::RegressionCoefficients;
    use approx::assert_relative_eq;
    use nalgebra::{DVector, Matrix2};

    #[test]
    fn roc_hand_examples() {
        // brute force over the 4 positive-negative pairs gives 3/4
        let scores = [0.1f64, 0.4, 0.35, 0.8];
        let labels = [false, false, true, true];
        assert_relative_eq!(auc_roc(&scores, &labels).unwrap(), 0.75);

        let perfect = [0.9f64, 0.8, 0.2, 0.1];
        let plabels = [true, true, false, false];
        assert_relative_eq!(auc_roc(&perfect, &plabels).unwrap(), 1.0);
    }

    #[test]
    fn roc_chance_level_for_random_scores() {
        let mut rng = RngStream::new(4, 0);
        let n = 20_000;
        let scores: Vec<f64> = (0..n).map(|_| Real::unit_uniform(&mut rng)).collect();
        let labels: Vec<bool> = (0..n).map(|_| <f64 as Real>::unit_uniform(&mut rng) < 0.3).collect();
        let auc: f64 = auc_roc(&scores, &labels).unwrap();
        assert!((auc - 0.5).abs() < 0.02, "auc={auc}");
    }

    #[test]
    fn roc_tie_handling_counts_half() {
        // all scores equal: every comparison is a tie -> 0.5 exactly
        let scores = [0.7f64; 6];
        let labels = [true, false, true, false, false, true];
        assert_relative_eq!(auc_roc(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn roc_undefined_for_single_class() {
        let scores = [0.1f64, 0.2];
        assert!(matches!(
            auc_roc(&scores, &[true, true]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn roc_monotone_invariance_and_complement() {
        let scores = [0.11f64, 0.52, 0.34, 0.76, 0.09, 0.66];
        let labels = [false, true, false, true, false, true];
        let base: f64 = auc_roc(&scores, &labels).unwrap();
        let squashed: Vec<f64> = scores.iter().map(|s| (5.0 * s).tanh()).collect();
        assert_relative_eq!(auc_roc(&squashed, &labels).unwrap(), base, epsilon = 1e-12);
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        assert_relative_eq!(auc_roc(&negated, &labels).unwrap(), 1.0 - base, epsilon = 1e-12);
    }

    #[test]
    fn pr_hand_examples() {
        // descending sweep: hits at ranks 1 and 3 -> (1 + 2/3)/2
        let scores = [0.9f64, 0.8, 0.7, 0.6];
        let labels = [true, false, true, false];
        assert_relative_eq!(auc_pr(&scores, &labels).unwrap(), (1.0 + 2.0 / 3.0) / 2.0);

        let perfect = [0.9f64, 0.8, 0.2, 0.1];
        let plabels = [true, true, false, false];
        assert_relative_eq!(auc_pr(&perfect, &plabels).unwrap(), 1.0);
    }

    #[test]
    fn pr_baseline_equals_prevalence() {
        let mut rng = RngStream::new(5, 0);
        let n = 20_000;
        let prevalence = 0.2;
        let scores: Vec<f64> = (0..n).map(|_| Real::unit_uniform(&mut rng)).collect();
        let labels: Vec<bool> = (0..n)
            .map(|_| <f64 as Real>::unit_uniform(&mut rng) < prevalence)
            .collect();
        let ap: f64 = auc_pr(&scores, &labels).unwrap();
        assert!((ap - prevalence).abs() < 0.03, "ap={ap}");
    }

    #[test]
    fn pr_undefined_without_positives() {
        let scores = [0.4f64, 0.5];
        assert!(matches!(
            auc_pr(&scores, &[false, false]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    fn snapshot_with_intercept(n: usize, value: f64) -> StateSnapshot<f64> {
        StateSnapshot {
            coef: RegressionCoefficients {
                beta_s: DVector::zeros(0),
                beta_r: DVector::zeros(0),
                beta_d: DVector::from_row_slice(&[value]),
            },
            a: DVector::zeros(n),
            b: DVector::zeros(n),
            s: DVector::zeros(n),
            r: DVector::zeros(n),
            sigma_ab: Matrix2::identity(),
            u: DMatrix::zeros(n, 0),
            v: DMatrix::zeros(n, 0),
            sigma_u2: 1.0,
            sigma_v2: 1.0,
            rho: 0.0,
        }
    }

    fn draws_from_snapshots(n: usize, snaps: Vec<StateSnapshot<f64>>) -> PosteriorDraws<f64> {
        let traces: Vec<TraceRow<f64>> = snaps
            .iter()
            .enumerate()
            .map(|(t, s)| TraceRow {
                iteration: t + 1,
                replicate: 0,
                beta_d: s.coef.beta_d.iter().copied().collect(),
                beta_s: vec![],
                beta_r: vec![],
                sigma_a2: 1.0,
                sigma_b2: 1.0,
                sigma_ab_cov: 0.0,
                sigma_u2: 1.0,
                sigma_v2: 1.0,
                rho: None,
            })
            .collect();
        PosteriorDraws {
            states: snaps,
            traces,
            meta: FitMeta {
                config: FitConfig::new(0),
                n_nodes: n,
                p_node: 0,
                p_dyad: 1,
                replicate_indices: vec![],
            },
        }
    }

    fn intercept_cov(n: usize) -> CovariateSet<f64> {
        CovariateSet::new(
            DMatrix::zeros(n, 0),
            vec![DMatrix::from_element(n, n, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn surface_zero_means_gives_half_and_quarter() {
        let n = 4;
        let draws = draws_from_snapshots(n, vec![snapshot_with_intercept(n, 0.0)]);
        let surface = predict_surface(&draws, &intercept_cov(n)).unwrap();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    assert_relative_eq!(surface.directed_prob[(i, j)], 0.5);
                    assert_relative_eq!(surface.joint_prob[(i, j)], 0.25);
                }
            }
        }
    }

    #[test]
    fn surface_averages_probabilities_not_means() {
        // one draw at +10 and one at -10: probability averaging gives 0.5,
        // mean averaging would give Phi(0) = 0.5 for directed but 0.25 for
        // joint; the probability average of the joint is ~0.5
        let n = 3;
        let draws = draws_from_snapshots(
            n,
            vec![snapshot_with_intercept(n, 10.0), snapshot_with_intercept(n, -10.0)],
        );
        let surface = predict_surface(&draws, &intercept_cov(n)).unwrap();
        assert_relative_eq!(surface.directed_prob[(0, 1)], 0.5, epsilon = 1e-9);
        assert_relative_eq!(surface.joint_prob[(0, 1)], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn surface_is_symmetric_and_bounded() {
        let n = 10;
        let net_cov = crate::synthdata::SimSpec::<f64>::default();
        let mut spec = net_cov;
        spec.n_nodes = n;
        let mut rng = RngStream::new(20, 0);
        let (d, cov, _) = crate::synthdata::generate_directed(&spec, &mut rng);
        let net = crate::synthdata::mask_undirected(&d).unwrap();
        let cfg = FitConfig::new(2).with_schedule(40, 20, 2);
        let draws = crate::gibbs::run_chain(&net, &ImputedCovariates::single(cov.clone()), &cfg)
            .unwrap();
        let surface = predict_surface(&draws, &cov).unwrap();
        assert_eq!(surface.joint_prob, surface.joint_prob.transpose());
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d_ij = surface.directed_prob[(i, j)];
                let d_ji = surface.directed_prob[(j, i)];
                let joint = surface.joint_prob[(i, j)];
                assert!((0.0..=1.0).contains(&d_ij));
                assert!(joint <= d_ij.min(d_ji) + 1e-9, "joint bound violated");
            }
        }
    }

    #[test]
    fn surface_rejects_mismatched_covariates() {
        let n = 4;
        let draws = draws_from_snapshots(n, vec![snapshot_with_intercept(n, 0.0)]);
        let wrong = intercept_cov(n + 1);
        assert!(predict_surface(&draws, &wrong).is_err());
    }

    #[test]
    fn joint_probability_calibrates_against_the_generator() {
        // score every dyad with the true-parameter joint probability and
        // compare against the empirical undirected outcome in bins
        let mut spec = crate::synthdata::SimSpec::<f64>::default();
        spec.n_nodes = 320; // ~51k dyads
        let mut rng = RngStream::new(8, 0);
        let (d, cov, truth) = crate::synthdata::generate_directed(&spec, &mut rng);
        let net = crate::synthdata::mask_undirected(&d).unwrap();
        let means = crate::gibbs::systematic_means(&truth, &cov);
        let mut bins = vec![(0.0f64, 0.0f64, 0usize); 10];
        for i in 0..spec.n_nodes {
            for j in (i + 1)..spec.n_nodes {
                let p = crate::model::joint_tie_probability(means[(i, j)], means[(j, i)], 0.0)
                    .unwrap();
                let bin = ((p * 10.0) as usize).min(9);
                bins[bin].0 += p;
                bins[bin].1 += f64::from(u8::from(net.tie(i, j)));
                bins[bin].2 += 1;
            }
        }
        for (b, &(psum, ysum, count)) in bins.iter().enumerate() {
            if count < 500 {
                continue; // skip sparsely populated bins
            }
            let gap = (psum / count as f64 - ysum / count as f64).abs();
            assert!(gap < 0.02, "bin {b}: calibration gap {gap} over {count} dyads");
        }
    }

    #[test]
    fn holdout_mask_is_stratified_and_deterministic() {
        let mut spec = crate::synthdata::SimSpec::<f64>::default();
        spec.n_nodes = 30;
        let mut rng = RngStream::new(14, 0);
        let (d, _, _) = crate::synthdata::generate_directed(&spec, &mut rng);
        let net = crate::synthdata::mask_undirected(&d).unwrap();
        let split = HoldoutSpec { frac: 0.1, seed: 5 };
        let m1 = holdout_mask(&net, &split).unwrap();
        let m2 = holdout_mask(&net, &split).unwrap();
        assert_eq!(m1, m2);
        let held = m1.hidden_pairs();
        let held_pos = held.iter().filter(|&&(i, j)| net.tie(i, j)).count();
        let held_neg = held.len() - held_pos;
        assert!(held_pos >= 1 && held_neg >= 1);
        let total_pairs = 30 * 29 / 2;
        assert!((held.len() as f64 / total_pairs as f64 - 0.1).abs() < 0.03);
    }

    #[test]
    fn evaluate_variants_reports_all_cells_deterministically() {
        let mut spec = crate::synthdata::SimSpec::<f64>::default();
        spec.n_nodes = 20;
        let mut rng = RngStream::new(15, 0);
        let (d, cov, _) = crate::synthdata::generate_directed(&spec, &mut rng);
        let net = crate::synthdata::mask_undirected(&d).unwrap();
        let cov = ImputedCovariates::single(cov);
        let cfgs = vec![
            FitConfig::new(3).with_schedule(60, 30, 3),
            FitConfig::new(3)
                .with_schedule(60, 30, 3)
                .with_variant(ModelVariant::PooledProbit),
        ];
        let split = HoldoutSpec { frac: 0.15, seed: 2 };
        let r1 = evaluate_variants(&net, &cov, &cfgs, &split).unwrap();
        let r2 = evaluate_variants(&net, &cov, &cfgs, &split).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.len(), 4);
        for rep in &r1 {
            assert!((0.0..=1.0).contains(&rep.auc_roc));
            assert!((0.0..=1.0).contains(&rep.auc_pr));
            assert!(rep.n_pos >= 1 && rep.n_neg >= 1);
        }
        assert_eq!(r1[0].sample, SampleKind::InSample);
        assert_eq!(r1[1].sample, SampleKind::OutOfSample);
    }

    #[test]
    fn k_selection_single_value_gives_single_row() {
        let mut spec = crate::synthdata::SimSpec::<f64>::default();
        spec.n_nodes = 14;
        let mut rng = RngStream::new(16, 0);
        let (d, cov, _) = crate::synthdata::generate_directed(&spec, &mut rng);
        let net = crate::synthdata::mask_undirected(&d).unwrap();
        let cfg = FitConfig::new(4).with_schedule(40, 20, 2);
        let rows =
            k_selection_table(&net, &ImputedCovariates::single(cov), &cfg, &[2]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].k_dim, 2);
    }
}
