//! The full Markov chain: latent-utility updates under partial
//! observability, additive-effect and coefficient updates with hierarchical
//! centering, covariance and latent-space variance updates, multiplicative
//! effect updates, imputation cycling, burn-in/thinning, and the baseline
//! variants (directed-treatment GBME and pooled probit).

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{
    AdditiveEffects, CovariateSet, ImputedCovariates, LatentUtilities, MultiplicativeEffects,
    ObservedNetwork, RegressionCoefficients,
};
use crate::samplers::{
    draw_inverse_gamma, draw_inverse_wishart, draw_latent_pair_warm, draw_mvnorm_prec,
    draw_truncnorm, RngStream, TruncRegion,
};
use crate::scalar::Real;
use crate::special::{norm_cdf, norm_pdf};

/// Which likelihood the chain targets.
///
/// - `Pgbme`: the partial-observability model; an undirected tie constrains
///   both directed utilities to be positive and its absence constrains at
///   least one to be negative.
/// - `Gbme`: ignores partial observability by treating the undirected tie
///   as two identical directed observations with one-sided truncation.
/// - `PooledProbit`: one latent scalar per dyad regressed on nodal sums and
///   dyadic covariates, with no random effects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelVariant {
    Pgbme,
    Gbme,
    PooledProbit,
}

impl ModelVariant {
    pub fn label(self) -> &'static str {
        match self {
            ModelVariant::Pgbme => "pgbme",
            ModelVariant::Gbme => "gbme",
            ModelVariant::PooledProbit => "probit",
        }
    }
}

/// Chain configuration and priors.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig<F: Real> {
    pub k_dim: usize,
    pub n_iter: usize,
    pub n_burn: usize,
    pub thin: usize,
    pub estimate_rho: bool,
    pub variant: ModelVariant,
    /// Prior variance of every regression coefficient (diagonal prior).
    pub prior_beta_var: F,
    /// Inverse Wishart prior scale for the additive-effect covariance.
    pub prior_sigma_ab_scale: Matrix2<F>,
    /// Inverse Wishart prior degrees of freedom.
    pub prior_sigma_ab_dof: F,
    /// Inverse gamma prior (shape, rate) for the latent-space variances.
    pub prior_ig_shape: F,
    pub prior_ig_rate: F,
    pub seed: u64,
}

impl<F: Real> FitConfig<F> {
    /// Defaults: K = 2, 20,000 iterations with 10,000 burn-in thinned by 10,
    /// coefficient prior variance 10, inverse Wishart (I, 4), inverse
    /// gamma (1, 1), reciprocity fixed at zero.
    pub fn new(seed: u64) -> Self {
        FitConfig {
            k_dim: 2,
            n_iter: 20_000,
            n_burn: 10_000,
            thin: 10,
            estimate_rho: false,
            variant: ModelVariant::Pgbme,
            prior_beta_var: F::of(10.0),
            prior_sigma_ab_scale: Matrix2::identity(),
            prior_sigma_ab_dof: F::of(4.0),
            prior_ig_shape: F::one(),
            prior_ig_rate: F::one(),
            seed,
        }
    }

    /// Shortened schedule helper for tests and desk-scale studies.
    pub fn with_schedule(mut self, n_iter: usize, n_burn: usize, thin: usize) -> Self {
        self.n_iter = n_iter;
        self.n_burn = n_burn;
        self.thin = thin;
        self
    }

    pub fn with_variant(mut self, variant: ModelVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_k(mut self, k_dim: usize) -> Self {
        self.k_dim = k_dim;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_burn >= self.n_iter {
            return Err(Error::InvalidConfig(format!(
                "burn-in ({}) must be smaller than the iteration count ({})",
                self.n_burn, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thinning stride must be >= 1".into()));
        }
        if !(self.prior_beta_var > F::zero()) {
            return Err(Error::InvalidConfig("coefficient prior variance must be > 0".into()));
        }
        if !(self.prior_ig_shape > F::zero()) || !(self.prior_ig_rate > F::zero()) {
            return Err(Error::InvalidConfig("inverse gamma prior must be positive".into()));
        }
        if !(self.prior_sigma_ab_dof > F::one()) {
            return Err(Error::InvalidConfig(
                "inverse Wishart dof must exceed the dimension minus one".into(),
            ));
        }
        Ok(())
    }

    /// Number of states the schedule will save.
    pub fn n_saved(&self) -> usize {
        (self.n_iter - self.n_burn) / self.thin
    }

    /// Latent dimension actually carried by the state.
    fn effective_k(&self) -> usize {
        match self.variant {
            ModelVariant::PooledProbit => 0,
            _ => self.k_dim,
        }
    }
}

/// Marks unordered dyads whose outcomes are hidden from the chain
/// (used for out-of-sample evaluation).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadMask {
    n: usize,
    missing: Vec<bool>,
}

impl DyadMask {
    pub fn none(n: usize) -> Self {
        DyadMask {
            n,
            missing: vec![false; n * n],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn hide(&mut self, i: usize, j: usize) {
        assert!(i != j && i < self.n && j < self.n);
        self.missing[i * self.n + j] = true;
        self.missing[j * self.n + i] = true;
    }

    #[inline]
    pub fn is_hidden(&self, i: usize, j: usize) -> bool {
        self.missing[i * self.n + j]
    }

    pub fn n_hidden_pairs(&self) -> usize {
        let mut count = 0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                count += usize::from(self.missing[i * self.n + j]);
            }
        }
        count
    }

    /// Unordered hidden pairs `(i, j)` with `i < j`.
    pub fn hidden_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.missing[i * self.n + j] {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// One full MCMC state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<F: Real> {
    pub coef: RegressionCoefficients<F>,
    pub additive: AdditiveEffects<F>,
    pub multiplicative: MultiplicativeEffects<F>,
    pub latent: LatentUtilities<F>,
}

impl<F: Real> ModelState<F> {
    pub fn n_nodes(&self) -> usize {
        self.additive.a.len()
    }

    pub fn rho(&self) -> F {
        self.latent.rho
    }
}

/// Thinned posterior snapshot: every parameter block except the latent
/// utilities (which are data-augmentation variables, not parameters).
#[derive(Debug, Clone, PartialEq)]
pub struct StateSnapshot<F: Real> {
    pub coef: RegressionCoefficients<F>,
    pub a: DVector<F>,
    pub b: DVector<F>,
    pub s: DVector<F>,
    pub r: DVector<F>,
    pub sigma_ab: Matrix2<F>,
    pub u: DMatrix<F>,
    pub v: DMatrix<F>,
    pub sigma_u2: F,
    pub sigma_v2: F,
    pub rho: F,
}

impl<F: Real> StateSnapshot<F> {
    fn of(state: &ModelState<F>) -> Self {
        StateSnapshot {
            coef: state.coef.clone(),
            a: state.additive.a.clone(),
            b: state.additive.b.clone(),
            s: state.additive.s.clone(),
            r: state.additive.r.clone(),
            sigma_ab: state.additive.sigma_ab,
            u: state.multiplicative.u.clone(),
            v: state.multiplicative.v.clone(),
            sigma_u2: state.multiplicative.sigma_u2,
            sigma_v2: state.multiplicative.sigma_v2,
            rho: state.latent.rho,
        }
    }
}

/// Scalar trace values for one saved iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow<F: Real> {
    pub iteration: usize,
    pub replicate: usize,
    pub beta_d: Vec<F>,
    pub beta_s: Vec<F>,
    pub beta_r: Vec<F>,
    pub sigma_a2: F,
    pub sigma_b2: F,
    pub sigma_ab_cov: F,
    pub sigma_u2: F,
    pub sigma_v2: F,
    pub rho: Option<F>,
}

/// Chain metadata sufficient to reproduce a run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitMeta<F: Real> {
    pub config: FitConfig<F>,
    pub n_nodes: usize,
    pub p_node: usize,
    pub p_dyad: usize,
    /// Covariate replicate used at each iteration (imputation cycling).
    pub replicate_indices: Vec<usize>,
}

/// Thinned chain of snapshots plus scalar traces and run metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws<F: Real> {
    pub states: Vec<StateSnapshot<F>>,
    pub traces: Vec<TraceRow<F>>,
    pub meta: FitMeta<F>,
}

impl<F: Real> PosteriorDraws<F> {
    pub fn n_saved(&self) -> usize {
        self.states.len()
    }
}

/// A chain abort: the failing iteration and step, the underlying error, and
/// every draw saved before the failure.
#[derive(Debug)]
pub struct ChainFailure<F: Real> {
    pub iteration: usize,
    pub step: &'static str,
    pub error: Error,
    pub partial: PosteriorDraws<F>,
}

impl<F: Real> std::fmt::Display for ChainFailure<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "chain failed at iteration {} during step '{}': {}",
            self.iteration, self.step, self.error
        )
    }
}

impl<F: Real> std::error::Error for ChainFailure<F> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Systematic mean of every ordered dyad:
/// `beta_d . x_ij + s_i + r_j + u_i . v_j` (diagonal slots are zeroed and
/// never read).
pub fn systematic_means<F: Real>(state: &ModelState<F>, cov: &CovariateSet<F>) -> DMatrix<F> {
    means_from_parts(
        &state.coef.beta_d,
        &state.additive.s,
        &state.additive.r,
        &state.multiplicative.u,
        &state.multiplicative.v,
        cov,
    )
}

/// Systematic means computed from snapshot parts (shared by the live chain
/// and posterior prediction).
pub(crate) fn means_from_parts<F: Real>(
    beta_d: &DVector<F>,
    s: &DVector<F>,
    r: &DVector<F>,
    u: &DMatrix<F>,
    v: &DMatrix<F>,
    cov: &CovariateSet<F>,
) -> DMatrix<F> {
    let n = s.len();
    let mut m = DMatrix::<F>::zeros(n, n);
    for (k, xk) in cov.dyad_x().iter().enumerate() {
        let beta = beta_d[k];
        m.zip_apply(xk, |acc, x| *acc += beta * x);
    }
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] += s[i] + r[j];
        }
    }
    m += u * v.transpose();
    for i in 0..n {
        m[(i, i)] = F::zero();
    }
    m
}

/// Means without the multiplicative term: `beta_d . x_ij + s_i + r_j`.
fn base_means<F: Real>(state: &ModelState<F>, cov: &CovariateSet<F>) -> DMatrix<F> {
    let n = state.n_nodes();
    let mut m = DMatrix::<F>::zeros(n, n);
    for (k, xk) in cov.dyad_x().iter().enumerate() {
        let beta = state.coef.beta_d[k];
        m.zip_apply(xk, |acc, x| *acc += beta * x);
    }
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] += state.additive.s[i] + state.additive.r[j];
        }
    }
    m
}

/// Pooled-probit design row for the unordered pair `{i < j}`:
/// dyadic covariates at `(i, j)` followed by nodal sums `x_i + x_j`.
fn pooled_row<F: Real>(cov: &CovariateSet<F>, i: usize, j: usize) -> DVector<F> {
    let (pd, pn) = (cov.p_dyad(), cov.p_node());
    let mut row = DVector::<F>::zeros(pd + pn);
    for k in 0..pd {
        row[k] = cov.dyad_value(k, i, j);
    }
    for k in 0..pn {
        row[pd + k] = cov.node_x()[(i, k)] + cov.node_x()[(j, k)];
    }
    row
}

/// Coefficient magnitude cap applied during the probit initializer, which
/// keeps complete-separation fits finite.
const MLE_CAP: f64 = 5.0;

/// Pooled-probit maximum likelihood estimate over unordered dyads, used for
/// starting values. Returns the coefficient vector over
/// `[dyadic covariates, nodal sums]`.
fn pooled_probit_mle<F: Real>(
    net: &ObservedNetwork,
    cov: &CovariateSet<F>,
    mask: &DyadMask,
) -> Result<DVector<F>> {
    let n = net.n_nodes();
    let q = cov.p_dyad() + cov.p_node();
    let mut beta = DVector::<F>::zeros(q);
    let cap = F::of(MLE_CAP);
    let eta_cap = F::of(8.0);
    let mu_floor = F::of(1e-9);

    for _ in 0..60 {
        let mut xtwx = DMatrix::<F>::zeros(q, q);
        let mut xtwz = DVector::<F>::zeros(q);
        for i in 0..n {
            for j in (i + 1)..n {
                if mask.is_hidden(i, j) {
                    continue;
                }
                let row = pooled_row(cov, i, j);
                let eta = row.dot(&beta).clamp(-eta_cap, eta_cap);
                let mu = norm_cdf(eta).clamp(mu_floor, F::one() - mu_floor);
                let dens = norm_pdf(eta);
                let w = dens * dens / (mu * (F::one() - mu));
                let y = if net.tie(i, j) { F::one() } else { F::zero() };
                let work = eta + (y - mu) / dens;
                for a in 0..q {
                    for b in 0..q {
                        xtwx[(a, b)] += w * row[a] * row[b];
                    }
                    xtwz[a] += w * row[a] * work;
                }
            }
        }
        for k in 0..q {
            xtwx[(k, k)] += F::of(1e-8);
        }
        let l = crate::linalg::cholesky_lower(&xtwx).map_err(|_| Error::SingularSystem {
            block: "pooled probit initializer design".into(),
        })?;
        let mut next = crate::linalg::spd_solve_with(&l, &xtwz);
        for k in 0..q {
            next[k] = next[k].clamp(-cap, cap);
            if !next[k].is_finite() {
                return Err(Error::SingularSystem {
                    block: "pooled probit initializer diverged".into(),
                });
            }
        }
        let delta = (&next - &beta).amax();
        beta = next;
        if delta < F::of(1e-9) {
            break;
        }
    }
    Ok(beta)
}

fn init_state_inner<F: Real>(
    net: &ObservedNetwork,
    cov: &CovariateSet<F>,
    cfg: &FitConfig<F>,
    mask: &DyadMask,
) -> ModelState<F> {
    let n = net.n_nodes();
    let (pd, pn) = (cov.p_dyad(), cov.p_node());

    let mut coef = RegressionCoefficients::zeros(pn, pd);
    match pooled_probit_mle(net, cov, mask) {
        Ok(theta) => {
            for k in 0..pd {
                coef.beta_d[k] = theta[k];
            }
            for k in 0..pn {
                coef.beta_s[k] = theta[pd + k];
                coef.beta_r[k] = theta[pd + k];
            }
        }
        Err(e) => {
            log::warn!("probit starting-value fit failed ({e}); using zero coefficients");
        }
    }

    let mut additive = AdditiveEffects::zeros(n);
    additive.sigma_ab = cfg.prior_sigma_ab_scale;
    for i in 0..n {
        additive.s[i] = cov.node_dot(&coef.beta_s, i);
        additive.r[i] = cov.node_dot(&coef.beta_r, i);
    }

    let multiplicative = MultiplicativeEffects::zeros(n, cfg.effective_k());

    let mut latent = LatentUtilities::zeros(n);
    let half = F::of(0.5);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            latent.z[(i, j)] = if !mask.is_hidden(i, j) && net.tie(i, j) {
                half
            } else {
                -half
            };
        }
    }

    ModelState {
        coef,
        additive,
        multiplicative,
        latent,
    }
}

/// Build the initial state: coefficients from a pooled-probit maximum
/// likelihood fit (zeroed with a logged warning on divergence), random
/// effects at zero, and latent utilities set consistent with the data.
/// Deterministic given `(net, cov, cfg)`.
pub fn init_state<F: Real>(
    net: &ObservedNetwork,
    cov: &CovariateSet<F>,
    cfg: &FitConfig<F>,
    _rng: &mut RngStream,
) -> ModelState<F> {
    init_state_inner(net, cov, cfg, &DyadMask::none(net.n_nodes()))
}

/// Redraw every latent utility from its full conditional given the data.
///
/// Under `Pgbme` the pair for each observed dyad is drawn jointly from the
/// bivariate normal restricted to the region its outcome implies. `Gbme`
/// treats the undirected outcome as two directed observations with
/// independent one-sided truncation, and `PooledProbit` maintains a single
/// latent scalar per dyad.
pub fn update_latent<F: Real>(
    state: &mut ModelState<F>,
    net: &ObservedNetwork,
    cov: &CovariateSet<F>,
    cfg: &FitConfig<F>,
    mask: &DyadMask,
    rng: &mut RngStream,
) -> Result<()> {
    let n = net.n_nodes();
    let means = systematic_means(state, cov);
    let rho = state.latent.rho;
    for i in 0..n {
        for j in (i + 1)..n {
            if mask.is_hidden(i, j) {
                continue;
            }
            let tie = net.tie(i, j);
            let result: Result<()> = (|| {
                match cfg.variant {
                    ModelVariant::Pgbme => {
                        let region = if tie {
                            TruncRegion::BothPositive
                        } else {
                            TruncRegion::NotBothPositive
                        };
                        let current = (state.latent.z[(i, j)], state.latent.z[(j, i)]);
                        let (z1, z2) = draw_latent_pair_warm(
                            means[(i, j)],
                            means[(j, i)],
                            rho,
                            region,
                            current,
                            rng,
                        )?;
                        state.latent.z[(i, j)] = z1;
                        state.latent.z[(j, i)] = z2;
                    }
                    ModelVariant::Gbme => {
                        // each direction truncated one-sided by the shared outcome
                        for (a, b) in [(i, j), (j, i)] {
                            let (lo, hi) = if tie {
                                (F::zero(), F::infinity())
                            } else {
                                (F::neg_infinity(), F::zero())
                            };
                            state.latent.z[(a, b)] =
                                draw_truncnorm(means[(a, b)], F::one(), lo, hi, rng)?;
                        }
                    }
                    ModelVariant::PooledProbit => {
                        let (lo, hi) = if tie {
                            (F::zero(), F::infinity())
                        } else {
                            (F::neg_infinity(), F::zero())
                        };
                        let w = draw_truncnorm(means[(i, j)], F::one(), lo, hi, rng)?;
                        state.latent.z[(i, j)] = w;
                        state.latent.z[(j, i)] = w;
                    }
                }
                Ok(())
            })();
            result.map_err(|e| e.at(format!("dyad ({i}, {j})")))?;
        }
    }
    Ok(())
}

/// Invert a symmetric positive definite 2x2 matrix, returning
/// `(w11, w12, w22)`.
fn inv2x2<F: Real>(m: &Matrix2<F>) -> Result<(F, F, F)> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if !(det > F::zero()) {
        return Err(Error::SingularSystem {
            block: "additive-effect covariance".into(),
        });
    }
    Ok((m[(1, 1)] / det, -m[(0, 1)] / det, m[(0, 0)] / det))
}

/// Error precision of a latent pair, `[[1, rho], [rho, 1]]^-1`, as
/// `(diagonal, off-diagonal)`.
fn pair_precision<F: Real>(rho: F) -> (F, F) {
    if rho == F::zero() {
        (F::one(), F::zero())
    } else {
        let omr2 = F::one() - rho * rho;
        (F::one() / omr2, -rho / omr2)
    }
}

/// Jointly draw the dyadic coefficients and centered additive effects
/// `(beta_d, s, r)` from their conditional posterior, then the nodal
/// coefficients `(beta_s, beta_r)` from the regression of `(s, r)` on the
/// node design, and restore `a = s - beta_s . x`, `b = r - beta_r . x`.
///
/// For the pooled-probit variant this collapses to a single conjugate
/// regression of the dyad scalar on `[dyadic covariates, nodal sums]` with
/// the sender and receiver coefficient vectors tied together.
pub fn update_additive<F: Real>(
    state: &mut ModelState<F>,
    cov: &CovariateSet<F>,
    cfg: &FitConfig<F>,
    mask: &DyadMask,
    rng: &mut RngStream,
) -> Result<()> {
    if cfg.variant == ModelVariant::PooledProbit {
        return update_additive_pooled(state, cov, cfg, mask, rng);
    }
    let n = state.n_nodes();
    let (pd, pn) = (cov.p_dyad(), cov.p_node());
    let q = pd + 2 * n;
    let inv_vb = F::one() / cfg.prior_beta_var;
    let (w11, w12, w22) = inv2x2(&state.additive.sigma_ab)?;

    let mut qmat = DMatrix::<F>::zeros(q, q);
    let mut bvec = DVector::<F>::zeros(q);
    for k in 0..pd {
        qmat[(k, k)] += inv_vb;
    }
    for i in 0..n {
        let si = pd + i;
        let ri = pd + n + i;
        qmat[(si, si)] += w11;
        qmat[(si, ri)] += w12;
        qmat[(ri, si)] += w12;
        qmat[(ri, ri)] += w22;
        let pm_s = cov.node_dot(&state.coef.beta_s, i);
        let pm_r = cov.node_dot(&state.coef.beta_r, i);
        bvec[si] += w11 * pm_s + w12 * pm_r;
        bvec[ri] += w12 * pm_s + w22 * pm_r;
    }

    let (e_diag, e_off) = pair_precision(state.latent.rho);
    // per-row sparse support: dyadic covariate columns plus one s and one r slot
    let mut row1: Vec<(usize, F)> = Vec::with_capacity(pd + 2);
    let mut row2: Vec<(usize, F)> = Vec::with_capacity(pd + 2);
    for i in 0..n {
        for j in (i + 1)..n {
            if mask.is_hidden(i, j) {
                continue;
            }
            let e1 = state.latent.z[(i, j)] - state.multiplicative.uv(i, j);
            let e2 = state.latent.z[(j, i)] - state.multiplicative.uv(j, i);
            row1.clear();
            row2.clear();
            for k in 0..pd {
                row1.push((k, cov.dyad_value(k, i, j)));
                row2.push((k, cov.dyad_value(k, j, i)));
            }
            row1.push((pd + i, F::one()));
            row1.push((pd + n + j, F::one()));
            row2.push((pd + j, F::one()));
            row2.push((pd + n + i, F::one()));

            for &(ca, va) in &row1 {
                for &(cb, vb) in &row1 {
                    qmat[(ca, cb)] += e_diag * va * vb;
                }
                bvec[ca] += va * (e_diag * e1 + e_off * e2);
            }
            for &(ca, va) in &row2 {
                for &(cb, vb) in &row2 {
                    qmat[(ca, cb)] += e_diag * va * vb;
                }
                bvec[ca] += va * (e_off * e1 + e_diag * e2);
            }
            if e_off != F::zero() {
                for &(ca, va) in &row1 {
                    for &(cb, vb) in &row2 {
                        let w = e_off * va * vb;
                        qmat[(ca, cb)] += w;
                        qmat[(cb, ca)] += w;
                    }
                }
            }
        }
    }

    let gamma = draw_mvnorm_prec(&qmat, &bvec, rng).map_err(|e| annotate_singular(e, "dyadic coefficient and additive-effect design"))?;
    for k in 0..pd {
        state.coef.beta_d[k] = gamma[k];
    }
    for i in 0..n {
        state.additive.s[i] = gamma[pd + i];
        state.additive.r[i] = gamma[pd + n + i];
    }

    // (beta_s, beta_r) | s, r, Sigma_ab: paired regression on the node design
    let x = cov.node_x();
    let xtx = x.transpose() * x;
    let xts = x.transpose() * &state.additive.s;
    let xtr = x.transpose() * &state.additive.r;
    let mut q2 = DMatrix::<F>::zeros(2 * pn, 2 * pn);
    let mut b2 = DVector::<F>::zeros(2 * pn);
    for a in 0..pn {
        for b in 0..pn {
            q2[(a, b)] = w11 * xtx[(a, b)];
            q2[(a, pn + b)] = w12 * xtx[(a, b)];
            q2[(pn + a, b)] = w12 * xtx[(a, b)];
            q2[(pn + a, pn + b)] = w22 * xtx[(a, b)];
        }
        q2[(a, a)] += inv_vb;
        q2[(pn + a, pn + a)] += inv_vb;
        b2[a] = w11 * xts[a] + w12 * xtr[a];
        b2[pn + a] = w12 * xts[a] + w22 * xtr[a];
    }
    let gamma2 = draw_mvnorm_prec(&q2, &b2, rng)
        .map_err(|e| annotate_singular(e, "sender-receiver coefficient design"))?;
    for k in 0..pn {
        state.coef.beta_s[k] = gamma2[k];
        state.coef.beta_r[k] = gamma2[pn + k];
    }

    for i in 0..n {
        state.additive.a[i] = state.additive.s[i] - cov.node_dot(&state.coef.beta_s, i);
        state.additive.b[i] = state.additive.r[i] - cov.node_dot(&state.coef.beta_r, i);
    }
    Ok(())
}

fn annotate_singular(e: Error, block: &str) -> Error {
    match e {
        Error::NotPositiveDefinite { leading_minor } => Error::SingularSystem {
            block: format!("{block} (leading minor {leading_minor})"),
        },
        other => other,
    }
}

fn update_additive_pooled<F: Real>(
    state: &mut ModelState<F>,
    cov: &CovariateSet<F>,
    cfg: &FitConfig<F>,
    mask: &DyadMask,
    rng: &mut RngStream,
) -> Result<()> {
    let n = state.n_nodes();
    let (pd, pn) = (cov.p_dyad(), cov.p_node());
    let q = pd + pn;
    let inv_vb = F::one() / cfg.prior_beta_var;
    let mut qmat = DMatrix::<F>::from_diagonal_element(q, q, inv_vb);
    let mut bvec = DVector::<F>::zeros(q);
    for i in 0..n {
        for j in (i + 1)..n {
            if mask.is_hidden(i, j) {
                continue;
            }
            let row = pooled_row(cov, i, j);
            let w = state.latent.z[(i, j)];
            for a in 0..q {
                for b in 0..q {
                    qmat[(a, b)] += row[a] * row[b];
                }
                bvec[a] += row[a] * w;
            }
        }
    }
    let gamma = draw_mvnorm_prec(&qmat, &bvec, rng)
        .map_err(|e| annotate_singular(e, "pooled probit design"))?;
    for k in 0..pd {
        state.coef.beta_d[k] = gamma[k];
    }
    for k in 0..pn {
        state.coef.beta_s[k] = gamma[pd + k];
        state.coef.beta_r[k] = gamma[pd + k];
    }
    for i in 0..n {
        state.additive.s[i] = cov.node_dot(&state.coef.beta_s, i);
        state.additive.r[i] = cov.node_dot(&state.coef.beta_r, i);
        state.additive.a[i] = F::zero();
        state.additive.b[i] = F::zero();
    }
    Ok(())
}

/// Draw the additive-effect covariance from its inverse Wishart full
/// conditional `IW(S0 + sum_i (a_i, b_i)(a_i, b_i)', dof0 + N)`.
pub fn update_sigma_ab<F: Real>(
    state: &mut ModelState<F>,
    cfg: &FitConfig<F>,
    rng: &mut RngStream,
) -> Result<()> {
    let n = state.n_nodes();
    let mut scale = DMatrix::<F>::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            scale[(i, j)] = cfg.prior_sigma_ab_scale[(i, j)];
        }
    }
    for i in 0..n {
        let ai = state.additive.a[i];
        let bi = state.additive.b[i];
        scale[(0, 0)] += ai * ai;
        scale[(0, 1)] += ai * bi;
        scale[(1, 0)] += ai * bi;
        scale[(1, 1)] += bi * bi;
    }
    let dof = cfg.prior_sigma_ab_dof + F::from_usize(n).unwrap();
    let draw = draw_inverse_wishart(&scale, dof, rng)?;
    state.additive.sigma_ab = Matrix2::new(draw[(0, 0)], draw[(0, 1)], draw[(1, 0)], draw[(1, 1)]);
    Ok(())
}

/// Update every latent position `u_i`, then every `v_i`, from their
/// conditional normal posteriors, then the latent-space variances from
/// their inverse gamma full conditionals. No-op when K = 0.
pub fn update_multiplicative<F: Real>(
    state: &mut ModelState<F>,
    cov: &CovariateSet<F>,
    cfg: &FitConfig<F>,
    mask: &DyadMask,
    rng: &mut RngStream,
) -> Result<()> {
    let k = state.multiplicative.k_dim();
    if k == 0 || cfg.variant == ModelVariant::PooledProbit {
        return Ok(());
    }
    let n = state.n_nodes();
    let rho = state.latent.rho;
    let (e_diag, _) = pair_precision(rho);
    let noise_prec = e_diag; // 1/(1 - rho^2), equals 1 when rho = 0
    let g = base_means(state, cov);

    for i in 0..n {
        let mut prec = DMatrix::<F>::from_diagonal_element(k, k, F::one() / state.multiplicative.sigma_u2);
        let mut lin = DVector::<F>::zeros(k);
        for j in 0..n {
            if j == i || mask.is_hidden(i, j) {
                continue;
            }
            let mut resid = state.latent.z[(i, j)] - g[(i, j)];
            if rho != F::zero() {
                let m_ji = g[(j, i)] + state.multiplicative.uv(j, i);
                resid -= rho * (state.latent.z[(j, i)] - m_ji);
            }
            for a in 0..k {
                let va = state.multiplicative.v[(j, a)];
                for b in 0..k {
                    prec[(a, b)] += noise_prec * va * state.multiplicative.v[(j, b)];
                }
                lin[a] += noise_prec * va * resid;
            }
        }
        let ui = draw_mvnorm_prec(&prec, &lin, rng).map_err(|e| e.at(format!("sender position {i}")))?;
        for a in 0..k {
            state.multiplicative.u[(i, a)] = ui[a];
        }
    }

    for i in 0..n {
        let mut prec = DMatrix::<F>::from_diagonal_element(k, k, F::one() / state.multiplicative.sigma_v2);
        let mut lin = DVector::<F>::zeros(k);
        for j in 0..n {
            if j == i || mask.is_hidden(j, i) {
                continue;
            }
            let mut resid = state.latent.z[(j, i)] - g[(j, i)];
            if rho != F::zero() {
                let m_ij = g[(i, j)] + state.multiplicative.uv(i, j);
                resid -= rho * (state.latent.z[(i, j)] - m_ij);
            }
            for a in 0..k {
                let ua = state.multiplicative.u[(j, a)];
                for b in 0..k {
                    prec[(a, b)] += noise_prec * ua * state.multiplicative.u[(j, b)];
                }
                lin[a] += noise_prec * ua * resid;
            }
        }
        let vi = draw_mvnorm_prec(&prec, &lin, rng).map_err(|e| e.at(format!("receiver position {i}")))?;
        for a in 0..k {
            state.multiplicative.v[(i, a)] = vi[a];
        }
    }

    let half = F::of(0.5);
    let nk = F::from_usize(n * k).unwrap();
    let frob_u: F = state.multiplicative.u.iter().map(|x| *x * *x).fold(F::zero(), |a, b| a + b);
    let frob_v: F = state.multiplicative.v.iter().map(|x| *x * *x).fold(F::zero(), |a, b| a + b);
    state.multiplicative.sigma_u2 = draw_inverse_gamma(
        cfg.prior_ig_shape + half * nk,
        cfg.prior_ig_rate + half * frob_u,
        rng,
    )?;
    state.multiplicative.sigma_v2 = draw_inverse_gamma(
        cfg.prior_ig_shape + half * nk,
        cfg.prior_ig_rate + half * frob_v,
        rng,
    )?;
    Ok(())
}

/// Proposal standard deviation of the reciprocity Metropolis step.
const RHO_PROPOSAL_SD: f64 = 0.05;

/// Metropolis update of the reciprocity correlation over the bivariate
/// normal likelihood of all latent pairs. Exposed as an option; estimates
/// of this parameter are known to be sensitive to starting values and
/// should be treated with caution.
pub fn update_rho<F: Real>(
    state: &mut ModelState<F>,
    cov: &CovariateSet<F>,
    mask: &DyadMask,
    rng: &mut RngStream,
) -> Result<()> {
    let n = state.n_nodes();
    let means = systematic_means(state, cov);
    let current = state.latent.rho;
    let proposal = current + F::of(RHO_PROPOSAL_SD) * F::std_normal(rng);
    if proposal.abs() >= F::of(0.999) {
        return Ok(());
    }
    let log_lik = |r: F| -> F {
        let omr2 = F::one() - r * r;
        let mut acc = F::zero();
        let mut pairs = F::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                if mask.is_hidden(i, j) {
                    continue;
                }
                let d1 = state.latent.z[(i, j)] - means[(i, j)];
                let d2 = state.latent.z[(j, i)] - means[(j, i)];
                acc -= (d1 * d1 - F::of(2.0) * r * d1 * d2 + d2 * d2) / (F::of(2.0) * omr2);
                pairs += F::one();
            }
        }
        acc - pairs * omr2.ln() / F::of(2.0)
    };
    let log_accept = log_lik(proposal) - log_lik(current);
    let u: F = F::unit_uniform(rng);
    if u.ln() < log_accept {
        state.latent.rho = proposal;
    }
    Ok(())
}

/// Verify the data-consistency invariant: `y = 1` implies both latent
/// utilities positive, `y = 0` implies at least one negative.
pub fn check_consistency<F: Real>(
    state: &ModelState<F>,
    net: &ObservedNetwork,
    mask: &DyadMask,
) -> Result<()> {
    let n = net.n_nodes();
    for i in 0..n {
        for j in (i + 1)..n {
            if mask.is_hidden(i, j) {
                continue;
            }
            let z1 = state.latent.z[(i, j)];
            let z2 = state.latent.z[(j, i)];
            let ok = if net.tie(i, j) {
                z1 > F::zero() && z2 > F::zero()
            } else {
                z1 < F::zero() || z2 < F::zero()
            };
            if !ok {
                return Err(Error::contract(format!(
                    "latent utilities inconsistent with outcome at dyad ({i}, {j}): z = ({z1}, {z2}), y = {}",
                    u8::from(net.tie(i, j))
                )));
            }
        }
    }
    Ok(())
}

/// One full Gibbs sweep over all blocks (latent, additive, covariance,
/// multiplicative, and optionally reciprocity), in that order.
pub fn sweep<F: Real>(
    state: &mut ModelState<F>,
    net: &ObservedNetwork,
    cov: &CovariateSet<F>,
    cfg: &FitConfig<F>,
    mask: &DyadMask,
    rng: &mut RngStream,
) -> Result<()> {
    sweep_stepped(state, net, cov, cfg, mask, rng).map_err(|(_, e)| e)
}

fn sweep_stepped<F: Real>(
    state: &mut ModelState<F>,
    net: &ObservedNetwork,
    cov: &CovariateSet<F>,
    cfg: &FitConfig<F>,
    mask: &DyadMask,
    rng: &mut RngStream,
) -> std::result::Result<(), (&'static str, Error)> {
    update_latent(state, net, cov, cfg, mask, rng).map_err(|e| ("latent", e))?;
    update_additive(state, cov, cfg, mask, rng).map_err(|e| ("additive", e))?;
    if cfg.variant != ModelVariant::PooledProbit {
        update_sigma_ab(state, cfg, rng).map_err(|e| ("sigma_ab", e))?;
        update_multiplicative(state, cov, cfg, mask, rng).map_err(|e| ("multiplicative", e))?;
    }
    if cfg.estimate_rho && cfg.variant == ModelVariant::Pgbme {
        update_rho(state, cov, mask, rng).map_err(|e| ("rho", e))?;
    }
    check_consistency(state, net, mask).map_err(|e| ("consistency", e))?;
    Ok(())
}

fn trace_row_of<F: Real>(state: &ModelState<F>, iteration: usize, replicate: usize, estimate_rho: bool) -> TraceRow<F> {
    TraceRow {
        iteration,
        replicate,
        beta_d: state.coef.beta_d.iter().copied().collect(),
        beta_s: state.coef.beta_s.iter().copied().collect(),
        beta_r: state.coef.beta_r.iter().copied().collect(),
        sigma_a2: state.additive.sigma_ab[(0, 0)],
        sigma_b2: state.additive.sigma_ab[(1, 1)],
        sigma_ab_cov: state.additive.sigma_ab[(0, 1)],
        sigma_u2: state.multiplicative.sigma_u2,
        sigma_v2: state.multiplicative.sigma_v2,
        rho: estimate_rho.then_some(state.latent.rho),
    }
}

/// Run the full chain: initialization, `n_iter` sweeps with imputation
/// cycling, and thinned post-burn-in recording.
///
/// On a step failure the error carries the iteration index, the step name,
/// and all draws recorded before the failure.
pub fn run_chain<F: Real>(
    net: &ObservedNetwork,
    cov: &ImputedCovariates<F>,
    cfg: &FitConfig<F>,
) -> std::result::Result<PosteriorDraws<F>, Box<ChainFailure<F>>> {
    run_chain_masked(net, cov, cfg, &DyadMask::none(net.n_nodes()))
}

/// [`run_chain`] with a holdout mask: hidden dyads contribute nothing to
/// any update, while their nodes' effects are still estimated from the
/// remaining dyads.
pub fn run_chain_masked<F: Real>(
    net: &ObservedNetwork,
    cov: &ImputedCovariates<F>,
    cfg: &FitConfig<F>,
    mask: &DyadMask,
) -> std::result::Result<PosteriorDraws<F>, Box<ChainFailure<F>>> {
    let n = net.n_nodes();
    let empty_meta = |cfg: &FitConfig<F>| FitMeta {
        config: cfg.clone(),
        n_nodes: n,
        p_node: cov.first().p_node(),
        p_dyad: cov.first().p_dyad(),
        replicate_indices: Vec::new(),
    };
    let fail = |iteration, step, error, partial| {
        Box::new(ChainFailure {
            iteration,
            step,
            error,
            partial,
        })
    };

    let validation = cfg.validate().and_then(|()| {
        if cov.first().n_nodes() != n {
            return Err(Error::contract(format!(
                "covariates cover {} nodes but the network has {n}",
                cov.first().n_nodes()
            )));
        }
        if mask.n_nodes() != n {
            return Err(Error::contract("mask dimension does not match the network"));
        }
        Ok(())
    });
    if let Err(e) = validation {
        let partial = PosteriorDraws {
            states: Vec::new(),
            traces: Vec::new(),
            meta: empty_meta(cfg),
        };
        return Err(fail(0, "validate", e, partial));
    }

    let mut rng = RngStream::new(cfg.seed, 0);
    let mut state = init_state_inner(net, cov.first(), cfg, mask);
    let mut draws = PosteriorDraws {
        states: Vec::with_capacity(cfg.n_saved()),
        traces: Vec::with_capacity(cfg.n_saved()),
        meta: empty_meta(cfg),
    };

    for t in 1..=cfg.n_iter {
        let rep = if cov.len() > 1 {
            rng.random_range(0..cov.len())
        } else {
            0
        };
        draws.meta.replicate_indices.push(rep);
        let c = cov.replicate(rep);
        if let Err((step, e)) = sweep_stepped(&mut state, net, c, cfg, mask, &mut rng) {
            return Err(fail(t, step, e, draws));
        }
        if t > cfg.n_burn && (t - cfg.n_burn) % cfg.thin == 0 {
            draws.states.push(StateSnapshot::of(&state));
            draws.traces.push(trace_row_of(&state, t, rep, cfg.estimate_rho));
        }
    }
    Ok(draws)
}
