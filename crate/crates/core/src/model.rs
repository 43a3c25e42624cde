//! Model quantities and deterministic math: observed network and covariate
//! containers, parameter blocks, linear predictors, and tie probabilities.

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special::{bvn_orthant, norm_cdf};

/// Symmetric binary adjacency over `n` nodes; self-ties are structurally
/// missing and never read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedNetwork {
    n_nodes: usize,
    adj: Vec<u8>,
}

impl ObservedNetwork {
    /// Build from a list of undirected edges.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::contract("network must have at least one node"));
        }
        let mut adj = vec![0u8; n_nodes * n_nodes];
        for &(i, j) in edges {
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::contract(format!(
                    "edge ({i}, {j}) out of range for {n_nodes} nodes"
                )));
            }
            if i == j {
                return Err(Error::contract(format!("self-tie ({i}, {i}) is not allowed")));
            }
            adj[i * n_nodes + j] = 1;
            adj[j * n_nodes + i] = 1;
        }
        Ok(ObservedNetwork { n_nodes, adj })
    }

    /// Build from a dense 0/1 matrix, validating symmetry off the diagonal.
    pub fn from_adjacency(adj: &DMatrix<u8>) -> Result<Self> {
        let n = adj.nrows();
        if adj.ncols() != n || n == 0 {
            return Err(Error::contract("adjacency must be square and nonempty"));
        }
        let mut flat = vec![0u8; n * n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let v = adj[(i, j)];
                if v > 1 {
                    return Err(Error::contract(format!(
                        "adjacency entries must be 0/1, got {v} at ({i}, {j})"
                    )));
                }
                if v != adj[(j, i)] {
                    return Err(Error::contract(format!(
                        "adjacency must be symmetric: ({i}, {j}) = {v} but ({j}, {i}) = {}",
                        adj[(j, i)]
                    )));
                }
                flat[i * n + j] = v;
            }
        }
        Ok(ObservedNetwork { n_nodes: n, adj: flat })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Whether nodes `i` and `j` share an undirected tie.
    #[inline]
    pub fn tie(&self, i: usize, j: usize) -> bool {
        debug_assert!(i != j, "the diagonal is structurally missing");
        self.adj[i * self.n_nodes + j] == 1
    }

    /// Number of undirected ties.
    pub fn n_ties(&self) -> usize {
        let mut count = 0;
        for i in 0..self.n_nodes {
            for j in (i + 1)..self.n_nodes {
                count += usize::from(self.adj[i * self.n_nodes + j]);
            }
        }
        count
    }

    /// Fraction of unordered dyads with a tie.
    pub fn density(&self) -> f64 {
        let pairs = self.n_nodes * (self.n_nodes - 1) / 2;
        self.n_ties() as f64 / pairs.max(1) as f64
    }
}

/// Node-level and dyad-level design data. The node matrix doubles as the
/// sender and receiver design; dyadic covariates may be asymmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateSet<F: Real> {
    node_x: DMatrix<F>,
    dyad_x: Vec<DMatrix<F>>,
}

impl<F: Real> CovariateSet<F> {
    /// Build and validate: every node covariate and every off-diagonal
    /// dyadic covariate must be finite.
    pub fn new(node_x: DMatrix<F>, dyad_x: Vec<DMatrix<F>>) -> Result<Self> {
        let n = node_x.nrows();
        if n == 0 {
            return Err(Error::contract("covariates require at least one node"));
        }
        if node_x.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract(
                "non-finite node covariate: resolve missingness upstream or supply imputed replicates",
            ));
        }
        for (k, m) in dyad_x.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::contract(format!(
                    "dyadic covariate {k} must be {n}x{n}, got {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            for i in 0..n {
                for j in 0..n {
                    if i != j && !m[(i, j)].is_finite() {
                        return Err(Error::contract(format!(
                            "non-finite dyadic covariate {k} at ({i}, {j}): resolve missingness upstream or supply imputed replicates"
                        )));
                    }
                }
            }
        }
        Ok(CovariateSet { node_x, dyad_x })
    }

    /// All-zero design with the given shape.
    pub fn zeros(n: usize, p_node: usize, p_dyad: usize) -> Self {
        CovariateSet {
            node_x: DMatrix::zeros(n, p_node),
            dyad_x: (0..p_dyad).map(|_| DMatrix::zeros(n, n)).collect(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.node_x.nrows()
    }

    pub fn p_node(&self) -> usize {
        self.node_x.ncols()
    }

    pub fn p_dyad(&self) -> usize {
        self.dyad_x.len()
    }

    pub fn node_x(&self) -> &DMatrix<F> {
        &self.node_x
    }

    pub fn dyad_x(&self) -> &[DMatrix<F>] {
        &self.dyad_x
    }

    #[inline]
    pub fn dyad_value(&self, k: usize, i: usize, j: usize) -> F {
        debug_assert!(i != j, "dyadic diagonal slices are never read");
        self.dyad_x[k][(i, j)]
    }

    /// Inner product of the dyadic covariate vector at `(i, j)` with `beta`.
    #[inline]
    pub fn dyad_dot(&self, beta: &DVector<F>, i: usize, j: usize) -> F {
        debug_assert_eq!(beta.len(), self.dyad_x.len());
        let mut acc = F::zero();
        for (k, m) in self.dyad_x.iter().enumerate() {
            acc += beta[k] * m[(i, j)];
        }
        acc
    }

    /// Inner product of node row `i` with `beta`.
    #[inline]
    pub fn node_dot(&self, beta: &DVector<F>, i: usize) -> F {
        debug_assert_eq!(beta.len(), self.node_x.ncols());
        let mut acc = F::zero();
        for k in 0..self.node_x.ncols() {
            acc += beta[k] * self.node_x[(i, k)];
        }
        acc
    }
}

/// An ordered collection of imputed covariate replicates sharing dimensions.
#[derive(Debug, Clone)]
pub struct ImputedCovariates<F: Real> {
    replicates: Vec<CovariateSet<F>>,
}

impl<F: Real> ImputedCovariates<F> {
    pub fn new(replicates: Vec<CovariateSet<F>>) -> Result<Self> {
        let first = replicates
            .first()
            .ok_or_else(|| Error::contract("at least one covariate replicate is required"))?;
        let (n, pn, pd) = (first.n_nodes(), first.p_node(), first.p_dyad());
        for (m, rep) in replicates.iter().enumerate() {
            if rep.n_nodes() != n || rep.p_node() != pn || rep.p_dyad() != pd {
                return Err(Error::contract(format!(
                    "replicate {m} has shape ({}, {}, {}), expected ({n}, {pn}, {pd})",
                    rep.n_nodes(),
                    rep.p_node(),
                    rep.p_dyad()
                )));
            }
        }
        Ok(ImputedCovariates { replicates })
    }

    pub fn single(cov: CovariateSet<F>) -> Self {
        ImputedCovariates {
            replicates: vec![cov],
        }
    }

    pub fn len(&self) -> usize {
        self.replicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicates.is_empty()
    }

    pub fn replicate(&self, m: usize) -> &CovariateSet<F> {
        &self.replicates[m]
    }

    pub fn first(&self) -> &CovariateSet<F> {
        &self.replicates[0]
    }
}

/// Sender, receiver, and dyadic regression coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionCoefficients<F: Real> {
    pub beta_s: DVector<F>,
    pub beta_r: DVector<F>,
    pub beta_d: DVector<F>,
}

impl<F: Real> RegressionCoefficients<F> {
    pub fn zeros(p_node: usize, p_dyad: usize) -> Self {
        RegressionCoefficients {
            beta_s: DVector::zeros(p_node),
            beta_r: DVector::zeros(p_node),
            beta_d: DVector::zeros(p_dyad),
        }
    }
}

/// Additive sender/receiver random effects in raw (`a`, `b`) and
/// hierarchically centered (`s`, `r`) form, with their covariance.
///
/// The centering identity `s_i = beta_s . x_i + a_i` and
/// `r_j = beta_r . x_j + b_j` is maintained by every update.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveEffects<F: Real> {
    pub a: DVector<F>,
    pub b: DVector<F>,
    pub s: DVector<F>,
    pub r: DVector<F>,
    pub sigma_ab: Matrix2<F>,
}

impl<F: Real> AdditiveEffects<F> {
    pub fn zeros(n: usize) -> Self {
        AdditiveEffects {
            a: DVector::zeros(n),
            b: DVector::zeros(n),
            s: DVector::zeros(n),
            r: DVector::zeros(n),
            sigma_ab: Matrix2::identity(),
        }
    }

    /// Verify the centering identity within `tol`.
    pub fn check_centering(
        &self,
        coef: &RegressionCoefficients<F>,
        cov: &CovariateSet<F>,
        tol: F,
    ) -> Result<()> {
        for i in 0..self.a.len() {
            let s_i = cov.node_dot(&coef.beta_s, i) + self.a[i];
            let r_i = cov.node_dot(&coef.beta_r, i) + self.b[i];
            if (s_i - self.s[i]).abs() > tol || (r_i - self.r[i]).abs() > tol {
                return Err(Error::contract(format!(
                    "centering identity violated at node {i}"
                )));
            }
        }
        Ok(())
    }
}

/// Latent-space sender/receiver positions and their variances.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicativeEffects<F: Real> {
    pub u: DMatrix<F>,
    pub v: DMatrix<F>,
    pub sigma_u2: F,
    pub sigma_v2: F,
}

impl<F: Real> MultiplicativeEffects<F> {
    pub fn zeros(n: usize, k_dim: usize) -> Self {
        MultiplicativeEffects {
            u: DMatrix::zeros(n, k_dim),
            v: DMatrix::zeros(n, k_dim),
            sigma_u2: F::one(),
            sigma_v2: F::one(),
        }
    }

    pub fn k_dim(&self) -> usize {
        self.u.ncols()
    }

    /// Inner product `u_i . v_j`.
    #[inline]
    pub fn uv(&self, i: usize, j: usize) -> F {
        let mut acc = F::zero();
        for k in 0..self.u.ncols() {
            acc += self.u[(i, k)] * self.v[(j, k)];
        }
        acc
    }
}

/// Directed latent utilities with the fixed unit noise variance and the
/// within-dyad reciprocity correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentUtilities<F: Real> {
    pub z: DMatrix<F>,
    pub rho: F,
}

impl<F: Real> LatentUtilities<F> {
    pub fn zeros(n: usize) -> Self {
        LatentUtilities {
            z: DMatrix::zeros(n, n),
            rho: F::zero(),
        }
    }

    /// The identifying restriction fixes the noise variance at one.
    pub fn sigma2(&self) -> F {
        F::one()
    }
}

/// Linear predictor `mu_ij = beta_s . x_i + beta_r . x_j + beta_d . x_ij`.
pub fn linear_predictor<F: Real>(
    coef: &RegressionCoefficients<F>,
    cov: &CovariateSet<F>,
    i: usize,
    j: usize,
) -> Result<F> {
    if i == j {
        return Err(Error::contract("linear predictor is undefined for i = j"));
    }
    let n = cov.n_nodes();
    if i >= n || j >= n {
        return Err(Error::contract(format!(
            "node index out of range: ({i}, {j}) with {n} nodes"
        )));
    }
    if coef.beta_s.len() != cov.p_node()
        || coef.beta_r.len() != cov.p_node()
        || coef.beta_d.len() != cov.p_dyad()
    {
        return Err(Error::contract(format!(
            "coefficient dimensions ({}, {}, {}) do not match covariates ({}, {})",
            coef.beta_s.len(),
            coef.beta_r.len(),
            coef.beta_d.len(),
            cov.p_node(),
            cov.p_dyad()
        )));
    }
    Ok(cov.node_dot(&coef.beta_s, i) + cov.node_dot(&coef.beta_r, j) + cov.dyad_dot(&coef.beta_d, i, j))
}

/// Full systematic mean `mu_ij + a_i + b_j + u_i . v_j`.
pub fn systematic_mean<F: Real>(
    pred: F,
    add: &AdditiveEffects<F>,
    mult: &MultiplicativeEffects<F>,
    i: usize,
    j: usize,
) -> F {
    debug_assert!(i != j);
    pred + add.a[i] + add.b[j] + mult.uv(i, j)
}

/// Systematic mean in hierarchically centered form,
/// `beta_d . x_ij + s_i + r_j + u_i . v_j`; must agree with
/// [`systematic_mean`] whenever the centering identity holds.
pub fn systematic_mean_centered<F: Real>(
    coef: &RegressionCoefficients<F>,
    cov: &CovariateSet<F>,
    add: &AdditiveEffects<F>,
    mult: &MultiplicativeEffects<F>,
    i: usize,
    j: usize,
) -> F {
    debug_assert!(i != j);
    cov.dyad_dot(&coef.beta_d, i, j) + add.s[i] + add.r[j] + mult.uv(i, j)
}

/// Probability that both directed utilities are positive,
/// `P(z_ij > 0 and z_ji > 0)`, for systematic means `(m_ij, m_ji)` and
/// reciprocity correlation `rho` under the unit-variance restriction.
pub fn joint_tie_probability<F: Real>(m_ij: F, m_ji: F, rho: F) -> Result<F> {
    if !(rho.abs() < F::one()) {
        return Err(Error::contract(format!(
            "joint tie probability requires |rho| < 1, got {rho}"
        )));
    }
    if m_ij != m_ij || m_ji != m_ji {
        return Err(Error::contract("joint tie probability requires finite means"));
    }
    Ok(bvn_orthant(m_ij, m_ji, rho))
}

/// Probability of the directed tie `i -> j` alone, `P(z_ij > 0)`.
pub fn directed_tie_probability<F: Real>(m_ij: F) -> F {
    norm_cdf(m_ij)
}
