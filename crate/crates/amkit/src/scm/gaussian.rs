use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scm::dag::{is_dag, support_edges, Dag};

/// Symmetry tolerance for covariance inputs.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// A symmetric positive-definite covariance matrix, validated at
/// construction (symmetry within 1e-10, then averaged with its transpose
/// and checked by Cholesky).
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    m: DMatrix<f64>,
}

impl CovMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "covariance is {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut max_asym: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for i in 0..m.nrows() {
            for j in (i + 1)..m.ncols() {
                max_asym = max_asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
            scale = scale.max(m[(i, i)].abs());
        }
        if max_asym > SYMMETRY_TOL * scale.max(1.0) {
            return Err(Error::Precondition(format!(
                "matrix is asymmetric by {max_asym:.3e}"
            )));
        }
        let sym = (&m + m.transpose()) * 0.5;
        if sym.clone().cholesky().is_none() {
            return Err(Error::Factorization(
                "covariance is not positive definite".into(),
            ));
        }
        Ok(CovMatrix { m: sym })
    }

    pub fn identity(d: usize) -> Self {
        CovMatrix {
            m: DMatrix::identity(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn cholesky(&self) -> nalgebra::Cholesky<f64, nalgebra::Dyn> {
        // construction guarantees success
        self.m.clone().cholesky().expect("validated SPD")
    }

    pub fn log_det(&self) -> f64 {
        let chol = self.cholesky();
        2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.cholesky().inverse()
    }

    /// Marginal covariance on an index subset.
    pub fn marginal(&self, idx: &[usize]) -> Result<CovMatrix> {
        for &i in idx {
            if i >= self.dim() {
                return Err(Error::Dimension(format!("index {i} out of range")));
            }
        }
        CovMatrix::new(submatrix(&self.m, idx, idx))
    }
}

/// Rectangular gather of a matrix at the given row/column index lists.
pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// The Gaussian conditional of one node given an index set: X_j | X_S is
/// normal with mean `weights · x_S` and the stated variance.
#[derive(Debug, Clone)]
pub struct ConditionalGaussian {
    pub target: usize,
    pub given: Vec<usize>,
    pub weights: DVector<f64>,
    pub variance: f64,
}

/// Conditional of `j` given the set `S` under a joint covariance:
/// weights = Σ_SS⁻¹ Σ_Sj, variance = Σ_jj − Σ_jS Σ_SS⁻¹ Σ_Sj.
pub fn conditional_gaussian(sigma: &CovMatrix, j: usize, s: &[usize]) -> Result<ConditionalGaussian> {
    if j >= sigma.dim() {
        return Err(Error::Dimension(format!("target {j} out of range")));
    }
    if s.contains(&j) {
        return Err(Error::Precondition(format!("target {j} is in the given set")));
    }
    if s.is_empty() {
        return Ok(ConditionalGaussian {
            target: j,
            given: Vec::new(),
            weights: DVector::zeros(0),
            variance: sigma.get(j, j),
        });
    }
    let (k, cond) = conditional_blocks(sigma.as_matrix(), &[j], s)?;
    Ok(ConditionalGaussian {
        target: j,
        given: s.to_vec(),
        weights: DVector::from_column_slice(k.column(0).as_slice()),
        variance: cond[(0, 0)],
    })
}

/// Block form of Gaussian conditioning: for targets T given set S returns
/// (K, C) with E[X_T | x_S] = Kᵀ x_S and Cov[X_T | x_S] = C,
/// K = Σ_SS⁻¹ Σ_ST (|S|×|T|), C = Σ_TT − Σ_TS Σ_SS⁻¹ Σ_ST.
pub fn conditional_blocks(
    sigma: &DMatrix<f64>,
    targets: &[usize],
    given: &[usize],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let s_ss = submatrix(sigma, given, given);
    let s_st = submatrix(sigma, given, targets);
    let s_tt = submatrix(sigma, targets, targets);
    let chol = s_ss
        .cholesky()
        .ok_or_else(|| Error::Factorization("conditioning block is singular".into()))?;
    let k = chol.solve(&s_st);
    let cond = &s_tt - s_st.transpose() * &k;
    Ok((k, cond))
}

/// A zero-mean linear Gaussian SCM `X = Bᵀ X + n`, `n ~ N(0, diag(noise_vars))`.
/// Entry `b[(i, j)]` is the weight of edge i→j.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianScm {
    b: DMatrix<f64>,
    noise_vars: DVector<f64>,
}

impl GaussianScm {
    pub fn new(b: DMatrix<f64>, noise_vars: DVector<f64>) -> Result<Self> {
        if b.nrows() != b.ncols() {
            return Err(Error::Dimension(format!(
                "weight matrix is {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if noise_vars.len() != b.nrows() {
            return Err(Error::Dimension(format!(
                "{} noise variances for {} nodes",
                noise_vars.len(),
                b.nrows()
            )));
        }
        if noise_vars.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Precondition("noise variances must be positive".into()));
        }
        if !is_dag(&b, 0.0)? {
            return Err(Error::Cyclic("weight matrix support is cyclic".into()));
        }
        Ok(GaussianScm { b, noise_vars })
    }

    /// Equal-variance convenience constructor.
    pub fn with_equal_noise(b: DMatrix<f64>, sigma2: f64) -> Result<Self> {
        let d = b.nrows();
        GaussianScm::new(b, DVector::from_element(d, sigma2))
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn noise_vars(&self) -> &DVector<f64> {
        &self.noise_vars
    }

    /// Support graph: edges with |weight| > tol.
    pub fn dag(&self, tol: f64) -> Dag {
        Dag::new(self.dim(), support_edges(&self.b, tol)).expect("validated acyclic")
    }

    /// Structural weight vector of `node` on a parent set (entries of column
    /// `node` at the parent rows).
    pub fn column_weights(&self, node: usize, parents: &[usize]) -> DVector<f64> {
        DVector::from_iterator(parents.len(), parents.iter().map(|&p| self.b[(p, node)]))
    }

    /// Induced covariance Σ = (I−B)⁻ᵀ D (I−B)⁻¹.
    pub fn covariance(&self) -> Result<CovMatrix> {
        let d = self.dim();
        let m = DMatrix::identity(d, d) - &self.b;
        let inv = m
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Factorization("(I - B) is singular".into()))?;
        let dm = DMatrix::from_diagonal(&self.noise_vars);
        let sigma = inv.transpose() * dm * inv;
        CovMatrix::new(sigma)
    }

    /// Draws `n` i.i.d. rows by forward simulation in topological order.
    /// Deterministic for a given seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<DMatrix<f64>> {
        if n == 0 {
            return Err(Error::Precondition("sample size must be at least 1".into()));
        }
        let d = self.dim();
        let order = self
            .dag(0.0)
            .topological_order()
            .expect("validated acyclic");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd: Vec<f64> = self.noise_vars.iter().map(|v| v.sqrt()).collect();
        let mut out = DMatrix::zeros(n, d);
        let mut noise = vec![0.0; d];
        for i in 0..n {
            for nj in noise.iter_mut() {
                *nj = rng.sample::<f64, _>(StandardNormal);
            }
            for &j in &order {
                let mut v = sd[j] * noise[j];
                for p in 0..d {
                    let w = self.b[(p, j)];
                    if w != 0.0 {
                        v += w * out[(i, p)];
                    }
                }
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}
