//! Sparse network estimation: neighbourhood selection, graphical lasso, stability-based
//! penalty selection and the correlation-threshold baseline.

mod glasso;
mod lasso;
mod pearson;
mod stars;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use glasso::{glasso_objective, glasso_path, glasso_solve, GlassoOptions, PrecisionEstimate};
pub use lasso::{kkt_residual, lambda_max as lasso_lambda_max, lasso_gram, lasso_objective, lasso_solve};
pub use pearson::{pearson_network, pearson_p_value, PearsonResult};
pub use stars::{
    pair_count, pair_index, rank_edges, stars_from_subsamples, stars_path, stars_select, subsample_indices, StabilityResult,
    StarsOptions, StarsWarning,
};

use crate::compositions::{self, CountMatrix, CovarianceKind};
use crate::error::{Error, Result};
use crate::evaluation::RankedEdge;
use crate::linalg;
use crate::topology::Adjacency;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mb,
    Glasso,
    Pearson,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Mb, Method::Glasso, Method::Pearson];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mb => "mb",
            Method::Glasso => "glasso",
            Method::Pearson => "pearson",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mb" => Ok(Method::Mb),
            "glasso" => Ok(Method::Glasso),
            "pearson" => Ok(Method::Pearson),
            _ => Err(Error::InvalidParameter(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    #[default]
    Union,
    Intersection,
}

impl std::str::FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "union" | "or" => Ok(Rule::Union),
            "intersection" | "and" => Ok(Rule::Intersection),
            _ => Err(Error::InvalidParameter(format!("unknown edge rule {s:?}"))),
        }
    }
}

/// Matrix handed to the graphical lasso.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlassoInput {
    #[default]
    Correlation,
    Covariance,
}

/// A penalised estimator together with its settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Estimator {
    Mb { rule: Rule },
    Glasso { input: GlassoInput, options: GlassoOptions },
}

impl Estimator {
    /// The `p x p` matrix the estimator works from: `Z'Z/n` of the centred data for MB,
    /// the sample correlation or covariance for the graphical lasso.
    pub fn second_moment(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("inference input"));
        }
        if let Some(j) = linalg::constant_column(z) {
            return Err(Error::ConstantColumn(j));
        }
        match self {
            Estimator::Mb { .. } => {
                let c = linalg::center_columns(z);
                Ok(c.tr_mul(&c) / z.nrows() as f64)
            }
            Estimator::Glasso { input, .. } => {
                let kind = match input {
                    GlassoInput::Correlation => CovarianceKind::Correlation,
                    GlassoInput::Covariance => CovarianceKind::Covariance,
                };
                compositions::covariance_of(z, kind).map(|e| e.matrix)
            }
        }
    }

    pub fn lambda_max(&self, s: &DMatrix<f64>) -> f64 {
        let p = s.nrows();
        let mut m: f64 = 0.0;
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    m = m.max(s[(i, j)].abs());
                }
            }
        }
        match self {
            Estimator::Mb { .. } => 2.0 * m,
            Estimator::Glasso { .. } => m,
        }
    }

    /// Starts a warm-started walk down a penalty path on `s`.
    pub fn path_state(&self, s: DMatrix<f64>) -> PathState {
        let p = s.nrows();
        match *self {
            Estimator::Mb { rule } => PathState::Mb { s, rule, coef: DMatrix::zeros(p, p) },
            Estimator::Glasso { options, .. } => PathState::Glasso { s, options, current: None },
        }
    }

    /// Edge sets along the path.
    pub fn supports(&self, s: &DMatrix<f64>, lambdas: &[f64]) -> Result<Vec<Adjacency>> {
        let mut state = self.path_state(s.clone());
        lambdas.iter().map(|&l| state.step(l)).collect()
    }

    /// Network at `lambdas[index]`, reached by walking the path from its head.
    pub fn network(&self, s: &DMatrix<f64>, lambdas: &[f64], index: usize) -> Result<InferredNetwork> {
        let mut state = self.path_state(s.clone());
        for &l in &lambdas[..=index] {
            state.step(l)?;
        }
        Ok(state.network())
    }

    pub fn method(&self) -> Method {
        match self {
            Estimator::Mb { .. } => Method::Mb,
            Estimator::Glasso { .. } => Method::Glasso,
        }
    }
}

fn precision_support(theta: &DMatrix<f64>) -> Adjacency {
    let p = theta.nrows();
    let mut a = Adjacency::empty(p);
    for i in 0..p {
        for j in (i + 1)..p {
            if theta[(i, j)] != 0.0 {
                a.insert(i, j).expect("valid pair");
            }
        }
    }
    a
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPath {
    pub values: Vec<f64>,
    pub lambda_max: f64,
    pub ratio: f64,
    pub count: usize,
}

impl LambdaPath {
    /// `count` log-spaced values from `lambda_max` down to `lambda_max * ratio`.
    pub fn log_spaced(lambda_max: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(lambda_max > 0.0) || !lambda_max.is_finite() {
            return Err(Error::Degenerate(format!("lambda_max = {lambda_max}: no off-diagonal association")));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidParameter(format!("lambda ratio must lie in (0, 1), got {ratio}")));
        }
        if count == 0 {
            return Err(Error::InvalidParameter("lambda path needs at least one value".into()));
        }
        let values = (0..count)
            .map(|k| {
                if k == 0 {
                    lambda_max
                } else {
                    lambda_max * ratio.powf(k as f64 / (count - 1) as f64)
                }
            })
            .collect();
        Ok(Self { values, lambda_max, ratio, count })
    }
}

/// Path for `estimator` on the matrix returned by [`Estimator::second_moment`].
pub fn lambda_path(s: &DMatrix<f64>, estimator: &Estimator, count: usize, ratio: f64) -> Result<LambdaPath> {
    LambdaPath::log_spaced(estimator.lambda_max(s), ratio, count)
}

/// Per-penalty regression coefficients: `coef[k][(i, j)]` is the weight of node `j` in the
/// regression of node `i` at `lambdas[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodSet {
    pub lambdas: Vec<f64>,
    pub coef: Vec<DMatrix<f64>>,
}

impl NeighborhoodSet {
    pub fn neighborhood(&self, k: usize, i: usize) -> Vec<usize> {
        let b = &self.coef[k];
        (0..b.ncols()).filter(|&j| b[(i, j)] != 0.0).collect()
    }
}

/// Neighbourhood selection: one lasso per node on the centred data, warm-started down the path.
pub fn mb_fit(z: &DMatrix<f64>, path: &LambdaPath) -> Result<NeighborhoodSet> {
    let s = Estimator::Mb { rule: Rule::Union }.second_moment(z)?;
    mb_fit_moment(&s, &path.values)
}

fn mb_fit_moment(s: &DMatrix<f64>, lambdas: &[f64]) -> Result<NeighborhoodSet> {
    let mut state = Estimator::Mb { rule: Rule::Union }.path_state(s.clone());
    let mut coef = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        state.step(l)?;
        if let PathState::Mb { coef: c, .. } = &state {
            coef.push(c.clone());
        }
    }
    Ok(NeighborhoodSet { lambdas: lambdas.to_vec(), coef })
}

/// Solver state carried from one penalty to the next.
#[derive(Debug, Clone)]
pub enum PathState {
    Mb { s: DMatrix<f64>, rule: Rule, coef: DMatrix<f64> },
    Glasso { s: DMatrix<f64>, options: GlassoOptions, current: Option<PrecisionEstimate> },
}

impl PathState {
    /// Solves at `lambda`, warm-started from the previous step, and returns the support.
    pub fn step(&mut self, lambda: f64) -> Result<Adjacency> {
        match self {
            PathState::Mb { s, rule, coef } => {
                let p = s.nrows();
                let mut b = vec![0.0; p];
                for i in 0..p {
                    let c: Vec<f64> = s.column(i).iter().copied().collect();
                    b.iter_mut().zip(coef.row(i).iter()).for_each(|(x, y)| *x = *y);
                    lasso::lasso_in_place(s, &c, lambda, &mut b, Some(i))?;
                    coef.row_mut(i).iter_mut().zip(&b).for_each(|(x, y)| *x = *y);
                }
                Ok(mb_graph(coef, *rule).adjacency())
            }
            PathState::Glasso { s, options, current } => {
                let est = glasso_solve(s, lambda, current.as_ref(), options)?;
                let support = precision_support(&est.theta);
                *current = Some(est);
                Ok(support)
            }
        }
    }

    /// Network at the last solved penalty.
    pub fn network(&self) -> InferredNetwork {
        match self {
            PathState::Mb { rule, coef, .. } => mb_graph(coef, *rule),
            PathState::Glasso { s, current, .. } => {
                let p = s.nrows();
                let mut edges = Vec::new();
                if let Some(est) = current {
                    for i in 0..p {
                        for j in (i + 1)..p {
                            if est.theta[(i, j)] != 0.0 {
                                edges.push(InferredEdge { i, j, weight: est.theta[(i, j)], stability: 0.0 });
                            }
                        }
                    }
                }
                InferredNetwork { p, method: Method::Glasso, rule: None, edges }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferredEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    pub stability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferredNetwork {
    pub p: usize,
    pub method: Method,
    pub rule: Option<Rule>,
    pub edges: Vec<InferredEdge>,
}

impl InferredNetwork {
    pub fn adjacency(&self) -> Adjacency {
        Adjacency::from_edges(self.p, self.edges.iter().map(|e| (e.i, e.j))).expect("valid edges")
    }
}

/// Combines neighbourhoods. Mutual edges get the mean of the two coefficients, union-only
/// edges the single non-zero one.
pub fn mb_graph(coef: &DMatrix<f64>, rule: Rule) -> InferredNetwork {
    let p = coef.nrows();
    let mut edges = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            let (a, b) = (coef[(i, j)], coef[(j, i)]);
            let keep = match rule {
                Rule::Union => a != 0.0 || b != 0.0,
                Rule::Intersection => a != 0.0 && b != 0.0,
            };
            if keep {
                let weight = if a != 0.0 && b != 0.0 { 0.5 * (a + b) } else { a + b };
                edges.push(InferredEdge { i, j, weight, stability: 0.0 });
            }
        }
    }
    InferredNetwork { p, method: Method::Mb, rule: Some(rule), edges }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferConfig {
    pub method: Method,
    pub rule: Rule,
    pub nlambda: usize,
    pub lambda_min_ratio: f64,
    pub stars: StarsOptions,
    pub glasso_input: GlassoInput,
    pub penalize_diagonal: bool,
    pub pearson_threshold: f64,
    pub pseudocount: u64,
}

impl Default for InferConfig {
    fn default() -> Self {
        Self {
            method: Method::Mb,
            rule: Rule::Union,
            nlambda: 30,
            lambda_min_ratio: 0.01,
            stars: StarsOptions::default(),
            glasso_input: GlassoInput::Correlation,
            penalize_diagonal: true,
            pearson_threshold: 0.35,
            pseudocount: 1,
        }
    }
}

impl InferConfig {
    pub fn estimator(&self) -> Option<Estimator> {
        match self.method {
            Method::Mb => Some(Estimator::Mb { rule: self.rule }),
            Method::Glasso => Some(Estimator::Glasso {
                input: self.glasso_input,
                options: GlassoOptions { penalize_diagonal: self.penalize_diagonal, ..Default::default() },
            }),
            Method::Pearson => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceOutput {
    pub network: InferredNetwork,
    /// Every pair, best first.
    pub ranked: Vec<RankedEdge>,
    pub path: Option<LambdaPath>,
    pub stability: Option<StabilityResult>,
}

/// Runs a method on a prepared data matrix (clr values for the penalised methods).
pub fn infer_matrix(z: &DMatrix<f64>, cfg: &InferConfig) -> Result<InferenceOutput> {
    let Some(estimator) = cfg.estimator() else {
        let r = pearson_network(z, cfg.pearson_threshold)?;
        return Ok(InferenceOutput { network: r.network, ranked: r.ranked, path: None, stability: None });
    };
    let s = estimator.second_moment(z)?;
    let subsamples = subsample_indices(z.nrows(), cfg.stars.fraction, cfg.stars.subsamples, cfg.stars.seed)?;
    let path = stars_path(z, &estimator, &subsamples, cfg.nlambda, cfg.lambda_min_ratio)?;
    let mut sr = stars_from_subsamples(z, &estimator, &path, &subsamples, cfg.stars.beta)?;
    sr.subsample_fraction = cfg.stars.fraction;
    let mut network = estimator.network(&s, &path.values, sr.selected)?;
    let p = z.ncols();
    for e in &mut network.edges {
        e.stability = sr.edge_frequency[sr.selected][pair_index(e.i, e.j, p)];
    }
    let ranked = rank_edges(&sr, p);
    Ok(InferenceOutput { network, ranked, path: Some(path), stability: Some(sr) })
}

/// Applies the default preprocessing for the method, then infers. The penalised methods
/// use the clr transform after a pseudocount; the correlation baseline uses compositions.
pub fn infer(counts: &CountMatrix, cfg: &InferConfig) -> Result<InferenceOutput> {
    let z = match cfg.method {
        Method::Pearson => {
            let closed = compositions::total_sum_scale(&compositions::add_pseudocount(counts, cfg.pseudocount)?)?;
            closed.values().clone()
        }
        _ => compositions::clr_from_counts(counts, cfg.pseudocount)?.values().clone(),
    };
    infer_matrix(&z, cfg)
}
