//! Three-level hierarchical linear regression of normalized metrics on
//! normalized scores, in non-centered unconstrained coordinates.
//!
//! ```text
//! m_i          ~ N(alpha[s,d] + beta[s,d] t_i, sigma[s,d])
//! alpha[s,d]   ~ N(mu_alpha[s], sigma_alpha[s])     beta[s,d] ~ N(mu_beta[s], sigma_beta[s])
//! sigma[s,d]   ~ Exp(sigma[s])
//! mu_alpha[s]  ~ N(mu_alpha, sigma_alpha)           mu_beta[s] ~ N(mu_beta, sigma_beta)
//! sigma_alpha[s] ~ Exp(sigma_alpha)  sigma_beta[s] ~ Exp(sigma_beta)  sigma[s] ~ Exp(sigma)
//! mu_alpha, mu_beta ~ N(0, 1)        sigma_alpha, sigma_beta, sigma ~ Exp(1)
//! ```
//!
//! `Exp` takes a scale. Locations are sampled as standardized offsets
//! (`alpha[s,d] = mu_alpha[s] + sigma_alpha[s] z`) and scales as logs.
//!
//! Unconstrained layout: 5 global coordinates
//! `[mu_alpha, mu_beta, ln sigma_alpha, ln sigma_beta, ln sigma]`, then 5 per
//! scorer `[z_mu_alpha, z_mu_beta, ln sigma_alpha, ln sigma_beta, ln sigma]`,
//! then 3 per (scorer, dataset) cell `[z_alpha, z_beta, ln sigma]`, cells in
//! scorer-major order.

use std::collections::HashMap;

use super::BtbError;
use crate::data::TupleTable;

pub(crate) const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

pub const GLOBAL_DIM: usize = 5;
pub const SCORER_DIM: usize = 5;
pub const CELL_DIM: usize = 3;

/// Scorer and dataset index maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    scorers: Vec<String>,
    datasets: Vec<String>,
}

impl ModelSpec {
    pub fn new(scorers: Vec<String>, datasets: Vec<String>) -> Result<Self, BtbError> {
        if scorers.is_empty() || datasets.is_empty() {
            return Err(BtbError::Spec(
                "model needs at least one scorer and one dataset".into(),
            ));
        }
        Ok(Self { scorers, datasets })
    }

    pub fn scorers(&self) -> &[String] {
        &self.scorers
    }

    pub fn datasets(&self) -> &[String] {
        &self.datasets
    }

    pub fn n_scorers(&self) -> usize {
        self.scorers.len()
    }

    pub fn n_datasets(&self) -> usize {
        self.datasets.len()
    }

    pub fn scorer_index(&self, id: &str) -> Option<usize> {
        self.scorers.iter().position(|s| s == id)
    }

    pub fn dataset_index(&self, id: &str) -> Option<usize> {
        self.datasets.iter().position(|d| d == id)
    }

    /// Number of unconstrained coordinates.
    pub fn dim(&self) -> usize {
        GLOBAL_DIM + SCORER_DIM * self.n_scorers() + CELL_DIM * self.n_scorers() * self.n_datasets()
    }

    pub(crate) fn scorer_offset(&self, s: usize) -> usize {
        GLOBAL_DIM + SCORER_DIM * s
    }

    pub(crate) fn cell_offset(&self, s: usize, d: usize) -> usize {
        GLOBAL_DIM + SCORER_DIM * self.n_scorers() + CELL_DIM * (s * self.n_datasets() + d)
    }

    /// Names of the constrained parameters, in [`ParameterVector::flatten`]
    /// order.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names: Vec<String> = ["mu_alpha", "mu_beta", "sigma_alpha", "sigma_beta", "sigma"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for s in &self.scorers {
            for p in ["mu_alpha", "mu_beta", "sigma_alpha", "sigma_beta", "sigma"] {
                names.push(format!("{p}[{s}]"));
            }
        }
        for s in &self.scorers {
            for d in &self.datasets {
                for p in ["alpha", "beta", "sigma"] {
                    names.push(format!("{p}[{s},{d}]"));
                }
            }
        }
        names
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorerParams {
    pub mu_alpha: f64,
    pub mu_beta: f64,
    pub sigma_alpha: f64,
    pub sigma_beta: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellParams {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
}

/// All model parameters in constrained space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    pub mu_alpha: f64,
    pub mu_beta: f64,
    pub sigma_alpha: f64,
    pub sigma_beta: f64,
    pub sigma: f64,
    /// Indexed by scorer.
    pub scorer: Vec<ScorerParams>,
    /// Indexed by `s * D + d`.
    pub cell: Vec<CellParams>,
}

impl ParameterVector {
    pub fn from_unconstrained(spec: &ModelSpec, u: &[f64]) -> Self {
        let (sa, sb) = (u[2].exp(), u[3].exp());
        let scorer: Vec<ScorerParams> = (0..spec.n_scorers())
            .map(|s| {
                let b = spec.scorer_offset(s);
                ScorerParams {
                    mu_alpha: u[0] + sa * u[b],
                    mu_beta: u[1] + sb * u[b + 1],
                    sigma_alpha: u[b + 2].exp(),
                    sigma_beta: u[b + 3].exp(),
                    sigma: u[b + 4].exp(),
                }
            })
            .collect();
        let mut cell = Vec::with_capacity(spec.n_scorers() * spec.n_datasets());
        for (s, sp) in scorer.iter().enumerate() {
            for d in 0..spec.n_datasets() {
                let c = spec.cell_offset(s, d);
                cell.push(CellParams {
                    alpha: sp.mu_alpha + sp.sigma_alpha * u[c],
                    beta: sp.mu_beta + sp.sigma_beta * u[c + 1],
                    sigma: u[c + 2].exp(),
                });
            }
        }
        Self {
            mu_alpha: u[0],
            mu_beta: u[1],
            sigma_alpha: sa,
            sigma_beta: sb,
            sigma: u[4].exp(),
            scorer,
            cell,
        }
    }

    pub fn to_unconstrained(&self, spec: &ModelSpec) -> Vec<f64> {
        let mut u = vec![0.0; spec.dim()];
        u[0] = self.mu_alpha;
        u[1] = self.mu_beta;
        u[2] = self.sigma_alpha.ln();
        u[3] = self.sigma_beta.ln();
        u[4] = self.sigma.ln();
        for (s, sp) in self.scorer.iter().enumerate() {
            let b = spec.scorer_offset(s);
            u[b] = (sp.mu_alpha - self.mu_alpha) / self.sigma_alpha;
            u[b + 1] = (sp.mu_beta - self.mu_beta) / self.sigma_beta;
            u[b + 2] = sp.sigma_alpha.ln();
            u[b + 3] = sp.sigma_beta.ln();
            u[b + 4] = sp.sigma.ln();
            for d in 0..spec.n_datasets() {
                let cp = &self.cell[s * spec.n_datasets() + d];
                let c = spec.cell_offset(s, d);
                u[c] = (cp.alpha - sp.mu_alpha) / sp.sigma_alpha;
                u[c + 1] = (cp.beta - sp.mu_beta) / sp.sigma_beta;
                u[c + 2] = cp.sigma.ln();
            }
        }
        u
    }

    /// Values in [`ModelSpec::parameter_names`] order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = vec![
            self.mu_alpha,
            self.mu_beta,
            self.sigma_alpha,
            self.sigma_beta,
            self.sigma,
        ];
        for sp in &self.scorer {
            out.extend([sp.mu_alpha, sp.mu_beta, sp.sigma_alpha, sp.sigma_beta, sp.sigma]);
        }
        for cp in &self.cell {
            out.extend([cp.alpha, cp.beta, cp.sigma]);
        }
        out
    }
}

/// Normalized (score, metric) observations bucketed by cell.
#[derive(Debug, Clone)]
pub struct ModelData {
    spec: ModelSpec,
    /// `(start, end)` into `t`/`m` per cell.
    ranges: Vec<(usize, usize)>,
    t: Vec<f64>,
    m: Vec<f64>,
}

impl ModelData {
    /// A model with no observations.
    pub fn empty(spec: ModelSpec) -> Self {
        let cells = spec.n_scorers() * spec.n_datasets();
        Self {
            spec,
            ranges: vec![(0, 0); cells],
            t: Vec::new(),
            m: Vec::new(),
        }
    }

    /// Buckets a z-normalized table; scorer and dataset order follow the
    /// table.
    pub fn from_table(table: &TupleTable) -> Result<Self, BtbError> {
        let spec = ModelSpec::new(table.scorers().to_vec(), table.datasets().to_vec())?;
        Self::with_spec(spec, table)
    }

    /// Buckets a z-normalized table into the cells of `spec`.
    pub fn with_spec(spec: ModelSpec, table: &TupleTable) -> Result<Self, BtbError> {
        if !table.is_normalized() {
            return Err(BtbError::Data("calibration table must be z-normalized".into()));
        }
        let s_index: HashMap<&str, usize> =
            spec.scorers.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let d_index: HashMap<&str, usize> =
            spec.datasets.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();
        let n_cells = spec.n_scorers() * spec.n_datasets();
        let mut buckets: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n_cells];
        for t in table.tuples() {
            let s = *s_index
                .get(t.scorer.as_str())
                .ok_or_else(|| BtbError::UnknownScorer(t.scorer.clone()))?;
            let d = *d_index
                .get(t.dataset.as_str())
                .ok_or_else(|| BtbError::Data(format!("dataset `{}` not in model", t.dataset)))?;
            let m = t.metric.ok_or_else(|| {
                BtbError::Data(format!(
                    "tuple ({}, {}, {}) has no metric",
                    t.architecture, t.dataset, t.scorer
                ))
            })?;
            buckets[s * spec.n_datasets() + d].push((t.score, m));
        }
        Ok(Self::from_buckets(spec, buckets))
    }

    /// Buckets already-normalized `(scorer, dataset, t, m)` observations.
    pub fn from_observations(
        spec: ModelSpec,
        observations: &[(usize, usize, f64, f64)],
    ) -> Result<Self, BtbError> {
        let n_cells = spec.n_scorers() * spec.n_datasets();
        let mut buckets: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n_cells];
        for &(s, d, t, m) in observations {
            if s >= spec.n_scorers() || d >= spec.n_datasets() {
                return Err(BtbError::Data(format!("cell ({s}, {d}) outside the model")));
            }
            if !(t.is_finite() && m.is_finite()) {
                return Err(BtbError::Data(format!("non-finite observation in cell ({s}, {d})")));
            }
            buckets[s * spec.n_datasets() + d].push((t, m));
        }
        Ok(Self::from_buckets(spec, buckets))
    }

    fn from_buckets(spec: ModelSpec, buckets: Vec<Vec<(f64, f64)>>) -> Self {
        let mut ranges = Vec::with_capacity(buckets.len());
        let (mut ts, mut ms) = (Vec::new(), Vec::new());
        for bucket in buckets {
            let start = ts.len();
            for (t, m) in bucket {
                ts.push(t);
                ms.push(m);
            }
            ranges.push((start, ts.len()));
        }
        Self {
            spec,
            ranges,
            t: ts,
            m: ms,
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn n_observations(&self) -> usize {
        self.t.len()
    }

    /// (t, m) observations of one cell.
    pub fn cell_observations(&self, s: usize, d: usize) -> (&[f64], &[f64]) {
        let (a, b) = self.ranges[s * self.spec.n_datasets() + d];
        (&self.t[a..b], &self.m[a..b])
    }

    /// Log posterior density (including all normalizing constants) and its
    /// gradient at unconstrained point `u`.
    pub fn log_posterior(&self, u: &[f64]) -> Result<(f64, Vec<f64>), BtbError> {
        if u.len() != self.spec.dim() {
            return Err(BtbError::Spec(format!(
                "expected {} coordinates, got {}",
                self.spec.dim(),
                u.len()
            )));
        }
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(BtbError::NonFinite(i));
        }
        let mut grad = vec![0.0; u.len()];
        let lp = self.log_posterior_into(u, &mut grad);
        Ok((lp, grad))
    }

    /// Unchecked version of [`Self::log_posterior`] writing into `grad`.
    pub(crate) fn log_posterior_into(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let spec = &self.spec;
        let n_d = spec.n_datasets();
        let (ma, mb) = (u[0], u[1]);
        let (sa, sb, sg) = (u[2].exp(), u[3].exp(), u[4].exp());

        // mu_alpha, mu_beta ~ N(0, 1); scales ~ Exp(1) with log-Jacobian.
        let mut lp = -0.5 * (ma * ma + mb * mb) - 2.0 * HALF_LN_2PI;
        lp += -sa + u[2] - sb + u[3] - sg + u[4];
        grad[0] -= ma;
        grad[1] -= mb;
        grad[2] += 1.0 - sa;
        grad[3] += 1.0 - sb;
        grad[4] += 1.0 - sg;

        for s in 0..spec.n_scorers() {
            let b = spec.scorer_offset(s);
            let (zma, zmb) = (u[b], u[b + 1]);
            let mas = ma + sa * zma;
            let mbs = mb + sb * zmb;
            let (sas, sbs, ss) = (u[b + 2].exp(), u[b + 3].exp(), u[b + 4].exp());

            lp += -0.5 * (zma * zma + zmb * zmb) - 2.0 * HALF_LN_2PI;
            grad[b] -= zma;
            grad[b + 1] -= zmb;

            // Exp(scale) priors on the scorer-level scales.
            lp += -u[2] - sas / sa + u[b + 2];
            grad[2] += sas / sa - 1.0;
            grad[b + 2] += 1.0 - sas / sa;
            lp += -u[3] - sbs / sb + u[b + 3];
            grad[3] += sbs / sb - 1.0;
            grad[b + 3] += 1.0 - sbs / sb;
            lp += -u[4] - ss / sg + u[b + 4];
            grad[4] += ss / sg - 1.0;
            grad[b + 4] += 1.0 - ss / sg;

            let (mut g_mas, mut g_mbs) = (0.0, 0.0);
            for d in 0..n_d {
                let c = spec.cell_offset(s, d);
                let (za, zb, lsd) = (u[c], u[c + 1], u[c + 2]);
                let alpha = mas + sas * za;
                let beta = mbs + sbs * zb;
                let ssd = lsd.exp();

                lp += -0.5 * (za * za + zb * zb) - 2.0 * HALF_LN_2PI;
                grad[c] -= za;
                grad[c + 1] -= zb;

                lp += -u[b + 4] - ssd / ss + lsd;
                grad[b + 4] += ssd / ss - 1.0;
                grad[c + 2] += 1.0 - ssd / ss;

                let (a, e) = self.ranges[s * n_d + d];
                if a == e {
                    continue;
                }
                let inv_var = 1.0 / (ssd * ssd);
                let (mut sse, mut g_alpha, mut g_beta) = (0.0, 0.0, 0.0);
                for (&t, &m) in self.t[a..e].iter().zip(&self.m[a..e]) {
                    let r = m - alpha - beta * t;
                    sse += r * r;
                    g_alpha += r;
                    g_beta += r * t;
                }
                let n = (e - a) as f64;
                g_alpha *= inv_var;
                g_beta *= inv_var;
                lp += -n * (lsd + HALF_LN_2PI) - 0.5 * sse * inv_var;
                grad[c + 2] += sse * inv_var - n;
                grad[c] += g_alpha * sas;
                grad[b + 2] += g_alpha * sas * za;
                grad[c + 1] += g_beta * sbs;
                grad[b + 3] += g_beta * sbs * zb;
                g_mas += g_alpha;
                g_mbs += g_beta;
            }
            grad[0] += g_mas;
            grad[b] += g_mas * sa;
            grad[2] += g_mas * sa * zma;
            grad[1] += g_mbs;
            grad[b + 1] += g_mbs * sb;
            grad[3] += g_mbs * sb * zmb;
        }
        lp
    }
}
