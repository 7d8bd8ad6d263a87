//! Fixed-length HMC with dual-averaging step size and a diagonal metric.
//!
//! Warmup of `W` transitions: step size adapts over all of it. Positions
//! visited in `[W/2, 3W/4)` estimate the diagonal inverse metric, which is
//! installed at `3W/4`; the step size is then re-initialized and dual
//! averaging restarts for the remaining quarter. With fewer than 20 warmup
//! transitions the unit metric is kept.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::diagnostics::{diagnose_chains, DiagnosticsReport};
use super::model::{ModelData, ModelSpec, ParameterVector};
use super::BtbError;

/// Energy error above which a transition counts as divergent.
pub const MAX_ENERGY_ERROR: f64 = 1000.0;

const MIN_METRIC_WARMUP: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup: usize,
    pub keep: usize,
    pub seed: u64,
    pub leapfrog_steps: usize,
    pub target_accept: f64,
    /// Post-warmup step sizes are drawn uniformly from
    /// `eps * [1 - jitter, 1 + jitter]`.
    pub step_jitter: f64,
    /// Sampling fails when more than this fraction of any chain's warmup
    /// transitions diverge.
    pub max_warmup_divergence: f64,
    /// Initial unconstrained coordinates are uniform on `[-r, r]`.
    pub init_radius: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup: 1000,
            keep: 1000,
            seed: 0,
            leapfrog_steps: 32,
            target_accept: 0.8,
            step_jitter: 0.1,
            max_warmup_divergence: 0.5,
            init_radius: 2.0,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), BtbError> {
        if self.chains == 0 || self.keep == 0 || self.leapfrog_steps == 0 {
            return Err(BtbError::Config(
                "chains, keep and leapfrog steps must be positive".into(),
            ));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(BtbError::Config(format!(
                "target acceptance {} outside (0, 1)",
                self.target_accept
            )));
        }
        if !(0.0..1.0).contains(&self.step_jitter) {
            return Err(BtbError::Config(format!("step jitter {} outside [0, 1)", self.step_jitter)));
        }
        if !(self.init_radius > 0.0) {
            return Err(BtbError::Config("init radius must be positive".into()));
        }
        Ok(())
    }
}

/// Per-chain sampler statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStats {
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    pub warmup_divergences: usize,
    pub divergences: usize,
    /// Mean Metropolis acceptance probability over kept transitions.
    pub mean_accept: f64,
}

/// Post-warmup draws of every chain plus their diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub spec: ModelSpec,
    /// `chains[c][i]` is draw `i` of chain `c`.
    pub chains: Vec<Vec<ParameterVector>>,
    pub stats: Vec<ChainStats>,
    pub diagnostics: DiagnosticsReport,
}

impl PosteriorDraws {
    pub fn n_draws(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }

    /// Total post-warmup divergent transitions.
    pub fn divergences(&self) -> usize {
        self.stats.iter().map(|s| s.divergences).sum()
    }

    /// Draws of every chain for flattened parameter `index`.
    pub fn parameter_chains(&self, index: usize) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|chain| chain.iter().map(|p| p.flatten()[index]).collect())
            .collect()
    }
}

struct DualAveraging {
    mu: f64,
    h_bar: f64,
    log_eps_bar: f64,
    count: f64,
    target: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps: f64, target: f64) -> Self {
        Self {
            mu: (10.0 * eps).ln(),
            h_bar: 0.0,
            log_eps_bar: 0.0,
            count: 0.0,
            target,
        }
    }

    /// Returns the next step size.
    fn update(&mut self, accept: f64) -> f64 {
        self.count += 1.0;
        let w = 1.0 / (self.count + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept);
        let log_eps = self.mu - self.count.sqrt() / Self::GAMMA * self.h_bar;
        let eta = self.count.powf(-Self::KAPPA);
        self.log_eps_bar = eta * log_eps + (1.0 - eta) * self.log_eps_bar;
        log_eps.exp()
    }

    fn final_step(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for i in 0..x.len() {
            let delta = x[i] - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (x[i] - self.mean[i]);
        }
    }

    /// Sample variance shrunk toward 1e-3.
    fn regularized_variance(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.m2
            .iter()
            .map(|m2| {
                let var = m2 / (n - 1.0);
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }
}

struct State {
    q: Vec<f64>,
    lp: f64,
    grad: Vec<f64>,
}

struct Integrator<'a> {
    data: &'a ModelData,
    inv_metric: Vec<f64>,
    steps: usize,
    // Scratch buffers.
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
}

struct Transition {
    accept: f64,
    divergent: bool,
}

impl<'a> Integrator<'a> {
    fn new(data: &'a ModelData, steps: usize) -> Self {
        let dim = data.spec().dim();
        Self {
            data,
            inv_metric: vec![1.0; dim],
            steps,
            q: vec![0.0; dim],
            p: vec![0.0; dim],
            grad: vec![0.0; dim],
        }
    }

    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(&self.inv_metric).map(|(p, m)| m * p * p).sum::<f64>()
    }

    fn draw_momentum(&mut self, rng: &mut ChaCha8Rng) {
        for (p, m) in self.p.iter_mut().zip(&self.inv_metric) {
            let z: f64 = rng.sample(StandardNormal);
            *p = z / m.sqrt();
        }
    }

    /// Integrates `steps` leapfrog steps from `state` with the current
    /// momentum; returns the final log density, or `None` once it stops
    /// being finite.
    fn leapfrog(&mut self, state: &State, eps: f64, steps: usize) -> Option<f64> {
        self.q.copy_from_slice(&state.q);
        self.grad.copy_from_slice(&state.grad);
        let mut lp = state.lp;
        for _ in 0..steps {
            for (p, g) in self.p.iter_mut().zip(&self.grad) {
                *p += 0.5 * eps * g;
            }
            for i in 0..self.q.len() {
                self.q[i] += eps * self.inv_metric[i] * self.p[i];
            }
            if self.q.iter().any(|v| !v.is_finite() || v.abs() > 700.0) {
                return None;
            }
            lp = self.data.log_posterior_into(&self.q, &mut self.grad);
            if !lp.is_finite() || self.grad.iter().any(|g| !g.is_finite()) {
                return None;
            }
            for (p, g) in self.p.iter_mut().zip(&self.grad) {
                *p += 0.5 * eps * g;
            }
        }
        Some(lp)
    }

    fn transition(&mut self, state: &mut State, eps: f64, rng: &mut ChaCha8Rng) -> Transition {
        self.draw_momentum(rng);
        let h0 = -state.lp + self.kinetic(&self.p);
        let proposal = self.leapfrog(state, eps, self.steps);
        let u: f64 = rng.random();
        let Some(lp) = proposal else {
            return Transition {
                accept: 0.0,
                divergent: true,
            };
        };
        let h1 = -lp + self.kinetic(&self.p);
        let error = h1 - h0;
        if !error.is_finite() || error > MAX_ENERGY_ERROR {
            return Transition {
                accept: 0.0,
                divergent: true,
            };
        }
        let accept = (-error).exp().min(1.0);
        if u < accept {
            state.q.copy_from_slice(&self.q);
            state.grad.copy_from_slice(&self.grad);
            state.lp = lp;
        }
        Transition {
            accept,
            divergent: false,
        }
    }

    /// Doubles or halves a unit step until one-step acceptance crosses 1/2.
    fn initial_step_size(&mut self, state: &State, rng: &mut ChaCha8Rng) -> f64 {
        let mut eps = 1.0;
        self.draw_momentum(rng);
        let p0 = self.p.clone();
        let h0 = -state.lp + self.kinetic(&p0);
        let log_accept = |this: &mut Self, eps: f64| -> f64 {
            this.p.copy_from_slice(&p0);
            match this.leapfrog(state, eps, 1) {
                Some(lp) => {
                    let v = h0 - (-lp + this.kinetic(&this.p));
                    if v.is_finite() {
                        v
                    } else {
                        f64::NEG_INFINITY
                    }
                }
                None => f64::NEG_INFINITY,
            }
        };
        let ln_half = 0.5f64.ln();
        let up = log_accept(self, eps) > ln_half;
        for _ in 0..60 {
            let next = if up { eps * 2.0 } else { eps * 0.5 };
            let crossed = (log_accept(self, next) > ln_half) != up;
            if up && crossed {
                break;
            }
            eps = next;
            if !up && crossed {
                break;
            }
        }
        eps
    }
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn init_state(data: &ModelData, radius: f64, rng: &mut ChaCha8Rng) -> Result<State, BtbError> {
    let dim = data.spec().dim();
    let mut grad = vec![0.0; dim];
    for _ in 0..100 {
        let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-radius..=radius)).collect();
        let lp = data.log_posterior_into(&q, &mut grad);
        if lp.is_finite() && grad.iter().all(|g| g.is_finite()) {
            return Ok(State { q, lp, grad });
        }
    }
    Err(BtbError::Sampling("no finite initial point after 100 attempts".into()))
}

struct ChainOutput {
    draws: Vec<ParameterVector>,
    stats: ChainStats,
}

fn run_chain(data: &ModelData, config: &SamplerConfig, chain: usize) -> Result<ChainOutput, BtbError> {
    let mut rng = chain_rng(config.seed, chain);
    let mut state = init_state(data, config.init_radius, &mut rng)?;
    let mut integrator = Integrator::new(data, config.leapfrog_steps);

    let w = config.warmup;
    let (metric_start, metric_end) = if w >= MIN_METRIC_WARMUP {
        (w / 2, 3 * w / 4)
    } else {
        (w, w)
    };
    let mut eps = integrator.initial_step_size(&state, &mut rng);
    let mut adapt = DualAveraging::new(eps, config.target_accept);
    let mut welford = Welford::new(state.q.len());
    let mut warmup_divergences = 0;
    for it in 0..w {
        if it == metric_end && metric_end > metric_start {
            integrator.inv_metric = welford.regularized_variance();
            eps = integrator.initial_step_size(&state, &mut rng);
            adapt = DualAveraging::new(eps, config.target_accept);
        }
        let t = integrator.transition(&mut state, eps, &mut rng);
        warmup_divergences += t.divergent as usize;
        eps = adapt.update(t.accept);
        if (metric_start..metric_end).contains(&it) {
            welford.push(&state.q);
        }
    }
    if w > 0 {
        eps = adapt.final_step();
    }
    if w > 0 && warmup_divergences as f64 > config.max_warmup_divergence * w as f64 {
        return Err(BtbError::Divergent {
            chain,
            divergent: warmup_divergences,
            warmup: w,
            step_size: eps,
        });
    }

    let spec = data.spec();
    let mut draws = Vec::with_capacity(config.keep);
    let mut divergences = 0;
    let mut accept_sum = 0.0;
    for _ in 0..config.keep {
        let jitter: f64 = rng.random_range(-1.0..=1.0);
        let t = integrator.transition(&mut state, eps * (1.0 + config.step_jitter * jitter), &mut rng);
        divergences += t.divergent as usize;
        accept_sum += t.accept;
        draws.push(ParameterVector::from_unconstrained(spec, &state.q));
    }
    Ok(ChainOutput {
        draws,
        stats: ChainStats {
            step_size: eps,
            inv_metric: integrator.inv_metric,
            warmup_divergences,
            divergences,
            mean_accept: accept_sum / config.keep as f64,
        },
    })
}

/// Runs `config.chains` independent chains (in parallel) and returns their
/// post-warmup draws with diagnostics. Chain `c` draws from
/// `ChaCha8Rng::seed_from_u64(seed)` on stream `c`.
pub fn sample(data: &ModelData, config: &SamplerConfig) -> Result<PosteriorDraws, BtbError> {
    config.validate()?;
    let outputs: Vec<Result<ChainOutput, BtbError>> = (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(data, config, c))
        .collect();
    let mut chains = Vec::with_capacity(config.chains);
    let mut stats = Vec::with_capacity(config.chains);
    for out in outputs {
        let out = out?;
        chains.push(out.draws);
        stats.push(out.stats);
    }
    let divergences = stats.iter().map(|s| s.divergences).sum();
    let diagnostics = diagnose_chains(data.spec(), &chains, divergences)?;
    Ok(PosteriorDraws {
        spec: data.spec().clone(),
        chains,
        stats,
        diagnostics,
    })
}
