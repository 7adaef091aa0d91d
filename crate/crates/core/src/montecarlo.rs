//! Direct simulation of the secrecy events.
//!
//! Paired `(g_d, g_e)` draws are split across `workers` substreams; worker
//! `w` owns `stream_rng(seed, w)` and its share of the samples, and the merge
//! only adds integer counts. Estimates therefore depend on `(seed, workers)`
//! alone.

use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{ChannelParams, GkDistribution, MixedGammaModel, MixtureDistribution, DEFAULT_ORDER};
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::secrecy::SecrecyConfig;

pub const MIN_SAMPLES: u64 = 1000;
pub const DEFAULT_SAMPLES: u64 = 10_000_000;

/// Which law the SNRs are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingLaw {
    /// Product of two Gamma variates, the exact GK law.
    #[default]
    ExactGk,
    /// The mixed-Gamma surrogate of order `McConfig::mixture_order`.
    SurrogateMixture,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    pub law: SamplingLaw,
    pub workers: usize,
    /// Mixture order used when `law` is `SurrogateMixture`.
    pub mixture_order: usize,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64) -> Result<Self> {
        let cfg = Self {
            samples,
            seed,
            law: SamplingLaw::ExactGk,
            workers: 1,
            mixture_order: DEFAULT_ORDER,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_law(self, law: SamplingLaw) -> Self {
        Self { law, ..self }
    }

    pub fn with_workers(self, workers: usize) -> Self {
        Self { workers, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < MIN_SAMPLES {
            return Err(Error::InvalidArgument(format!(
                "Monte Carlo needs at least {MIN_SAMPLES} samples, got {}",
                self.samples
            )));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("worker count must be >= 1".into()));
        }
        Ok(())
    }
}

/// Binomial proportion with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    /// Samples that entered the estimator (`g_d > mu` for the conditional one).
    pub accepted: u64,
    pub total: u64,
}

impl McEstimate {
    fn proportion(hits: u64, accepted: u64, total: u64) -> Self {
        let value = hits as f64 / accepted as f64;
        let stderr = (value * (1.0 - value) / accepted as f64).sqrt();
        Self {
            value,
            stderr,
            accepted,
            total,
        }
    }
}

/// One row of a rate sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapPoint {
    pub rate_rs: f64,
    pub proposed: McEstimate,
    pub conventional: McEstimate,
    /// `|conventional - proposed|`.
    pub gap: f64,
}

/// Conditional (leakage) SOP estimate: leaks among samples with `g_d > mu`.
pub fn mc_sop(
    d_params: &ChannelParams,
    e_params: &ChannelParams,
    cfg: &SecrecyConfig,
    mc: &McConfig,
) -> Result<McEstimate> {
    let counts = simulate(d_params, e_params, cfg.mu(), &[cfg.lambda()], mc)?;
    conditional_estimate(&counts[0], cfg.mu())
}

/// Unconditional estimate of `Pr{ g_d < lambda - 1 + lambda g_e }`.
pub fn mc_sop_conventional(
    d_params: &ChannelParams,
    e_params: &ChannelParams,
    rate_rs: f64,
    mc: &McConfig,
) -> Result<McEstimate> {
    let cfg = SecrecyConfig::conventional(rate_rs)?;
    let counts = simulate(d_params, e_params, 0.0, &[cfg.lambda()], mc)?;
    let c = &counts[0];
    Ok(McEstimate::proportion(c.leaks, c.total, c.total))
}

/// Proposed and conventional SOP over a rate grid from one shared set of draws.
pub fn mc_gap_curve(
    d_params: &ChannelParams,
    e_params: &ChannelParams,
    mu: f64,
    rs_grid: &[f64],
    mc: &McConfig,
) -> Result<Vec<GapPoint>> {
    if rs_grid.is_empty() {
        return Err(Error::InvalidArgument("rate grid is empty".into()));
    }
    if !rs_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument("rate grid must be strictly increasing".into()));
    }
    let configs = rs_grid
        .iter()
        .map(|&rs| SecrecyConfig::new(rs, mu))
        .collect::<Result<Vec<_>>>()?;
    let lambdas: Vec<f64> = configs.iter().map(SecrecyConfig::lambda).collect();
    let counts = simulate(d_params, e_params, mu, &lambdas, mc)?;
    rs_grid
        .iter()
        .zip(&counts)
        .map(|(&rate_rs, c)| {
            let proposed = conditional_estimate(c, mu)?;
            let conventional = McEstimate::proportion(c.leaks, c.total, c.total);
            Ok(GapPoint {
                rate_rs,
                proposed,
                conventional,
                gap: (conventional.value - proposed.value).abs(),
            })
        })
        .collect()
}

fn conditional_estimate(c: &Counts, mu: f64) -> Result<McEstimate> {
    if c.accepted == 0 {
        return Err(Error::EmptyConditioning(format!(
            "no sample among {} had g_d > mu = {mu}",
            c.total
        )));
    }
    Ok(McEstimate::proportion(c.leaks_reliable, c.accepted, c.total))
}

/// Event counts for one rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    total: u64,
    /// `g_d > mu`
    accepted: u64,
    /// `mu < g_d < lambda - 1 + lambda g_e`
    leaks_reliable: u64,
    /// `g_d < lambda - 1 + lambda g_e`
    leaks: u64,
}

impl Counts {
    fn merge(mut self, other: &Counts) -> Self {
        self.total += other.total;
        self.accepted += other.accepted;
        self.leaks_reliable += other.leaks_reliable;
        self.leaks += other.leaks;
        self
    }
}

enum LinkSampler {
    Exact(GkDistribution),
    Mixture(MixtureDistribution),
}

impl LinkSampler {
    fn new(params: &ChannelParams, mc: &McConfig) -> Result<Self> {
        Ok(match mc.law {
            SamplingLaw::ExactGk => LinkSampler::Exact(GkDistribution::new(params)?),
            SamplingLaw::SurrogateMixture => {
                let model = MixedGammaModel::fit(params, mc.mixture_order)?;
                LinkSampler::Mixture(MixtureDistribution::new(&model)?)
            }
        })
    }
}

impl Distribution<f64> for LinkSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            LinkSampler::Exact(d) => d.sample(rng),
            LinkSampler::Mixture(d) => d.sample(rng),
        }
    }
}

fn simulate(
    d_params: &ChannelParams,
    e_params: &ChannelParams,
    mu: f64,
    lambdas: &[f64],
    mc: &McConfig,
) -> Result<Vec<Counts>> {
    mc.validate()?;
    let d = LinkSampler::new(d_params, mc)?;
    let e = LinkSampler::new(e_params, mc)?;
    let workers = mc.workers as u64;
    let per_worker: Vec<Vec<Counts>> = (0..workers)
        .into_par_iter()
        .map(|w| {
            let n = mc.samples / workers + u64::from(w < mc.samples % workers);
            let mut rng = stream_rng(mc.seed, w);
            let mut counts = vec![Counts::default(); lambdas.len()];
            for _ in 0..n {
                let gd = d.sample(&mut rng);
                let ge = e.sample(&mut rng);
                let reliable = gd > mu;
                for (c, &lambda) in counts.iter_mut().zip(lambdas) {
                    let leak = gd < lambda - 1.0 + lambda * ge;
                    c.total += 1;
                    c.accepted += u64::from(reliable);
                    c.leaks += u64::from(leak);
                    c.leaks_reliable += u64::from(leak && reliable);
                }
            }
            counts
        })
        .collect();
    Ok((0..lambdas.len())
        .map(|i| per_worker.iter().fold(Counts::default(), |acc, w| acc.merge(&w[i])))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(k: f64, m: u32, db: f64) -> ChannelParams {
        ChannelParams::from_db(k, m, db).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(McConfig::new(999, 1).is_err());
        assert!(McConfig::new(1000, 1).unwrap().with_workers(0).validate().is_err());
    }

    #[test]
    fn symmetric_links_give_one_half() {
        let p = link(3.0, 2, 3.0);
        let cfg = SecrecyConfig::new(0.0, 0.0).unwrap();
        let est = mc_sop(&p, &p, &cfg, &McConfig::new(1_000_000, 11).unwrap()).unwrap();
        assert!((est.value - 0.5).abs() <= 3.0 * est.stderr, "{est:?}");
        assert_eq!(est.accepted, est.total);
    }

    #[test]
    fn stderr_matches_binomial_formula() {
        let est = mc_sop(
            &link(3.0, 2, 10.0),
            &link(3.0, 2, 0.0),
            &SecrecyConfig::new(1.0, 3.0).unwrap(),
            &McConfig::new(20_000, 3).unwrap(),
        )
        .unwrap();
        let expected = (est.value * (1.0 - est.value) / est.accepted as f64).sqrt();
        assert_eq!(est.stderr, expected);
        assert!(est.accepted <= est.total);
    }

    #[test]
    fn deterministic_for_fixed_seed_and_workers() {
        let mc = McConfig::new(50_000, 99).unwrap().with_workers(4);
        let cfg = SecrecyConfig::new(1.0, 3.0).unwrap();
        let a = mc_sop(&link(3.0, 2, 10.0), &link(3.0, 2, 0.0), &cfg, &mc).unwrap();
        let b = mc_sop(&link(3.0, 2, 10.0), &link(3.0, 2, 0.0), &cfg, &mc).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total, 50_000);
    }

    #[test]
    fn conventional_equals_zero_threshold_conditional() {
        let mc = McConfig::new(100_000, 5).unwrap().with_workers(3);
        let d = link(3.0, 2, 10.0);
        let e = link(3.0, 2, 1.0);
        let conv = mc_sop_conventional(&d, &e, 1.0, &mc).unwrap();
        let cond = mc_sop(&d, &e, &SecrecyConfig::new(1.0, 0.0).unwrap(), &mc).unwrap();
        assert_eq!(conv, cond);
    }

    #[test]
    fn huge_rate_means_certain_outage() {
        let mc = McConfig::new(100_000, 8).unwrap();
        let est = mc_sop_conventional(&link(3.0, 2, 10.0), &link(3.0, 2, 1.0), 20.0, &mc).unwrap();
        assert!((1.0 - est.value) <= 3.0 * est.stderr + 1e-12);
    }

    #[test]
    fn empty_conditioning_event() {
        let mc = McConfig::new(1000, 1).unwrap();
        let cfg = SecrecyConfig::new(1.0, 1e12).unwrap();
        assert!(matches!(
            mc_sop(&link(3.0, 2, 0.0), &link(3.0, 2, 0.0), &cfg, &mc),
            Err(Error::EmptyConditioning(_))
        ));
    }

    #[test]
    fn gap_curve_validation_and_determinism() {
        let mc = McConfig::new(20_000, 2).unwrap();
        let d = link(3.0, 2, 10.0);
        let e = link(3.0, 2, 1.0);
        assert!(mc_gap_curve(&d, &e, 3.0, &[], &mc).is_err());
        assert!(mc_gap_curve(&d, &e, 3.0, &[1.0, 0.5], &mc).is_err());
        let a = mc_gap_curve(&d, &e, 3.0, &[0.0, 1.0, 2.0], &mc).unwrap();
        let b = mc_gap_curve(&d, &e, 3.0, &[0.0, 1.0, 2.0], &mc).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|p| p.gap.is_finite()));
        // Each rate matches a standalone run with the same seed.
        let single = mc_sop(&d, &e, &SecrecyConfig::new(1.0, 3.0).unwrap(), &mc).unwrap();
        assert_eq!(a[1].proposed, single);
    }
}
