//! Generalized-K links and their mixed-Gamma surrogate.
//!
//! The instantaneous SNR of a GK link is `gbar * X * Y / (k m)` with
//! independent `X ~ Gamma(k, 1)` (shadowing) and `Y ~ Gamma(m, 1)`
//! (multipath). Conditioning on one factor leaves a Gamma law in the other;
//! averaging over the conditioned factor with an `L`-point Gauss-Laguerre rule
//! gives a finite Gamma mixture
//!
//! ```text
//! f(x) = sum_j a_j x^(s-1) exp(-zeta_j x)
//! F(x) = 1 - sum_j sum_{n<s} A_j (zeta_j x)^n exp(-zeta_j x) / n!
//! ```
//!
//! with `zeta_j = k m / (t_j gbar)`, `A_j = Gamma(s) a_j zeta_j^-s` and
//! `sum_j A_j = 1`. The component shape `s` is normally `m`; when `k` is an
//! integer smaller than `m` the roles are exchanged (the law is symmetric in
//! `k` and `m`) so that the mixture keeps the true small-SNR order
//! `min(k, m)`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Gamma;

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::specfun::{
    gauss_laguerre, ln_factorial, ln_gamma_unchecked, log_add_exp, regularized_lower_gamma, CompensatedSum,
};

/// Mixture order used throughout unless overridden.
pub const DEFAULT_ORDER: usize = 15;

const NORMALIZATION_TOL: f64 = 1e-10;
const UNIT_INTERVAL_SLACK: f64 = 1e-9;

/// Converts an SNR in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Shape and scale parameters of one GK fading link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    k: f64,
    m: u32,
    gamma_bar: f64,
}

impl ChannelParams {
    /// `k` is the shadowing shape, `m` the multipath shape and `gamma_bar`
    /// the average SNR on a linear scale.
    pub fn new(k: f64, m: u32, gamma_bar: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "shadowing shape k must be > 0, got {k}"
            )));
        }
        if m == 0 {
            return Err(Error::InvalidArgument(
                "multipath shape m must be a positive integer".into(),
            ));
        }
        if !(gamma_bar > 0.0) || !gamma_bar.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "average SNR must be finite and > 0, got {gamma_bar}"
            )));
        }
        Ok(Self { k, m, gamma_bar })
    }

    pub fn from_db(k: f64, m: u32, gamma_bar_db: f64) -> Result<Self> {
        Self::new(k, m, db_to_linear(gamma_bar_db))
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn gamma_bar(&self) -> f64 {
        self.gamma_bar
    }

    pub fn gamma_bar_db(&self) -> f64 {
        linear_to_db(self.gamma_bar)
    }

    pub fn with_gamma_bar(&self, gamma_bar: f64) -> Result<Self> {
        Self::new(self.k, self.m, gamma_bar)
    }

    /// `min(k, m)`: the order of the CDF at the origin.
    pub fn diversity_order(&self) -> f64 {
        self.k.min(self.m as f64)
    }
}

/// One Gamma component of the surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureTerm {
    /// PDF coefficient `a_j`.
    pub a: f64,
    /// Rate `zeta_j`.
    pub zeta: f64,
    /// CDF weight `A_j`, the probability mass of the component.
    pub weight: f64,
}

/// `L`-term Gamma mixture standing in for a GK link.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedGammaModel {
    source: ChannelParams,
    shape: u32,
    terms: Vec<MixtureTerm>,
}

impl MixedGammaModel {
    /// Fits the `order`-term surrogate of `params`.
    pub fn fit(params: &ChannelParams, order: usize) -> Result<Self> {
        let rule = gauss_laguerre(order)?;
        let (shape, mixing) = component_orientation(params);
        let s = shape as f64;
        let km = params.k * params.m as f64;
        let ln_gamma_shape = ln_gamma_unchecked(s);
        let ln_gamma_mixing = ln_gamma_unchecked(mixing);
        let ln_scale = (km / params.gamma_bar).ln();

        // Per-node: ln theta_j, ln zeta_j and the unnormalized mass ln(theta_j Gamma(s) zeta_j^-s).
        let raw: Vec<(f64, f64, f64)> = rule
            .nodes()
            .iter()
            .zip(rule.weights())
            .map(|(&t, &w)| {
                let ln_t = t.ln();
                let ln_theta = s * ln_scale + w.ln() + (mixing - s - 1.0) * ln_t - ln_gamma_shape - ln_gamma_mixing;
                let ln_zeta = ln_scale - ln_t;
                (ln_theta, ln_zeta, ln_theta + ln_gamma_shape - s * ln_zeta)
            })
            .collect();
        let ln_norm = raw.iter().fold(f64::NEG_INFINITY, |acc, r| log_add_exp(acc, r.2));
        let terms = raw
            .iter()
            .map(|&(ln_theta, ln_zeta, ln_mass)| MixtureTerm {
                a: (ln_theta - ln_norm).exp(),
                zeta: ln_zeta.exp(),
                weight: (ln_mass - ln_norm).exp(),
            })
            .collect();
        let model = Self {
            source: *params,
            shape,
            terms,
        };
        model.check_normalization()?;
        Ok(model)
    }

    /// Builds a model from explicit terms, enforcing the normalization invariants.
    pub fn from_terms(source: ChannelParams, shape: u32, terms: Vec<MixtureTerm>) -> Result<Self> {
        if shape == 0 || terms.is_empty() {
            return Err(Error::InvalidArgument(
                "mixture needs shape >= 1 and at least one term".into(),
            ));
        }
        if terms.iter().any(|t| !(t.zeta > 0.0) || !t.zeta.is_finite()) {
            return Err(Error::InvalidArgument(
                "every mixture rate zeta_j must be finite and > 0".into(),
            ));
        }
        let model = Self { source, shape, terms };
        model.check_normalization()?;
        Ok(model)
    }

    /// Verifies `sum_j A_j = 1` and `sum_j a_j Gamma(s) zeta_j^-s = 1`.
    pub fn check_normalization(&self) -> Result<()> {
        let s = self.shape as f64;
        let lg = ln_gamma_unchecked(s);
        let mass: CompensatedSum = self.terms.iter().map(|t| t.weight).collect();
        let pdf_mass: CompensatedSum = self.terms.iter().map(|t| t.a * (lg - s * t.zeta.ln()).exp()).collect();
        let (mass, pdf_mass) = (mass.total(), pdf_mass.total());
        if (mass - 1.0).abs() > NORMALIZATION_TOL || (pdf_mass - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InternalConsistency(format!(
                "mixture normalization violated: sum A_j = {mass:.15}, integral of pdf = {pdf_mass:.15}"
            )));
        }
        Ok(())
    }

    pub fn source(&self) -> &ChannelParams {
        &self.source
    }

    /// Number of mixture terms `L`.
    pub fn order(&self) -> usize {
        self.terms.len()
    }

    /// Integer shape of every Gamma component.
    pub fn shape(&self) -> u32 {
        self.shape
    }

    pub fn terms(&self) -> &[MixtureTerm] {
        &self.terms
    }

    /// True when some `a_j < 0`, i.e. the model is a signed measure.
    pub fn has_negative_weights(&self) -> bool {
        self.terms.iter().any(|t| t.a < 0.0 || t.weight < 0.0)
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        check_support(x)?;
        if x == 0.0 {
            return Ok(if self.shape == 1 {
                self.terms.iter().map(|t| t.a).sum()
            } else {
                0.0
            });
        }
        let pow = (self.shape as f64 - 1.0) * x.ln();
        let sum: CompensatedSum = self.terms.iter().map(|t| t.a * (pow - t.zeta * x).exp()).collect();
        Ok(sum.total())
    }

    /// `F(x) = sum_j A_j P(s, zeta_j x)`, which is accurate even when `F` is tiny.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_support(x)?;
        let s = self.shape as f64;
        let mut sum = CompensatedSum::default();
        for t in &self.terms {
            sum.add(t.weight * regularized_lower_gamma(s, t.zeta * x)?);
        }
        clamp_probability(sum.total(), "cdf", x)
    }

    /// `1 - F(x)` as the direct finite sum, accurate when it is tiny.
    pub fn ccdf(&self, x: f64) -> Result<f64> {
        check_support(x)?;
        let mut sum = CompensatedSum::default();
        for t in &self.terms {
            sum.add(t.weight * poisson_head(self.shape, t.zeta * x));
        }
        clamp_probability(sum.total(), "ccdf", x)
    }
}

/// `(component shape, mixing shape)` for a fit of `params`.
fn component_orientation(params: &ChannelParams) -> (u32, f64) {
    let m = params.m as f64;
    if params.k < m && params.k.fract() == 0.0 {
        (params.k as u32, m)
    } else {
        (params.m, params.k)
    }
}

/// `e^-z sum_{n<shape} z^n / n!`, the regularized upper gamma for integer shape.
pub(crate) fn poisson_head(shape: u32, z: f64) -> f64 {
    if z == 0.0 {
        return 1.0;
    }
    let ln_z = z.ln();
    (0..shape as usize)
        .map(|n| (n as f64 * ln_z - z - ln_factorial(n)).exp())
        .sum()
}

fn check_support(x: f64) -> Result<()> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("SNR argument must be >= 0, got {x}")));
    }
    Ok(())
}

fn clamp_probability(value: f64, what: &str, x: f64) -> Result<f64> {
    if !(-UNIT_INTERVAL_SLACK..=1.0 + UNIT_INTERVAL_SLACK).contains(&value) {
        return Err(Error::InternalConsistency(format!(
            "{what}({x}) = {value} lies outside [0, 1]"
        )));
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Exact GK law `gbar X Y / (k m)`.
#[derive(Debug, Clone, Copy)]
pub struct GkDistribution {
    shadowing: Gamma<f64>,
    multipath: Gamma<f64>,
    scale: f64,
}

impl GkDistribution {
    pub fn new(params: &ChannelParams) -> Result<Self> {
        let gamma =
            |shape: f64| Gamma::new(shape, 1.0).map_err(|e| Error::InvalidArgument(format!("Gamma({shape}, 1): {e}")));
        Ok(Self {
            shadowing: gamma(params.k)?,
            multipath: gamma(params.m as f64)?,
            scale: params.gamma_bar / (params.k * params.m as f64),
        })
    }
}

impl Distribution<f64> for GkDistribution {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.scale * self.shadowing.sample(rng) * self.multipath.sample(rng)
    }
}

/// Sampler for the mixture itself: component `j` with probability `A_j`,
/// then a `Gamma(s, 1 / zeta_j)` variate.
#[derive(Debug, Clone)]
pub struct MixtureDistribution {
    pick: WeightedIndex<f64>,
    components: Vec<Gamma<f64>>,
}

impl MixtureDistribution {
    pub fn new(model: &MixedGammaModel) -> Result<Self> {
        if model.has_negative_weights() {
            return Err(Error::Unsupported(
                "mixture has negative weights (signed measure) and cannot be sampled".into(),
            ));
        }
        let pick = WeightedIndex::new(model.terms().iter().map(|t| t.weight))
            .map_err(|e| Error::Unsupported(format!("mixture weights cannot be sampled: {e}")))?;
        let components = model
            .terms()
            .iter()
            .map(|t| Gamma::new(model.shape() as f64, 1.0 / t.zeta))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidArgument(format!("mixture component: {e}")))?;
        Ok(Self { pick, components })
    }
}

impl Distribution<f64> for MixtureDistribution {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.components[self.pick.sample(rng)].sample(rng)
    }
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    Ok(())
}

/// `n` i.i.d. draws from the exact GK law, reproducible from `seed`.
pub fn sample_exact(params: &ChannelParams, n: usize, seed: u64) -> Result<impl Iterator<Item = f64>> {
    check_count(n)?;
    let dist = GkDistribution::new(params)?;
    Ok(dist.sample_iter(stream_rng(seed, 0)).take(n))
}

/// `n` i.i.d. draws from the mixture surrogate, reproducible from `seed`.
pub fn sample_surrogate(model: &MixedGammaModel, n: usize, seed: u64) -> Result<impl Iterator<Item = f64>> {
    check_count(n)?;
    let dist = MixtureDistribution::new(model)?;
    Ok(dist.sample_iter(stream_rng(seed, 0)).take(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{integrate_semi_infinite, QuadratureSpec};
    use approx::assert_relative_eq;

    fn model(k: f64, m: u32, gbar: f64) -> MixedGammaModel {
        MixedGammaModel::fit(&ChannelParams::new(k, m, gbar).unwrap(), DEFAULT_ORDER).unwrap()
    }

    #[test]
    fn params_validation_and_db() {
        assert!(ChannelParams::new(0.0, 2, 1.0).is_err());
        assert!(ChannelParams::new(3.0, 0, 1.0).is_err());
        assert!(ChannelParams::new(3.0, 2, -1.0).is_err());
        assert_eq!(ChannelParams::from_db(3.0, 2, 0.0).unwrap().gamma_bar(), 1.0);
        assert_relative_eq!(ChannelParams::from_db(3.0, 2, 10.0).unwrap().gamma_bar(), 10.0);
        assert_relative_eq!(
            ChannelParams::from_db(3.0, 2, 3.0).unwrap().gamma_bar(),
            10f64.powf(0.3),
            max_relative = 1e-15
        );
    }

    #[test]
    fn weights_sum_to_one() {
        for m in [1, 2, 4, 5] {
            let md = model(3.0, m, 1.0);
            let total: f64 = md.terms().iter().map(|t| t.weight).sum();
            assert!((total - 1.0).abs() <= 1e-10);
            assert!(md.terms().iter().all(|t| t.zeta > 0.0));
            assert!(!md.has_negative_weights());
        }
    }

    #[test]
    fn orientation_follows_smaller_integer_shape() {
        assert_eq!(model(3.0, 2, 1.0).shape(), 2);
        assert_eq!(model(3.0, 5, 1.0).shape(), 3);
        assert_eq!(model(2.5, 4, 1.0).shape(), 4);
    }

    #[test]
    fn unit_shape_cdf_is_single_exponential_sum() {
        let md = model(3.0, 1, 1.0);
        for &x in &[0.0, 0.1, 0.7, 2.0, 9.0] {
            let direct: f64 = 1.0 - md.terms().iter().map(|t| t.weight * (-t.zeta * x).exp()).sum::<f64>();
            assert!((md.cdf(x).unwrap() - direct).abs() < 1e-14);
            let ccdf: f64 = md.terms().iter().map(|t| t.weight * (-t.zeta * x).exp()).sum();
            assert!((md.ccdf(x).unwrap() - ccdf).abs() < 1e-15);
        }
    }

    #[test]
    fn boundary_values() {
        let md = model(3.0, 2, 1.0);
        assert_eq!(md.pdf(0.0).unwrap(), 0.0);
        assert_eq!(md.cdf(0.0).unwrap(), 0.0);
        assert_eq!(md.ccdf(0.0).unwrap(), 1.0);
        assert!((md.cdf(1e9).unwrap() - 1.0).abs() < 1e-9);
        assert!(matches!(md.pdf(-1.0), Err(Error::Domain(_))));
        assert!(matches!(md.cdf(-1e-3), Err(Error::Domain(_))));
        assert!(matches!(md.ccdf(-2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn pdf_integrates_to_one_and_cdf_matches_quadrature() {
        let md = model(3.0, 2, 1.0);
        let spec = QuadratureSpec::relative(1e-12);
        let total = integrate_semi_infinite(|x| md.pdf(x).unwrap(), 0.0, &spec).unwrap();
        assert!((total - 1.0).abs() < 1e-9);
        let tail = integrate_semi_infinite(|x| md.pdf(x).unwrap(), 1.0, &spec).unwrap();
        assert!((md.cdf(1.0).unwrap() - (1.0 - tail)).abs() < 1e-9);
    }

    #[test]
    fn ccdf_is_complement_of_cdf() {
        for m in [1, 2, 4, 5] {
            let md = model(3.0, m, 1.0);
            for i in 0..200 {
                let x = 0.05 * i as f64;
                let diff = md.ccdf(x).unwrap() - (1.0 - md.cdf(x).unwrap());
                assert!(diff.abs() <= 1e-12, "m={m} x={x} diff={diff:e}");
            }
        }
        let md = model(3.0, 2, 1.0);
        assert!((md.ccdf(3.0).unwrap() - (1.0 - md.cdf(3.0).unwrap())).abs() <= 1e-12);
    }

    #[test]
    fn cdf_is_monotone_and_differentiates_to_pdf() {
        for m in [1, 2, 4, 5] {
            let gbar = 2.0;
            let md = model(3.0, m, gbar);
            let grid: Vec<f64> = (0..=400).map(|i| 20.0 * gbar * i as f64 / 400.0).collect();
            let cdf: Vec<f64> = grid.iter().map(|&x| md.cdf(x).unwrap()).collect();
            assert!(cdf.windows(2).all(|w| w[1] >= w[0]));
            for &x in grid.iter().skip(1).step_by(7) {
                let pdf = md.pdf(x).unwrap();
                if pdf <= 1e-8 {
                    continue;
                }
                // Differentiate the smaller of F and 1 - F to avoid cancellation near 1.
                let g = |y: f64| {
                    if md.cdf(x).unwrap() < 0.5 {
                        md.cdf(y).unwrap()
                    } else {
                        -md.ccdf(y).unwrap()
                    }
                };
                let h = 1e-3 * x.max(1e-2);
                let fd = (8.0 * (g(x + h) - g(x - h)) - (g(x + 2.0 * h) - g(x - 2.0 * h))) / (12.0 * h);
                assert!((fd - pdf).abs() <= 1e-6 * pdf, "m={m} x={x}: fd {fd} pdf {pdf}");
            }
        }
    }

    #[test]
    fn scaling_covariance() {
        let base = model(3.0, 2, 1.0);
        for &c in &[0.01, 3.7, 1e4] {
            let scaled = model(3.0, 2, c);
            for &x in &[0.05, 0.5, 1.0, 4.0] {
                assert!((base.cdf(x).unwrap() - scaled.cdf(c * x).unwrap()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn from_terms_rejects_broken_normalization() {
        let md = model(3.0, 2, 1.0);
        let mut terms = md.terms().to_vec();
        terms[3].a *= 1.001;
        assert!(matches!(
            MixedGammaModel::from_terms(*md.source(), md.shape(), terms),
            Err(Error::InternalConsistency(_))
        ));
        let ok = MixedGammaModel::from_terms(*md.source(), md.shape(), md.terms().to_vec()).unwrap();
        assert_eq!(ok, md);
    }

    #[test]
    fn signed_mixture_cannot_be_sampled() {
        let src = ChannelParams::new(3.0, 1, 1.0).unwrap();
        // 1.5 Exp(1) - 0.5 Exp(2)... as a signed but normalized mixture with shape 1.
        let terms = vec![
            MixtureTerm {
                a: 1.5,
                zeta: 1.0,
                weight: 1.5,
            },
            MixtureTerm {
                a: -1.0,
                zeta: 2.0,
                weight: -0.5,
            },
        ];
        let md = MixedGammaModel::from_terms(src, 1, terms).unwrap();
        assert!(md.has_negative_weights());
        assert!(matches!(
            sample_surrogate(&md, 10, 1).err(),
            Some(Error::Unsupported(_))
        ));
        // Analytic evaluation stays available.
        assert!(md.cdf(0.3).unwrap() > 0.0);
    }

    #[test]
    fn samplers_are_deterministic() {
        let p = ChannelParams::new(3.0, 2, 2.0).unwrap();
        let a: Vec<f64> = sample_exact(&p, 1000, 42).unwrap().collect();
        let b: Vec<f64> = sample_exact(&p, 1000, 42).unwrap().collect();
        let c: Vec<f64> = sample_exact(&p, 1000, 43).unwrap().collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 1000);

        let md = model(3.0, 2, 2.0);
        let a: Vec<f64> = sample_surrogate(&md, 1000, 5).unwrap().collect();
        let b: Vec<f64> = sample_surrogate(&md, 1000, 5).unwrap().collect();
        assert_eq!(a, b);
        assert!(sample_exact(&p, 0, 1).is_err());
    }

    #[test]
    fn single_term_surrogate_is_plain_gamma() {
        let md = MixedGammaModel::fit(&ChannelParams::new(3.0, 2, 1.0).unwrap(), 1).unwrap();
        assert_eq!(md.order(), 1);
        let zeta = md.terms()[0].zeta;
        // Rule of order 1 has t = 1, so zeta = k m / gbar.
        assert_relative_eq!(zeta, 6.0, max_relative = 1e-14);
        let n = 200_000;
        let mean = sample_surrogate(&md, n, 9).unwrap().sum::<f64>() / n as f64;
        // Gamma(2, 1/6): mean 1/3, sd sqrt(2)/6.
        assert!((mean - 1.0 / 3.0).abs() < 4.0 * (2f64.sqrt() / 6.0) / (n as f64).sqrt());
    }
}
