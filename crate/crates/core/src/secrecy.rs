//! Secrecy outage probability over mixed-Gamma links.
//!
//! The outage event is leakage given reliable delivery:
//!
//! ```text
//! SOP = Pr{ mu < g_d < lambda - 1 + lambda g_e } / Pr{ g_d > mu },   lambda = 2^Rs
//! ```
//!
//! With `c = max(0, (mu + 1) / lambda - 1)` the numerator is
//! `int_c^inf [F_d(lambda - 1 + lambda x) - F_d(mu)] f_e(x) dx`. Two evaluation
//! routes are provided: a closed form built from binomial expansions and upper
//! incomplete gamma functions, and direct adaptive quadrature of the integral.
//! `mu = 0` gives the conventional definition `Pr{ g_d < lambda - 1 + lambda g_e }`.
//!
//! For the high-SNR regime the destination CDF is replaced by its leading
//! term `Gamma(|k - m|) / (Gamma(k) Gamma(m) v) (k m x / gbar)^v` with
//! `v = min(k, m)`, giving an asymptote `C gbar_d^-v`.

use std::cell::RefCell;
use std::fmt;

use rand::Rng;

use crate::channel::{ChannelParams, MixedGammaModel};
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::specfun::{
    integrate_semi_infinite, ln_binomial, ln_factorial, ln_gamma_unchecked, ln_upper_inc_gamma, log_add_exp,
    CompensatedSum, QuadratureSpec,
};

const PROBABILITY_SLACK: f64 = 1e-9;
const MIN_CONDITIONING_MASS: f64 = 1e-300;
/// Terms per mixture pair before the tail series gives up.
const MAX_SERIES_TERMS: usize = 2000;

/// Confidential rate and reliability threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecrecyConfig {
    rate_rs: f64,
    mu: f64,
    lambda: f64,
}

impl SecrecyConfig {
    /// `rate_rs` in bits per channel use, `mu` as a linear SNR.
    pub fn new(rate_rs: f64, mu: f64) -> Result<Self> {
        if !(rate_rs >= 0.0) || !rate_rs.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "rate R_s must be finite and >= 0, got {rate_rs}"
            )));
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "threshold mu must be finite and >= 0, got {mu}"
            )));
        }
        Ok(Self {
            rate_rs,
            mu,
            lambda: 2f64.powf(rate_rs),
        })
    }

    /// Conventional definition: no reliability conditioning.
    pub fn conventional(rate_rs: f64) -> Result<Self> {
        Self::new(rate_rs, 0.0)
    }

    pub fn rate_rs(&self) -> f64 {
        self.rate_rs
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Lower limit of the eavesdropper integral, `max(0, (mu + 1) / lambda - 1)`.
    pub fn eavesdropper_threshold(&self) -> f64 {
        ((self.mu + 1.0) / self.lambda - 1.0).max(0.0)
    }

    /// Destination SNR below which leakage occurs for a given eavesdropper SNR.
    pub fn leakage_threshold(&self, gamma_e: f64) -> f64 {
        self.lambda - 1.0 + self.lambda * gamma_e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    ClosedForm,
    Quadrature,
    MonteCarlo,
    Asymptotic,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ClosedForm => "closed_form",
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte_carlo",
            Method::Asymptotic => "asymptotic",
        })
    }
}

/// A probability together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SopEstimate {
    pub value: f64,
    pub method: Method,
    /// Standard error, present exactly for Monte Carlo estimates.
    pub stderr: Option<f64>,
}

impl SopEstimate {
    fn analytic(value: f64, method: Method) -> Self {
        Self {
            value,
            method,
            stderr: None,
        }
    }

    pub fn monte_carlo(value: f64, stderr: f64) -> Self {
        Self {
            value,
            method: Method::MonteCarlo,
            stderr: Some(stderr),
        }
    }
}

/// High-SNR law `SOP ~ C gbar_d^-v = (G_a gbar_d)^-v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoteReport {
    pub diversity_order: f64,
    pub coefficient: f64,
    pub array_gain: f64,
}

/// Closed-form SOP of the two mixtures.
///
/// Evaluates, for every component pair `(j_d, j_e)`, the terms
///
/// ```text
/// T_n = A_d a_e zeta_d^n e^(-zeta_d (lambda-1)) / n!
///       * sum_{f<=n} C(n,f) lambda^f (lambda-1)^(n-f) Gamma(m_e + f, beta c) / beta^(m_e + f)
/// beta = zeta_e + lambda zeta_d
/// ```
///
/// The `n < m_d` terms make up the CCDF part of the destination law and the
/// `n >= m_d` terms its CDF part; together they sum to
/// `A_d a_e Gamma(m_e, zeta_e c) / zeta_e^m_e`. Each pair contributes its CDF
/// part, taken either as that total minus the finite `n < m_d` sum or, when
/// the destination component is far from saturation, as the convergent tail
/// sum. The result never subtracts nearly equal quantities, so tiny outage
/// probabilities keep full relative precision.
pub fn sop_closed_form(
    d_model: &MixedGammaModel,
    e_model: &MixedGammaModel,
    cfg: &SecrecyConfig,
) -> Result<SopEstimate> {
    let c = cfg.eavesdropper_threshold();
    let leak = leakage_integral(d_model, e_model, cfg.lambda(), c)?;
    let numerator = leak - d_model.cdf(cfg.mu())? * e_model.ccdf(c)?;
    let value = conditional(numerator, d_model, cfg)?;
    Ok(SopEstimate::analytic(value, Method::ClosedForm))
}

/// SOP by adaptive quadrature of the integral representation.
///
/// The correction `F_d(mu) CCDF_e(c)` is folded into the integrand as
/// `[F_d(lambda - 1 + lambda x) - F_d(mu)] f_e(x)`, which is nonnegative on
/// `[c, inf)`.
pub fn sop_quadrature(
    d_model: &MixedGammaModel,
    e_model: &MixedGammaModel,
    cfg: &SecrecyConfig,
    spec: &QuadratureSpec,
) -> Result<SopEstimate> {
    let c = cfg.eavesdropper_threshold();
    let f_mu = d_model.cdf(cfg.mu())?;
    let numerator = integrate_fallible(
        |x| Ok((d_model.cdf(cfg.leakage_threshold(x))? - f_mu) * e_model.pdf(x)?),
        c,
        spec,
    )?;
    let value = conditional(numerator, d_model, cfg)?;
    Ok(SopEstimate::analytic(value, Method::Quadrature))
}

/// Conventional SOP, `Pr{ C_d - C_e < R_s }`.
pub fn sop_conventional(d_model: &MixedGammaModel, e_model: &MixedGammaModel, rate_rs: f64) -> Result<SopEstimate> {
    sop_closed_form(d_model, e_model, &SecrecyConfig::conventional(rate_rs)?)
}

/// High-SNR asymptote in closed form; requires `k_d != m_d` and integer `v`.
pub fn asop_closed_form(
    d_params: &ChannelParams,
    e_model: &MixedGammaModel,
    cfg: &SecrecyConfig,
) -> Result<SopEstimate> {
    let law = AsymptoticLaw::new(d_params)?;
    if law.v.fract() != 0.0 {
        return Err(Error::Unsupported(format!(
            "diversity order v = {} is not an integer; the binomial expansion needs integer v, use asop_quadrature",
            law.v
        )));
    }
    let v = law.v as usize;
    let c = cfg.eavesdropper_threshold();
    let lambda = cfg.lambda();
    let me = e_model.shape() as f64;

    let mut moments = CompensatedSum::default();
    for f in 0..=v {
        let mut inner = CompensatedSum::default();
        for t in e_model.terms() {
            let s = me + f as f64;
            let ln_g = ln_upper_inc_gamma(s, t.zeta * c)? - s * t.zeta.ln();
            inner.add(t.a * ln_g.exp());
        }
        let binom = ln_binomial(v, f).exp();
        moments.add(binom * (lambda - 1.0).powi((v - f) as i32) * lambda.powi(f as i32) * inner.total());
    }
    let bracket = moments.total() - cfg.mu().powi(v as i32) * e_model.ccdf(c)?;
    let value = law.scale * bracket * d_params.gamma_bar().powf(-law.v);
    check_finite(value, "asymptotic SOP")?;
    Ok(SopEstimate::analytic(value, Method::Asymptotic))
}

/// High-SNR asymptote by quadrature; any real `v > 0` with `k_d != m_d`.
pub fn asop_quadrature(
    d_params: &ChannelParams,
    e_model: &MixedGammaModel,
    cfg: &SecrecyConfig,
    spec: &QuadratureSpec,
) -> Result<SopEstimate> {
    let law = AsymptoticLaw::new(d_params)?;
    let c = cfg.eavesdropper_threshold();
    let mu_term = cfg.mu().powf(law.v);
    // Integrate with gbar_d factored out so the power law in gbar_d is exact.
    let integral = integrate_fallible(
        |x| Ok((cfg.leakage_threshold(x).powf(law.v) - mu_term) * e_model.pdf(x)?),
        c,
        spec,
    )?;
    let value = law.scale * integral * d_params.gamma_bar().powf(-law.v);
    check_finite(value, "asymptotic SOP")?;
    Ok(SopEstimate::analytic(value, Method::Asymptotic))
}

/// Leading term of the destination CDF at high average SNR.
pub fn asymptotic_cdf(d_params: &ChannelParams, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("SNR argument must be >= 0, got {x}")));
    }
    let law = AsymptoticLaw::new(d_params)?;
    Ok(law.scale * x.powf(law.v) * d_params.gamma_bar().powf(-law.v))
}

/// Diversity order, `gbar_d`-free coefficient and array gain of the asymptote.
///
/// The coefficient is read off at two reference SNRs, which must agree to
/// 1e-10; non-integer orders go through the quadrature route.
pub fn asymptote_report(
    d_params: &ChannelParams,
    e_model: &MixedGammaModel,
    cfg: &SecrecyConfig,
) -> Result<AsymptoteReport> {
    let v = AsymptoticLaw::new(d_params)?.v;
    let spec = QuadratureSpec::relative(1e-12);
    let coefficient_at = |gbar: f64| -> Result<f64> {
        let params = d_params.with_gamma_bar(gbar)?;
        let asop = if v.fract() == 0.0 {
            asop_closed_form(&params, e_model, cfg)?
        } else {
            asop_quadrature(&params, e_model, cfg, &spec)?
        };
        Ok(asop.value * gbar.powf(v))
    };
    let c1 = coefficient_at(1e5)?;
    let c2 = coefficient_at(1e6)?;
    if (c1 - c2).abs() > 1e-10 * c1.abs() {
        return Err(Error::InternalConsistency(format!(
            "asymptote coefficient differs between reference SNRs: {c1:e} vs {c2:e}"
        )));
    }
    if !(c1 > 0.0) {
        return Err(Error::Evaluation(format!(
            "asymptote coefficient {c1:e} is not positive"
        )));
    }
    Ok(AsymptoteReport {
        diversity_order: v,
        coefficient: c1,
        array_gain: c1.powf(-1.0 / v),
    })
}

/// One parameter tuple of the cross-method equivalence grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub d: ChannelParams,
    pub e: ChannelParams,
    pub secrecy: SecrecyConfig,
}

/// Seeded pseudo-random parameter tuples used to cross-check the closed form
/// against quadrature. Both links share `k` in {2, 3, 5} and `m` in {1, 2, 4};
/// `gbar_d` is log-uniform on [1, 1e4], `gbar_e` uniform on [0.5, 4], `R_s` on
/// [0.5, 3] and `mu` on [0, 6].
pub fn equivalence_grid(points: usize, seed: u64) -> Vec<GridPoint> {
    const KS: [f64; 3] = [2.0, 3.0, 5.0];
    const MS: [u32; 3] = [1, 2, 4];
    let mut rng = stream_rng(seed, 0);
    (0..points)
        .map(|_| {
            let k = KS[rng.random_range(0..KS.len())];
            let m = MS[rng.random_range(0..MS.len())];
            let gbar_d = 10f64.powf(rng.random_range(0.0..=4.0));
            let gbar_e = rng.random_range(0.5..=4.0);
            let rate = rng.random_range(0.5..=3.0);
            let mu = rng.random_range(0.0..=6.0);
            GridPoint {
                d: ChannelParams::new(k, m, gbar_d).expect("grid ranges are valid"),
                e: ChannelParams::new(k, m, gbar_e).expect("grid ranges are valid"),
                secrecy: SecrecyConfig::new(rate, mu).expect("grid ranges are valid"),
            }
        })
        .collect()
}

/// `F_d^inf(x) = scale * x^v * gbar^-v`.
struct AsymptoticLaw {
    v: f64,
    scale: f64,
}

impl AsymptoticLaw {
    fn new(d_params: &ChannelParams) -> Result<Self> {
        let k = d_params.k();
        let m = d_params.m() as f64;
        if k == m {
            return Err(Error::Unsupported(format!(
                "asymptotic SOP requires k_d != m_d (got k_d = m_d = {k}); the equal-shape asymptote \
                 has a logarithmic term and is not provided, use the exact SOP instead"
            )));
        }
        let v = k.min(m);
        let ln_scale = ln_gamma_unchecked((k - m).abs()) + v * (k * m).ln()
            - ln_gamma_unchecked(k)
            - ln_gamma_unchecked(m)
            - v.ln();
        Ok(Self {
            v,
            scale: ln_scale.exp(),
        })
    }
}

fn check_finite(value: f64, what: &str) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::Evaluation(format!("{what} evaluated to {value}")));
    }
    Ok(())
}

/// Divides the leakage numerator by `Pr{ g_d > mu }` and checks the result is a probability.
fn conditional(numerator: f64, d_model: &MixedGammaModel, cfg: &SecrecyConfig) -> Result<f64> {
    let reliable = d_model.ccdf(cfg.mu())?;
    if reliable < MIN_CONDITIONING_MASS {
        return Err(Error::EmptyConditioning(format!(
            "Pr{{g_d > mu}} = {reliable:e} for mu = {}",
            cfg.mu()
        )));
    }
    let value = numerator / reliable;
    check_finite(value, "SOP")?;
    if !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&value) {
        return Err(Error::Evaluation(format!("SOP {value} lies outside [0, 1]")));
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Quadrature over a fallible integrand; the first integrand error wins.
fn integrate_fallible<F>(f: F, lower: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let failure = RefCell::new(None);
    let result = integrate_semi_infinite(
        |x| match f(x) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        lower,
        spec,
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => result,
    }
}

/// `int_c^inf F_d(lambda - 1 + lambda x) f_e(x) dx` from the closed-form terms.
fn leakage_integral(d: &MixedGammaModel, e: &MixedGammaModel, lambda: f64, c: f64) -> Result<f64> {
    let md = d.shape() as usize;
    let me = e.shape() as f64;
    let ln_lambda = lambda.ln();
    let ln_lambda_m1 = if lambda > 1.0 { Some((lambda - 1.0).ln()) } else { None };
    let mut total = CompensatedSum::default();

    for (jd, td) in d.terms().iter().enumerate() {
        for (je, te) in e.terms().iter().enumerate() {
            let sign = (td.weight * te.a).signum();
            if sign == 0.0 {
                continue;
            }
            let beta = te.zeta + lambda * td.zeta;
            let mut pair = PairTerms {
                jd,
                je,
                ln_prefactor: td.weight.abs().ln() + te.a.abs().ln() - td.zeta * (lambda - 1.0),
                ln_zeta_d: td.zeta.ln(),
                ln_lambda,
                ln_lambda_m1,
                ln_beta: beta.ln(),
                ln_c: if c > 0.0 { c.ln() } else { f64::NEG_INFINITY },
                beta_c: beta * c,
                me,
                ln_g: vec![ln_upper_inc_gamma(me, beta * c)? - me * beta.ln()],
            };
            let ln_pair_total =
                td.weight.abs().ln() + te.a.abs().ln() + ln_upper_inc_gamma(me, te.zeta * c)? - me * te.zeta.ln();
            let pair_total = ln_pair_total.exp();

            let ratio = lambda * td.zeta / beta;
            let floor_argument = td.zeta * (lambda - 1.0 + lambda * c);
            let tail = if ratio <= 0.5 && floor_argument <= md as f64 + 20.0 {
                pair.tail_from(md)?
            } else {
                None
            };
            let cdf_part = match tail {
                Some(t) => t,
                None => {
                    let mut head = CompensatedSum::default();
                    for n in 0..md {
                        head.add(pair.term(n)?);
                    }
                    (pair_total - head.total()).max(0.0)
                }
            };
            total.add(sign * cdf_part);
        }
    }
    Ok(total.total())
}

/// Log-domain evaluator of the `T_n` terms for one component pair.
struct PairTerms {
    jd: usize,
    je: usize,
    ln_prefactor: f64,
    ln_zeta_d: f64,
    ln_lambda: f64,
    ln_lambda_m1: Option<f64>,
    ln_beta: f64,
    ln_c: f64,
    beta_c: f64,
    me: f64,
    /// `ln[Gamma(m_e + f, beta c) / beta^(m_e + f)]` for `f = 0, 1, ...`.
    ln_g: Vec<f64>,
}

impl PairTerms {
    /// Extends `ln_g` by `Gamma(s + 1, z) = s Gamma(s, z) + z^s e^-z`.
    fn ensure(&mut self, f: usize) {
        while self.ln_g.len() <= f {
            let i = self.ln_g.len() - 1;
            let s = self.me + i as f64;
            let boundary = if self.ln_c.is_finite() {
                s * self.ln_c - self.beta_c
            } else {
                f64::NEG_INFINITY
            };
            let next = log_add_exp(s.ln() + self.ln_g[i], boundary) - self.ln_beta;
            self.ln_g.push(next);
        }
    }

    /// Magnitude of `T_n`.
    fn term(&mut self, n: usize) -> Result<f64> {
        self.ensure(n);
        let mut ln_inner = f64::NEG_INFINITY;
        match self.ln_lambda_m1 {
            None => ln_inner = n as f64 * self.ln_lambda + self.ln_g[n],
            Some(ln_lm1) => {
                for f in 0..=n {
                    let ln_t = ln_binomial(n, f) + f as f64 * self.ln_lambda + (n - f) as f64 * ln_lm1 + self.ln_g[f];
                    if ln_t.is_nan() {
                        return Err(self.blow_up(n, f));
                    }
                    ln_inner = log_add_exp(ln_inner, ln_t);
                }
            }
        }
        let ln_term = self.ln_prefactor + n as f64 * self.ln_zeta_d - ln_factorial(n) + ln_inner;
        let value = ln_term.exp();
        if !value.is_finite() {
            return Err(self.blow_up(n, n));
        }
        Ok(value)
    }

    /// `sum_{n >= start} T_n`, or `None` if it fails to settle within the term budget.
    fn tail_from(&mut self, start: usize) -> Result<Option<f64>> {
        let mut acc = CompensatedSum::default();
        let mut previous = f64::INFINITY;
        for n in start..start + MAX_SERIES_TERMS {
            let t = self.term(n)?;
            acc.add(t);
            if t <= 1e-17 * acc.total() && t <= previous {
                return Ok(Some(acc.total()));
            }
            if acc.total() == 0.0 && t == 0.0 && n > start + 50 {
                return Ok(Some(0.0));
            }
            previous = t;
        }
        Ok(None)
    }

    fn blow_up(&self, n: usize, f: usize) -> Error {
        Error::Evaluation(format!(
            "non-finite closed-form term at (j_d={}, n_d={n}, j_e={}, f={f})",
            self.jd + 1,
            self.je + 1
        ))
    }
}
