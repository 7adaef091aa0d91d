use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::channel::{sample_exact, ChannelParams, MixedGammaModel, DEFAULT_ORDER};
use crate::montecarlo::{mc_sop, McConfig, SamplingLaw};
use crate::secrecy::{
    asop_closed_form, asop_quadrature, equivalence_grid, sop_closed_form, sop_conventional, sop_quadrature,
    SecrecyConfig,
};
use crate::specfun::{gauss_laguerre, integrate_semi_infinite, ln_factorial, upper_inc_gamma, QuadratureSpec};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationLevel {
    Fast,
    Full,
}

impl FromStr for ValidationLevel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fast" => Ok(ValidationLevel::Fast),
            "full" => Ok(ValidationLevel::Full),
            other => Err(format!("unknown level '{other}' (expected fast or full)")),
        }
    }
}

/// Deliberate corruption used to prove the checks can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultInjection {
    /// Scales the first PDF coefficient of each fitted mixture by 1.01.
    CorruptMixtureCoefficient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "check={} status={} elapsed_ms={} detail=\"{}\"",
            self.name,
            if self.passed { "pass" } else { "fail" },
            self.elapsed.as_millis(),
            self.detail.replace('"', "'")
        )
    }
}

type Outcome = Result<(bool, String)>;
type Check = (&'static str, Box<dyn Fn() -> Outcome>);

const MC_SEED: u64 = 20_240_601;
const SHAPES: [u32; 4] = [1, 2, 4, 5];

/// Runs the self-check suite. `fast` covers the deterministic cross-method
/// checks; `full` adds 1e7-sample Monte Carlo agreement, slope fits and
/// surrogate fidelity.
pub fn run_checks(level: ValidationLevel, fault: Option<FaultInjection>) -> Vec<CheckResult> {
    let mut checks: Vec<Check> = vec![
        ("gauss_laguerre_moments", Box::new(gauss_laguerre_moments)),
        ("incomplete_gamma_recurrence", Box::new(incomplete_gamma_recurrence)),
        ("mixture_normalization", Box::new(move || mixture_normalization(fault))),
        ("closed_vs_quadrature", Box::new(closed_vs_quadrature)),
        ("symmetry", Box::new(symmetry)),
        ("asymptote_routes", Box::new(asymptote_routes)),
        ("gap_convergence", Box::new(gap_convergence)),
    ];
    if level == ValidationLevel::Full {
        checks.push(("symmetry_mc", Box::new(symmetry_mc)));
        checks.push(("mc_exact_agreement", Box::new(mc_exact_agreement)));
        checks.push(("mc_surrogate_agreement", Box::new(mc_surrogate_agreement)));
        for m in SHAPES {
            let name = match m {
                1 => "slope_m1",
                2 => "slope_m2",
                4 => "slope_m4",
                _ => "slope_m5",
            };
            checks.push((name, Box::new(move || slope_check(m))));
        }
        checks.push(("slope_plateau", Box::new(slope_plateau)));
        checks.push(("asymptote_ratio", Box::new(asymptote_ratio)));
        checks.push(("surrogate_ks", Box::new(surrogate_ks)));
    }
    checks
        .into_iter()
        .map(|(name, check)| {
            let start = Instant::now();
            let (passed, detail) = check().unwrap_or_else(|e| (false, e.to_string()));
            CheckResult {
                name,
                passed,
                detail,
                elapsed: start.elapsed(),
            }
        })
        .collect()
}

fn baseline(m: u32, gbar_d_db: f64) -> Result<(ChannelParams, ChannelParams, SecrecyConfig)> {
    Ok((
        ChannelParams::from_db(3.0, m, gbar_d_db)?,
        ChannelParams::from_db(3.0, m, 0.0)?,
        SecrecyConfig::new(1.0, 3.0)?,
    ))
}

fn fit(p: &ChannelParams) -> Result<MixedGammaModel> {
    MixedGammaModel::fit(p, DEFAULT_ORDER)
}

fn gauss_laguerre_moments() -> Outcome {
    let mut worst = 0f64;
    for order in [1, 2, 15, 30] {
        let rule = gauss_laguerre(order)?;
        for n in 0..2 * order {
            let moment = rule.integrate(|x| x.powi(n as i32));
            worst = worst.max((moment.ln() - ln_factorial(n)).abs());
        }
    }
    Ok((worst <= 1e-12, format!("max relative moment error {worst:.3e}")))
}

fn incomplete_gamma_recurrence() -> Outcome {
    let mut worst = 0f64;
    for s in [0.5, 1.0, 2.5, 5.0] {
        for x in [0.1, 1.0, 10.0] {
            let lhs = upper_inc_gamma(s + 1.0, x)?;
            let rhs = s * upper_inc_gamma(s, x)? + f64::powf(x, s) * (-x).exp();
            worst = worst.max((lhs - rhs).abs() / lhs);
        }
    }
    Ok((worst <= 1e-11, format!("max relative residual {worst:.3e}")))
}

fn mixture_normalization(fault: Option<FaultInjection>) -> Outcome {
    let quad = QuadratureSpec::relative(1e-12);
    let mut worst_pdf = 0f64;
    for m in SHAPES {
        for gbar in [1.0, 100.0] {
            let params = ChannelParams::new(3.0, m, gbar)?;
            let mut model = fit(&params)?;
            if fault == Some(FaultInjection::CorruptMixtureCoefficient) {
                let mut terms = model.terms().to_vec();
                terms[0].a *= 1.01;
                model = MixedGammaModel::from_terms(params, model.shape(), terms)?;
            }
            model.check_normalization()?;
            let mass = integrate_semi_infinite(|x| model.pdf(x).unwrap_or(f64::NAN), 0.0, &quad)?;
            worst_pdf = worst_pdf.max((mass - 1.0).abs());
        }
    }
    Ok((
        worst_pdf <= 1e-9,
        format!("weights sum to 1 within 1e-10; max |int pdf - 1| {worst_pdf:.3e}"),
    ))
}

fn closed_vs_quadrature() -> Outcome {
    let quad = QuadratureSpec::relative(1e-12);
    let mut worst = 0f64;
    for p in equivalence_grid(50, 7) {
        let (d, e) = (fit(&p.d)?, fit(&p.e)?);
        let closed = sop_closed_form(&d, &e, &p.secrecy)?.value;
        let numeric = sop_quadrature(&d, &e, &p.secrecy, &quad)?.value;
        worst = worst.max((closed - numeric).abs() / closed.max(1e-12));
    }
    Ok((worst <= 1e-8, format!("50 points, max scaled difference {worst:.3e}")))
}

fn symmetry() -> Outcome {
    let params = ChannelParams::from_db(3.0, 2, 10.0)?;
    let model = fit(&params)?;
    let cfg = SecrecyConfig::new(0.0, 0.0)?;
    let closed = sop_closed_form(&model, &model, &cfg)?.value;
    let numeric = sop_quadrature(&model, &model, &cfg, &QuadratureSpec::relative(1e-12))?.value;
    let ok = (closed - 0.5).abs() <= 1e-9 && (numeric - 0.5).abs() <= 1e-8;
    Ok((ok, format!("closed {closed:.12} quadrature {numeric:.12}")))
}

fn symmetry_mc() -> Outcome {
    let params = ChannelParams::from_db(3.0, 2, 10.0)?;
    let cfg = SecrecyConfig::new(0.0, 0.0)?;
    let mc = mc_sop(
        &params,
        &params,
        &cfg,
        &McConfig::new(1_000_000, MC_SEED)?.with_workers(8),
    )?;
    let ok = (mc.value - 0.5).abs() <= 3.0 * mc.stderr;
    Ok((ok, format!("mc {:.6} stderr {:.2e}", mc.value, mc.stderr)))
}

fn asymptote_routes() -> Outcome {
    let quad = QuadratureSpec::relative(1e-12);
    let mut worst = 0f64;
    for m in SHAPES {
        let (d, e, cfg) = baseline(m, 40.0)?;
        let e_model = fit(&e)?;
        let closed = asop_closed_form(&d, &e_model, &cfg)?.value;
        let numeric = asop_quadrature(&d, &e_model, &cfg, &quad)?.value;
        worst = worst.max((closed - numeric).abs() / closed);
    }
    Ok((worst <= 1e-8, format!("max relative difference {worst:.3e}")))
}

fn gap_convergence() -> Outcome {
    let d = fit(&ChannelParams::from_db(3.0, 2, 10.0)?)?;
    let e = fit(&ChannelParams::from_db(3.0, 2, 1.0)?)?;
    let gap = |rate: f64| -> Result<f64> {
        let proposed = sop_closed_form(&d, &e, &SecrecyConfig::new(rate, 3.0)?)?.value;
        Ok((sop_conventional(&d, &e, rate)?.value - proposed).abs())
    };
    let (low, high) = (gap(0.5)?, gap(4.0)?);
    Ok((high < low, format!("gap at R_s=0.5 {low:.6e}, at R_s=4 {high:.6e}")))
}

fn mc_agreement(law: SamplingLaw, points: &[(u32, f64)], strict: bool) -> Outcome {
    let mut worst = 0f64;
    let mut detail = Vec::new();
    for &(m, db) in points {
        let (d, e, cfg) = baseline(m, db)?;
        let closed = sop_closed_form(&fit(&d)?, &fit(&e)?, &cfg)?.value;
        let mc = mc_sop(
            &d,
            &e,
            &cfg,
            &McConfig::new(10_000_000, MC_SEED)?.with_workers(8).with_law(law),
        )?;
        let tol = if strict {
            3.0 * mc.stderr
        } else {
            (3.0 * mc.stderr).max(0.02 * closed)
        };
        let ratio = (closed - mc.value).abs() / tol;
        worst = worst.max(ratio);
        detail.push(format!("m={m}@{db}dB {ratio:.2}"));
    }
    Ok((worst <= 1.0, format!("|closed - mc| / tol: {}", detail.join(" "))))
}

fn mc_exact_agreement() -> Outcome {
    let points: Vec<(u32, f64)> = SHAPES
        .iter()
        .flat_map(|&m| [0.0, 10.0, 20.0, 30.0].map(|db| (m, db)))
        .collect();
    mc_agreement(SamplingLaw::ExactGk, &points, false)
}

fn mc_surrogate_agreement() -> Outcome {
    mc_agreement(SamplingLaw::SurrogateMixture, &[(1, 10.0), (2, 20.0), (4, 10.0)], true)
}

/// Least-squares slope of log10 SOP against log10 gbar_d over 50..60 dB.
pub(crate) fn high_snr_slope(m: u32) -> Result<f64> {
    let dbs = [50.0, 52.5, 55.0, 57.5, 60.0];
    let mut pts = Vec::with_capacity(dbs.len());
    for db in dbs {
        let (d, e, cfg) = baseline(m, db)?;
        pts.push((db / 10.0, sop_closed_form(&fit(&d)?, &fit(&e)?, &cfg)?.value.log10()));
    }
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

fn slope_check(m: u32) -> Outcome {
    let slope = high_snr_slope(m)?;
    let expected = -(m as f64).min(3.0);
    let ok = (slope - expected).abs() <= 0.02 * expected.abs();
    Ok((ok, format!("k=3 m={m} slope {slope:.5} expected {expected}")))
}

fn slope_plateau() -> Outcome {
    let (s4, s5) = (high_snr_slope(4)?, high_snr_slope(5)?);
    Ok((
        (s4 - s5).abs() <= 0.01 * s5.abs(),
        format!("m=4 slope {s4:.5}, m=5 slope {s5:.5}"),
    ))
}

fn asymptote_ratio() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for m in SHAPES {
        let (d, e, cfg) = baseline(m, 60.0)?;
        let e_model = fit(&e)?;
        let ratio = asop_closed_form(&d, &e_model, &cfg)?.value / sop_closed_form(&fit(&d)?, &e_model, &cfg)?.value;
        ok &= (0.95..=1.05).contains(&ratio);
        detail.push(format!("m={m} {ratio:.5}"));
    }
    Ok((ok, format!("asymptote / closed at 60 dB: {}", detail.join(" "))))
}

/// Kolmogorov-Smirnov distance between a model CDF and an empirical sample.
pub(crate) fn ks_distance(model: &MixedGammaModel, mut sample: Vec<f64>) -> Result<f64> {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let mut worst = 0f64;
    for (i, &x) in sample.iter().enumerate() {
        let f = model.cdf(x)?;
        worst = worst.max((f - i as f64 / n).abs()).max((i as f64 + 1.0) / n - f);
    }
    Ok(worst)
}

fn surrogate_ks() -> Outcome {
    let mut worst = 0f64;
    for m in SHAPES {
        let params = ChannelParams::new(3.0, m, 1.0)?;
        let sample: Vec<f64> = sample_exact(&params, 1_000_000, MC_SEED + m as u64)?.collect();
        worst = worst.max(ks_distance(&fit(&params)?, sample)?);
    }
    Ok((worst <= 0.01, format!("max KS distance {worst:.5}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_suite_passes() {
        let results = run_checks(ValidationLevel::Fast, None);
        assert_eq!(results.len(), 7);
        for r in &results {
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn corrupted_mixture_fails_normalization() {
        let results = run_checks(ValidationLevel::Fast, Some(FaultInjection::CorruptMixtureCoefficient));
        let norm = results.iter().find(|r| r.name == "mixture_normalization").unwrap();
        assert!(!norm.passed);
        assert!(norm.to_string().starts_with("check=mixture_normalization status=fail"));
    }

    #[test]
    fn ks_distance_of_a_perfect_grid_is_small() {
        let model = MixedGammaModel::fit(&ChannelParams::new(3.0, 2, 1.0).unwrap(), 15).unwrap();
        // Quantiles by bisection give an empirical CDF that tracks the model to 1/n.
        let n = 200;
        let sample: Vec<f64> = (0..n)
            .map(|i| {
                let target = (i as f64 + 0.5) / n as f64;
                let (mut lo, mut hi) = (0.0, 100.0);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if model.cdf(mid).unwrap() < target {
                        lo = mid
                    } else {
                        hi = mid
                    }
                }
                lo
            })
            .collect();
        let ks = ks_distance(&model, sample).unwrap();
        assert!(ks <= 0.5 / n as f64 + 1e-9, "{ks}");
    }
}
