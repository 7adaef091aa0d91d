use std::io::Write;

use rayon::prelude::*;

use super::spec::{MethodColumn, PointSpec, SweepSpec};
use super::CliError;
use crate::channel::MixedGammaModel;
use crate::montecarlo::{mc_sop, McConfig};
use crate::secrecy::{asop_closed_form, asop_quadrature, sop_closed_form, sop_conventional, sop_quadrature};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Closed,
    Quadrature,
    Asymptotic,
    Mc,
    McStderr,
    Conventional,
    /// `|conventional - closed|`.
    Gap,
}

impl Column {
    pub fn name(&self) -> &'static str {
        match self {
            Column::Closed => "closed",
            Column::Quadrature => "quadrature",
            Column::Asymptotic => "asymptotic",
            Column::Mc => "mc",
            Column::McStderr => "mc_stderr",
            Column::Conventional => "conventional",
            Column::Gap => "gap",
        }
    }
}

/// Output columns for a method set, in fixed order.
pub fn columns_for(methods: &[MethodColumn]) -> Vec<Column> {
    let has = |m| methods.contains(&m);
    let mut cols = Vec::new();
    if has(MethodColumn::Closed) {
        cols.push(Column::Closed);
    }
    if has(MethodColumn::Quadrature) {
        cols.push(Column::Quadrature);
    }
    if has(MethodColumn::Asymptotic) {
        cols.push(Column::Asymptotic);
    }
    if has(MethodColumn::Mc) {
        cols.extend([Column::Mc, Column::McStderr]);
    }
    if has(MethodColumn::Conventional) {
        cols.push(Column::Conventional);
    }
    if has(MethodColumn::Closed) && has(MethodColumn::Conventional) {
        cols.push(Column::Gap);
    }
    cols
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub method: MethodColumn,
    pub swept_value: f64,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub swept_value: f64,
    /// Aligned with the column list; `None` marks a failed evaluation.
    pub values: Vec<Option<f64>>,
    pub failures: Vec<PointFailure>,
}

impl SweepRow {
    pub fn get(&self, columns: &[Column], column: Column) -> Option<f64> {
        columns.iter().position(|&c| c == column).and_then(|i| self.values[i])
    }
}

/// Evaluates every requested method at one point. Failures are recorded per
/// method rather than aborting the row.
pub fn evaluate_point(spec: &SweepSpec, point: &PointSpec, mc: &McConfig) -> SweepRow {
    let columns = columns_for(&spec.methods);
    let mut failures = Vec::new();
    let mut fail = |method, error| {
        failures.push(PointFailure {
            method,
            swept_value: point.swept_value,
            error,
        })
    };

    let models =
        MixedGammaModel::fit(&point.d, spec.order).and_then(|d| Ok((d, MixedGammaModel::fit(&point.e, spec.order)?)));
    let models = match models {
        Ok(m) => Some(m),
        Err(e) => {
            for &m in &spec.methods {
                fail(m, e.clone());
            }
            None
        }
    };

    let mut value = |method: MethodColumn| -> Option<(f64, Option<f64>)> {
        let (d, e) = models.as_ref()?;
        let quad = spec.quadrature();
        let result: Result<(f64, Option<f64>)> = match method {
            MethodColumn::Closed => sop_closed_form(d, e, &point.secrecy).map(|s| (s.value, None)),
            MethodColumn::Quadrature => sop_quadrature(d, e, &point.secrecy, &quad).map(|s| (s.value, None)),
            MethodColumn::Asymptotic => if point.d.diversity_order().fract() == 0.0 {
                asop_closed_form(&point.d, e, &point.secrecy)
            } else {
                asop_quadrature(&point.d, e, &point.secrecy, &quad)
            }
            .map(|s| (s.value, None)),
            MethodColumn::Mc => mc_sop(&point.d, &point.e, &point.secrecy, mc).map(|s| (s.value, Some(s.stderr))),
            MethodColumn::Conventional => sop_conventional(d, e, point.secrecy.rate_rs()).map(|s| (s.value, None)),
        };
        result.map_err(|err| fail(method, err)).ok()
    };

    let mut computed = std::collections::HashMap::new();
    for &m in &spec.methods {
        if let Some(v) = value(m) {
            computed.insert(m, v);
        }
    }
    let get = |m: MethodColumn| computed.get(&m).copied();
    let values = columns
        .iter()
        .map(|col| match col {
            Column::Closed => get(MethodColumn::Closed).map(|v| v.0),
            Column::Quadrature => get(MethodColumn::Quadrature).map(|v| v.0),
            Column::Asymptotic => get(MethodColumn::Asymptotic).map(|v| v.0),
            Column::Mc => get(MethodColumn::Mc).map(|v| v.0),
            Column::McStderr => get(MethodColumn::Mc).and_then(|v| v.1),
            Column::Conventional => get(MethodColumn::Conventional).map(|v| v.0),
            Column::Gap => Some((get(MethodColumn::Conventional)?.0 - get(MethodColumn::Closed)?.0).abs()),
        })
        .collect();
    SweepRow {
        swept_value: point.swept_value,
        values,
        failures,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub columns: Vec<Column>,
    pub rows: Vec<SweepRow>,
}

impl SweepOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &PointFailure> {
        self.rows.iter().flat_map(|r| r.failures.iter())
    }

    /// Error for the first failed cell, if any.
    pub fn first_error(&self, spec: &SweepSpec) -> Option<CliError> {
        let failure = self.failures().next()?;
        let context = format!(
            "{} at {}={}: {}",
            failure.method,
            spec.swept_name(),
            failure.swept_value,
            spec.describe()
        );
        Some(CliError::from_core(&failure.error, &context))
    }
}

/// Validates the spec and evaluates the whole grid on a pool of `threads`
/// threads. Rows come back in grid order whatever the scheduling.
pub fn run_sweep(spec: &SweepSpec, threads: usize) -> std::result::Result<SweepOutcome, CliError> {
    spec.validate(spec.sweep.is_some())?;
    let uses = |m| spec.methods.contains(&m);
    if uses(MethodColumn::Asymptotic) && spec.d_k == spec.d_m as f64 {
        return Err(CliError::Config(format!(
            "the asymptote needs k_d != m_d (got k_d = m_d = {}) [{}]",
            spec.d_m,
            spec.describe()
        )));
    }
    let mc = spec.mc_config()?;
    let points = spec
        .grid()
        .into_iter()
        .map(|v| spec.point(v))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    let rows = pool.install(|| points.par_iter().map(|p| evaluate_point(spec, p, &mc)).collect());
    Ok(SweepOutcome {
        columns: columns_for(&spec.methods),
        rows,
    })
}

/// `{:.16e}` carries 17 significant digits, enough to round-trip any f64.
fn format_cell(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

/// UTF-8 CSV with a header row and LF line endings.
pub fn write_csv<W: Write>(mut out: W, swept_name: &str, outcome: &SweepOutcome) -> std::io::Result<()> {
    let mut header: Vec<&str> = vec![swept_name];
    header.extend(outcome.columns.iter().map(|c| c.name()));
    writeln!(out, "{}", header.join(","))?;
    for row in &outcome.rows {
        let mut cells = vec![format_cell(Some(row.swept_value))];
        cells.extend(row.values.iter().map(|&v| format_cell(v)));
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()
}
