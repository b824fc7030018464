//! Grids and column builders for the reproducible tables.
//!
//! Every table has deterministic columns (tilts, saddlepoint values, closed
//! forms) and, unless Monte Carlo is switched off, estimator columns with
//! their 95% half-widths.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cramer::{theta_of_x, theta_tilde};
use crate::error::{Error, Result};
use crate::laplace::{
    cumulants, laplace_asymptotic, laplace_power_estimate, log_laplace_k, AsymptoticVariant, PowerStrategy,
    QuadratureConfig,
};
use crate::model::LognormalModel;
use crate::montecarlo::{cdf_is_estimate, pdf_is_estimate, LaplaceMode, McConfig, PdfVariant};
use crate::saddlepoint::{evaluate_at, saddlepoint, CdfCorrection, SaddlepointOptions};
use crate::tilted::tilted_mean_exact;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TableKind {
    /// Start value, saddlepoint and tilted mean.
    Theta,
    /// Saddlepoint distribution function, both orders.
    Saddle,
    /// `n`-th power of the Laplace transform.
    LaplacePower,
    Cdf,
    Pdf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableSpec {
    pub name: &'static str,
    pub kind: TableKind,
    pub sigma: f64,
    pub n: u32,
    pub x: Vec<f64>,
}

pub const TABLE_NAMES: [&str; 14] = [
    "t1",
    "sp-n4",
    "sp-n64",
    "laplace-n256",
    "cdf-n4",
    "cdf-n64",
    "cdf-n256",
    "cdf-s0125",
    "cdf-s0072",
    "pdf-n4",
    "pdf-n64",
    "pdf-n256",
    "pdf-s0125",
    "pdf-s0072",
];

fn over_n(n: u32, nx: &[f64]) -> Vec<f64> {
    nx.iter().map(|v| v / f64::from(n)).collect()
}

/// `(n, σ, x)` of the sum grids, shared by the CDF and PDF tables.
fn sum_grid(tag: &str) -> Option<(u32, f64, Vec<f64>)> {
    Some(match tag {
        "n4" => (4, 0.25, over_n(4, &[2.6, 2.8, 3.0, 3.2, 3.4, 3.6])),
        "n64" => (64, 0.25, over_n(64, &[59.0, 59.75, 60.5, 61.25, 62.0, 62.75])),
        "n256" => (256, 0.25, over_n(256, &[249.0, 251.0, 252.0, 253.0, 254.0, 256.0])),
        "s0125" => (64, 0.125, over_n(64, &[60.8, 61.2, 61.6, 62.0, 62.4, 62.8])),
        "s0072" => (64, 0.072, over_n(64, &[62.1, 62.3, 62.5, 62.7, 62.9, 63.1])),
        _ => return None,
    })
}

pub fn lookup(name: &str) -> Result<TableSpec> {
    let name = *TABLE_NAMES
        .iter()
        .find(|n| **n == name)
        .ok_or_else(|| Error::Config(format!("unknown table '{name}'; expected one of {}", TABLE_NAMES.join(", "))))?;
    let spec = |kind, sigma, n, x| TableSpec { name, kind, sigma, n, x };
    Ok(match name {
        "t1" => spec(TableKind::Theta, 0.25, 1, vec![1.0, 0.9, 0.8, 0.7, 0.5, 0.3, 0.1]),
        "sp-n4" => spec(TableKind::Saddle, 0.25, 4, vec![0.65, 0.70, 0.75, 0.80, 0.85, 0.90]),
        "sp-n64" => spec(TableKind::Saddle, 0.25, 64, vec![0.90, 0.91, 0.92, 0.93, 0.95, 0.97, 0.99]),
        "laplace-n256" => spec(TableKind::LaplacePower, 0.25, 256, over_n(256, &[249.0, 250.0, 251.0, 252.0, 253.0, 254.0, 255.0, 256.0])),
        _ => {
            let (kind, tag) = match name.split_once('-') {
                Some(("cdf", t)) => (TableKind::Cdf, t),
                Some(("pdf", t)) => (TableKind::Pdf, t),
                _ => unreachable!("name comes from TABLE_NAMES"),
            };
            let (n, sigma, x) = sum_grid(tag).expect("tag comes from TABLE_NAMES");
            spec(kind, sigma, n, x)
        }
    })
}

/// A rectangular table of numbers; `NaN` marks a cell that was not computed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub sigma: f64,
    pub n: u32,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Replications and seed of the stochastic columns, if any.
    pub replications: Option<usize>,
    pub seed: Option<u64>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Builds `spec`; `mc = None` leaves out the stochastic columns.
pub fn build(spec: &TableSpec, cfg: &QuadratureConfig, mc: Option<&McConfig>) -> Result<Table> {
    let model = LognormalModel::new(spec.sigma)?;
    let (columns, rows) = match spec.kind {
        TableKind::Theta => theta_rows(&model, spec, cfg)?,
        TableKind::Saddle => saddle_rows(&model, spec, cfg)?,
        TableKind::LaplacePower => laplace_rows(&model, spec, cfg, mc)?,
        TableKind::Cdf | TableKind::Pdf => sum_rows(&model, spec, cfg, mc)?,
    };
    let stochastic = mc.filter(|_| !matches!(spec.kind, TableKind::Theta | TableKind::Saddle));
    Ok(Table {
        name: spec.name.to_string(),
        sigma: spec.sigma,
        n: spec.n,
        columns: columns.into_iter().map(String::from).collect(),
        rows,
        replications: stochastic.map(|m| m.replications),
        seed: stochastic.map(|m| m.seed),
    })
}

type Rows = (Vec<&'static str>, Vec<Vec<f64>>);

fn theta_rows(model: &LognormalModel, spec: &TableSpec, cfg: &QuadratureConfig) -> Result<Rows> {
    let rows = spec
        .x
        .iter()
        .map(|&x| {
            let s = theta_of_x(model, x, cfg)?;
            Ok(vec![x, tilted_mean_exact(model, s.theta_tilde, cfg)?, s.theta_tilde, s.theta, s.iterations as f64])
        })
        .collect::<Result<_>>()?;
    Ok((vec!["x", "mean_theta_tilde", "theta_tilde", "theta", "iterations"], rows))
}

fn saddle_rows(model: &LognormalModel, spec: &TableSpec, cfg: &QuadratureConfig) -> Result<Rows> {
    let tab = SaddlepointOptions {
        cdf: CdfCorrection::Tabulated,
        ..Default::default()
    };
    let rows = spec
        .x
        .iter()
        .map(|&x| {
            let s = theta_of_x(model, x, cfg)?;
            let std = evaluate_at(spec.n, x, &s.cumulants, SaddlepointOptions::default())?;
            let t = evaluate_at(spec.n, x, &s.cumulants, tab)?;
            Ok(vec![x, s.theta, std.cdf1, std.cdf2, t.cdf2])
        })
        .collect::<Result<_>>()?;
    Ok((vec!["x", "theta", "saddle0", "saddle1", "saddle1_tabulated"], rows))
}

fn laplace_rows(model: &LognormalModel, spec: &TableSpec, cfg: &QuadratureConfig, mc: Option<&McConfig>) -> Result<Rows> {
    let nf = f64::from(spec.n);
    let mut columns = vec!["theta", "ltilde_n", "exact_n"];
    if mc.is_some() {
        columns.extend(["plain", "plain_hw", "bias_corrected", "bias_corrected_hw", "product", "product_hw"]);
    }
    let mut rows = vec![];
    for (i, &x) in spec.x.iter().enumerate() {
        let th = theta_tilde(model, x)?;
        let lt = laplace_asymptotic(model, th, AsymptoticVariant::WithDenominator)?;
        let mut row = vec![th, (nf * lt.ln()).exp(), (nf * log_laplace_k(model, th, 0, cfg)?).exp()];
        if let Some(mc) = mc {
            for st in [PowerStrategy::PlainPower, PowerStrategy::BiasCorrected, PowerStrategy::Product] {
                let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
                rng.set_stream(i as u64);
                let e = laplace_power_estimate(model, th, spec.n, mc.replications, st, &mut rng)?;
                row.extend([e.value, e.half_width]);
            }
        }
        rows.push(row);
    }
    Ok((columns, rows))
}

fn sum_rows(model: &LognormalModel, spec: &TableSpec, cfg: &QuadratureConfig, mc: Option<&McConfig>) -> Result<Rows> {
    let nf = f64::from(spec.n);
    let pdf = spec.kind == TableKind::Pdf;
    let mut columns = vec!["x", "nx", "theta_tilde", "saddle_tilde", "saddle2"];
    if mc.is_some() {
        columns.extend(["mc", "mc_hw"]);
    }
    let mut rows = vec![];
    for &x in &spec.x {
        let tt = theta_tilde(model, x)?;
        let at_tilde = evaluate_at(spec.n, x, &cumulants(model, tt, cfg)?, SaddlepointOptions::default())?;
        let sp = saddlepoint(model, spec.n, x, cfg, SaddlepointOptions::default())?;
        let mut row = if pdf {
            vec![x, nf * x, tt, at_tilde.pdf1, sp.pdf2]
        } else {
            vec![x, nf * x, tt, at_tilde.cdf1, sp.cdf2]
        };
        if let Some(mc) = mc {
            let e = if pdf {
                pdf_is_estimate(model, spec.n, x, PdfVariant::B, cfg, mc)?
            } else {
                cdf_is_estimate(model, spec.n, x, LaplaceMode::Numeric, cfg, mc)?
            };
            row.extend([e.value, e.half_width]);
        }
        rows.push(row);
    }
    Ok((columns, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        for n in TABLE_NAMES {
            let s = lookup(n).unwrap();
            assert_eq!(s.name, n);
            assert!(!s.x.is_empty());
        }
        assert!(lookup("cdf-n5").is_err());
    }

    #[test]
    fn grids_hit_the_sum_levels() {
        let s = lookup("cdf-s0072").unwrap();
        assert_eq!(s.n, 64);
        assert_eq!(s.sigma, 0.072);
        assert!((s.x[0] * 64.0 - 62.1).abs() < 1e-12);
        assert_eq!(lookup("pdf-n256").unwrap().x, lookup("cdf-n256").unwrap().x);
    }

    #[test]
    fn deterministic_columns_only() {
        let t = build(&lookup("cdf-n4").unwrap(), &QuadratureConfig::default(), None).unwrap();
        assert_eq!(t.columns.len(), 5);
        assert!(t.replications.is_none());
        let th = t.column("theta_tilde").unwrap();
        assert!((th[0] - 11.38).abs() < 0.005);
        let sp = t.column("saddle_tilde").unwrap();
        assert!((sp[0] / 1.53e-4 - 1.0).abs() < 0.005, "{}", sp[0]);
    }

    #[test]
    fn theta_table_is_not_stochastic() {
        let t = build(&lookup("t1").unwrap(), &QuadratureConfig::default(), Some(&McConfig::new(10, 1))).unwrap();
        assert!(t.seed.is_none());
        assert_eq!(t.rows.len(), 7);
    }
}
