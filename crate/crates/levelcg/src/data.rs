//! Returns data: CSV ingestion and a seeded synthetic generator.
//!
//! CSV layout: a header row whose first column is `index_return`, then one
//! column per asset (the header names the asset); one row per period.

use std::io::Read;
use std::path::Path;

use levelcg_core::models::ReturnsData;
use levelcg_core::oracle::Rows;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub const INDEX_COLUMN: &str = "index_return";

pub fn load_returns_csv(path: impl AsRef<Path>) -> Result<ReturnsData> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| BenchError::io(path, e))?;
    parse_returns_csv(file)
}

pub fn parse_returns_csv(input: impl Read) -> Result<ReturnsData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(input);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(BenchError::EmptyData),
    };
    if header.get(0) != Some(INDEX_COLUMN) {
        return Err(BenchError::Parse { row: 1, col: 1, msg: format!("header must start with `{INDEX_COLUMN}`") });
    }
    if header.len() < 2 {
        return Err(BenchError::Parse { row: 1, col: 2, msg: "no asset columns".into() });
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = names.len();
    let mut index = Vec::new();
    let mut assets = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line());
            BenchError::Parse { row, col: 0, msg: e.to_string() }
        })?;
        let row = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != n + 1 {
            return Err(BenchError::Parse {
                row,
                col: rec.len().min(n + 1) + 1,
                msg: format!("expected {} cells, found {}", n + 1, rec.len()),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| BenchError::Parse { row, col: c + 1, msg: format!("not a finite number: `{cell}`") })?;
            if c == 0 {
                index.push(v);
            } else {
                assets.push(v);
            }
        }
    }
    if index.is_empty() {
        return Err(BenchError::EmptyData);
    }
    Ok(ReturnsData::new(Rows::new(index.len(), n, assets)?, index, names)?)
}

pub fn write_returns_csv(data: &ReturnsData, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![INDEX_COLUMN.to_string()];
    header.extend(data.asset_names.iter().cloned());
    w.write_record(&header)?;
    for k in 0..data.n_samples() {
        let mut row = vec![format!("{:?}", data.index_returns[k])];
        row.extend(data.asset_returns.row(k).iter().map(|v| format!("{v:?}")));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

/// One-factor market model for weekly returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReturnsSpec {
    pub n_assets: usize,
    pub n_samples: usize,
    pub market_mean: f64,
    pub market_vol: f64,
    /// Idiosyncratic volatility is drawn uniformly from this range.
    pub idio_vol: (f64, f64),
    /// Asset betas are drawn uniformly from this range.
    pub beta: (f64, f64),
    /// Tracking noise of the index around the market factor.
    pub index_noise: f64,
}

impl Default for ReturnsSpec {
    fn default() -> Self {
        Self {
            n_assets: 50,
            n_samples: 500,
            market_mean: 0.002,
            market_vol: 0.02,
            idio_vol: (0.01, 0.04),
            beta: (0.5, 1.5),
            index_noise: 0.003,
        }
    }
}

/// `r_ik = a_i + b_i m_k + e_ik`, `R_k = m_k + n_k`, all Gaussian, seeded.
pub fn gen_synthetic_returns(spec: &ReturnsSpec, seed: u64) -> Result<ReturnsData> {
    if spec.n_assets == 0 || spec.n_samples == 0 {
        return Err(BenchError::Config("synthetic returns need n_assets and n_samples >= 1".into()));
    }
    let bad = |what: &str| BenchError::Config(format!("synthetic returns: invalid {what}"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let market = Normal::new(spec.market_mean, spec.market_vol).map_err(|_| bad("market_vol"))?;
    let noise = Normal::new(0.0, spec.index_noise).map_err(|_| bad("index_noise"))?;
    let alpha = Normal::new(0.0, 0.001).expect("constant parameters");
    let params: Vec<(f64, f64, Normal<f64>)> = (0..spec.n_assets)
        .map(|_| {
            let b = rng.random_range(spec.beta.0..=spec.beta.1);
            let s = rng.random_range(spec.idio_vol.0..=spec.idio_vol.1);
            Ok((alpha.sample(&mut rng), b, Normal::new(0.0, s).map_err(|_| bad("idio_vol"))?))
        })
        .collect::<Result<_>>()?;
    let mut index = Vec::with_capacity(spec.n_samples);
    let mut assets = Vec::with_capacity(spec.n_samples * spec.n_assets);
    for _ in 0..spec.n_samples {
        let m = market.sample(&mut rng);
        index.push(m + noise.sample(&mut rng));
        for (a, b, e) in &params {
            assets.push(a + b * m + e.sample(&mut rng));
        }
    }
    let names = (1..=spec.n_assets).map(|i| format!("asset_{i}")).collect();
    Ok(ReturnsData::new(Rows::new(spec.n_samples, spec.n_assets, assets)?, index, names)?)
}
