//! Observation storage, CSV ingestion and seeded sample splitting.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Affine map from raw covariate units onto `[0, 1]`: `scaled = (raw - min) / range`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rescale {
    pub min: f64,
    pub range: f64,
}

impl Rescale {
    pub const IDENTITY: Rescale = Rescale { min: 0.0, range: 1.0 };

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn apply(&self, raw: f64) -> f64 {
        if self.is_identity() {
            raw
        } else {
            (raw - self.min) / self.range
        }
    }

    pub fn invert(&self, scaled: f64) -> f64 {
        if self.is_identity() {
            scaled
        } else {
            scaled * self.range + self.min
        }
    }
}

impl Default for Rescale {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Paired observations `(x_i, y_i)` with covariates on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    xs: Vec<f64>,
    ys: Vec<f64>,
    rescale: Rescale,
}

impl Dataset {
    /// Builds a dataset from covariates already on `[0, 1]`.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        Self::validate(&xs, &ys)?;
        if let Some(&x) = xs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::OutOfDomain(x));
        }
        Ok(Self {
            xs,
            ys,
            rescale: Rescale::IDENTITY,
        })
    }

    /// Builds a dataset from raw covariates, rescaling them affinely onto
    /// `[0, 1]` if any value falls outside it.
    pub fn from_raw(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        Self::validate(&xs, &ys)?;
        let (lo, hi) = xs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        let range = hi - lo;
        if range <= 0.0 {
            return Err(Error::ConstantCovariate);
        }
        if lo >= 0.0 && hi <= 1.0 {
            return Ok(Self {
                xs,
                ys,
                rescale: Rescale::IDENTITY,
            });
        }
        let rescale = Rescale { min: lo, range };
        let xs = xs
            .into_iter()
            .map(|x| rescale.apply(x).clamp(0.0, 1.0))
            .collect();
        Ok(Self { xs, ys, rescale })
    }

    fn validate(xs: &[f64], ys: &[f64]) -> Result<()> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                what: "covariates vs targets",
                left: xs.len(),
                right: ys.len(),
            });
        }
        if xs.len() < 2 {
            return Err(Error::TooFewObservations { n: xs.len(), min: 2 });
        }
        if let Some(i) = xs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "covariates", index: i });
        }
        if let Some(i) = ys.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "targets", index: i });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn rescale(&self) -> Rescale {
        self.rescale
    }

    /// Copies out the observations at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> (Vec<f64>, Vec<f64>) {
        indices
            .iter()
            .map(|&i| (self.xs[i], self.ys[i]))
            .unzip()
    }
}

/// Reads a CSV with a header row and two named numeric columns.
///
/// Row numbers in parse errors count data rows from 1 (the header is not a
/// data row).
pub fn load_csv(path: impl AsRef<Path>, x_col: &str, y_col: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let xi = find(x_col)?;
    let yi = find(y_col)?;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record?;
        let parse = |idx: usize, column: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row,
                    column: column.to_string(),
                    value: raw.to_string(),
                })
        };
        xs.push(parse(xi, x_col)?);
        ys.push(parse(yi, y_col)?);
    }
    Dataset::from_raw(xs, ys)
}

/// Writes a two-column CSV. Covariates are written in raw units.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>, x_col: &str, y_col: &str) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([x_col, y_col])?;
    for (&x, &y) in ds.xs.iter().zip(&ds.ys) {
        w.write_record([format!("{:?}", ds.rescale.invert(x)), format!("{y:?}")])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// A two-way partition of `0..n`.
///
/// `fold1` trains the first stage, `fold2` (of size `m`) feeds the residual
/// smoother. Both index lists are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub fold1: Vec<usize>,
    pub fold2: Vec<usize>,
}

impl Split {
    pub fn m(&self) -> usize {
        self.fold2.len()
    }

    pub fn n(&self) -> usize {
        self.fold1.len() + self.fold2.len()
    }

    /// The same partition with the fold roles exchanged.
    pub fn swapped(&self) -> Split {
        Split {
            fold1: self.fold2.clone(),
            fold2: self.fold1.clone(),
        }
    }
}

/// Uniformly random split of `ds` into halves, reproducible from `(n, seed)`.
///
/// A Fisher-Yates shuffle of `0..n` is driven by a ChaCha8 stream seeded with
/// `seed`; swap positions are drawn as `u64` so the permutation does not
/// depend on pointer width. The first `⌊n/2⌋` shuffled indices form `fold1`
/// and the remaining `⌈n/2⌉` form `fold2`.
pub fn split_even(ds: &Dataset, seed: u64) -> Result<Split> {
    split_indices(ds.len(), seed)
}

pub fn split_indices(n: usize, seed: u64) -> Result<Split> {
    if n < 4 {
        return Err(Error::TooFewObservations { n, min: 4 });
    }
    let mut rng = rng::stream(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i as u64) as usize;
        perm.swap(i, j);
    }
    let half = n / 2;
    let mut fold1 = perm[..half].to_vec();
    let mut fold2 = perm[half..].to_vec();
    fold1.sort_unstable();
    fold2.sort_unstable();
    Ok(Split { fold1, fold2 })
}
