use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_matrix::raw::{Column, RawDataset};
use crate::model_matrix::schema::Schema;

/// Relative spread below which an encoded column counts as constant.
const CONSTANT_TOL: f64 = 1e-12;

/// How one source column maps onto encoded columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnEncoding {
    Numeric {
        name: String,
        center: f64,
        scale: f64,
    },
    /// Indicators for every level but the first (the reference).
    Categorical {
        name: String,
        levels: Vec<String>,
        centers: Vec<f64>,
        scales: Vec<f64>,
    },
}

impl ColumnEncoding {
    fn width(&self) -> usize {
        match self {
            ColumnEncoding::Numeric { .. } => 1,
            ColumnEncoding::Categorical { levels, .. } => levels.len() - 1,
        }
    }

    fn source(&self) -> &str {
        match self {
            ColumnEncoding::Numeric { name, .. } | ColumnEncoding::Categorical { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BlockEncoding {
    pub columns: Vec<ColumnEncoding>,
}

impl BlockEncoding {
    pub fn width(&self) -> usize {
        self.columns.iter().map(ColumnEncoding::width).sum()
    }

    /// Encoded column names; indicators are named `column=level`.
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.width());
        for c in &self.columns {
            match c {
                ColumnEncoding::Numeric { name, .. } => out.push(name.clone()),
                ColumnEncoding::Categorical { name, levels, .. } => {
                    out.extend(levels[1..].iter().map(|l| format!("{name}={l}")))
                }
            }
        }
        out
    }

    /// Data columns this block is built from.
    pub fn source_columns(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.source().to_string()).collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.columns
            .iter()
            .flat_map(|c| match c {
                ColumnEncoding::Numeric { center, .. } => vec![*center],
                ColumnEncoding::Categorical { centers, .. } => centers.clone(),
            })
            .collect()
    }

    pub fn scales(&self) -> Vec<f64> {
        self.columns
            .iter()
            .flat_map(|c| match c {
                ColumnEncoding::Numeric { scale, .. } => vec![*scale],
                ColumnEncoding::Categorical { scales, .. } => scales.clone(),
            })
            .collect()
    }

    fn fit(raw: &RawDataset, names: &[String], scale: bool, block: &'static str) -> Result<Self> {
        let mut columns = Vec::with_capacity(names.len());
        for name in names {
            columns.push(match raw.require(name)? {
                Column::Numeric(v) => {
                    let (center, sd) = moments(v.iter().copied());
                    check_spread(name, center, sd)?;
                    ColumnEncoding::Numeric {
                        name: name.clone(),
                        center,
                        scale: if scale { sd } else { 1.0 },
                    }
                }
                col @ Column::Categorical(_) => {
                    let levels = col.levels();
                    if levels.len() < 2 {
                        return Err(Error::BadColumn {
                            column: name.clone(),
                            reason: format!("categorical {block} column needs at least two levels"),
                        });
                    }
                    let (mut centers, mut scales) = (Vec::new(), Vec::new());
                    for level in &levels[1..] {
                        let (c, sd) = moments(
                            (0..col.len()).map(|i| if col.text(i) == *level { 1.0 } else { 0.0 }),
                        );
                        check_spread(&format!("{name}={level}"), c, sd)?;
                        centers.push(c);
                        scales.push(if scale { sd } else { 1.0 });
                    }
                    ColumnEncoding::Categorical {
                        name: name.clone(),
                        levels,
                        centers,
                        scales,
                    }
                }
            });
        }
        Ok(BlockEncoding { columns })
    }

    /// Applies the stored centering, scaling and level map to `raw`.
    pub fn transform(&self, raw: &RawDataset) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(raw.n, self.width());
        let mut j0 = 0;
        for enc in &self.columns {
            let col = raw.require(enc.source())?;
            match enc {
                ColumnEncoding::Numeric {
                    name,
                    center,
                    scale,
                } => {
                    let Column::Numeric(v) = col else {
                        return Err(Error::BadColumn {
                            column: name.clone(),
                            reason: "expected a numeric column".into(),
                        });
                    };
                    for (i, x) in v.iter().enumerate() {
                        if !x.is_finite() {
                            return Err(Error::BadColumn {
                                column: name.clone(),
                                reason: format!("non-finite value in row {i}"),
                            });
                        }
                        m[(i, j0)] = (x - center) / scale;
                    }
                }
                ColumnEncoding::Categorical {
                    name,
                    levels,
                    centers,
                    scales,
                } => {
                    for i in 0..raw.n {
                        let value = col.text(i);
                        let k = levels.iter().position(|l| *l == value).ok_or_else(|| {
                            Error::UnseenLevel {
                                column: name.clone(),
                                level: value.clone(),
                            }
                        })?;
                        for (d, (c, s)) in centers.iter().zip(scales).enumerate() {
                            let ind = if k == d + 1 { 1.0 } else { 0.0 };
                            m[(i, j0 + d)] = (ind - c) / s;
                        }
                    }
                }
            }
            j0 += enc.width();
        }
        Ok(m)
    }

    /// Levels of categorical columns present in `raw` but absent from the encoding.
    pub fn unseen_levels(&self, raw: &RawDataset) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for enc in &self.columns {
            if let ColumnEncoding::Categorical { name, levels, .. } = enc {
                if let Some(col) = raw.column(name) {
                    for l in col.levels() {
                        if !levels.contains(&l) {
                            out.push((name.clone(), l));
                        }
                    }
                }
            }
        }
        out
    }
}

fn moments(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (mut sum, mut count) = (0.0, 0usize);
    for v in values.clone() {
        sum += v;
        count += 1;
    }
    let mean = sum / count.max(1) as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / count.max(1) as f64).sqrt())
}

fn check_spread(name: &str, center: f64, sd: f64) -> Result<()> {
    if !(sd > CONSTANT_TOL * center.abs().max(1.0)) {
        return Err(Error::ConstantColumn(name.to_string()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseEncoding {
    Numeric { name: String, center: f64 },
    /// Two-level categorical; the second level (lexicographically) maps to 1.
    Binary {
        name: String,
        levels: [String; 2],
        center: f64,
    },
}

impl ResponseEncoding {
    pub fn name(&self) -> &str {
        match self {
            ResponseEncoding::Numeric { name, .. } | ResponseEncoding::Binary { name, .. } => name,
        }
    }

    pub fn center(&self) -> f64 {
        match self {
            ResponseEncoding::Numeric { center, .. } | ResponseEncoding::Binary { center, .. } => *center,
        }
    }

    fn fit(raw: &RawDataset, name: &str) -> Result<Self> {
        match raw.require(name)? {
            Column::Numeric(v) => {
                let (center, _) = moments(v.iter().copied());
                Ok(ResponseEncoding::Numeric {
                    name: name.to_string(),
                    center,
                })
            }
            col @ Column::Categorical(_) => {
                let levels = col.levels();
                if levels.len() != 2 {
                    return Err(Error::BadColumn {
                        column: name.to_string(),
                        reason: format!(
                            "categorical response must have exactly two levels, found {}",
                            levels.len()
                        ),
                    });
                }
                let (center, _) =
                    moments((0..col.len()).map(|i| if col.text(i) == levels[1] { 1.0 } else { 0.0 }));
                Ok(ResponseEncoding::Binary {
                    name: name.to_string(),
                    levels: [levels[0].clone(), levels[1].clone()],
                    center,
                })
            }
        }
    }

    /// The response on its original scale (0/1 for binary responses).
    pub fn raw_values(&self, raw: &RawDataset) -> Result<DVector<f64>> {
        let col = raw.require(self.name())?;
        match (self, col) {
            (ResponseEncoding::Numeric { name, .. }, Column::Numeric(v)) => {
                if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                    return Err(Error::BadColumn {
                        column: name.clone(),
                        reason: format!("non-finite value in row {i}"),
                    });
                }
                Ok(DVector::from_column_slice(v))
            }
            (ResponseEncoding::Binary { name, levels, .. }, col) => {
                let mut y = DVector::zeros(col.len());
                for i in 0..col.len() {
                    let t = col.text(i);
                    y[i] = if t == levels[1] {
                        1.0
                    } else if t == levels[0] {
                        0.0
                    } else {
                        return Err(Error::UnseenLevel {
                            column: name.clone(),
                            level: t,
                        });
                    };
                }
                Ok(y)
            }
            (ResponseEncoding::Numeric { name, .. }, _) => Err(Error::BadColumn {
                column: name.clone(),
                reason: "expected a numeric response".into(),
            }),
        }
    }
}

/// Everything needed to apply the training-time transforms to new rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub response: ResponseEncoding,
    pub predictors: BlockEncoding,
    pub sensitive: BlockEncoding,
}

/// Centered response, predictors and sensitive attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMatrices {
    /// Centered response.
    pub y: DVector<f64>,
    /// Response on its original scale.
    pub y_raw: DVector<f64>,
    pub x: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub encoder: Encoder,
}

impl ModelMatrices {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn predictor_names(&self) -> Vec<String> {
        self.encoder.predictors.names()
    }

    pub fn sensitive_names(&self) -> Vec<String> {
        self.encoder.sensitive.names()
    }

    /// Builds matrices directly from already-encoded blocks, centering each column.
    pub fn from_blocks(y: DVector<f64>, x: DMatrix<f64>, s: DMatrix<f64>) -> Result<Self> {
        let block = |m: &DMatrix<f64>, prefix: &str| -> Result<(DMatrix<f64>, BlockEncoding)> {
            let mut out = m.clone();
            let mut columns = Vec::new();
            for (j, mut col) in out.column_iter_mut().enumerate() {
                let name = format!("{prefix}{}", j + 1);
                let (c, sd) = moments(col.as_slice().iter().copied());
                check_spread(&name, c, sd)?;
                col.add_scalar_mut(-c);
                columns.push(ColumnEncoding::Numeric {
                    name,
                    center: c,
                    scale: 1.0,
                });
            }
            Ok((out, BlockEncoding { columns }))
        };
        let (xc, predictors) = block(&x, "x")?;
        let (sc, sensitive) = block(&s, "s")?;
        let center = crate::linalg::mean(&y);
        let yc = y.add_scalar(-center);
        check_dims(y.len(), xc.ncols(), sc.ncols())?;
        Ok(ModelMatrices {
            y: yc,
            y_raw: y,
            x: xc,
            s: sc,
            encoder: Encoder {
                response: ResponseEncoding::Numeric {
                    name: "y".into(),
                    center,
                },
                predictors,
                sensitive,
            },
        })
    }
}

fn check_dims(n: usize, p: usize, q: usize) -> Result<()> {
    if n <= p {
        return Err(Error::TooFewRows {
            rows: n,
            columns: p,
            block: "predictor",
        });
    }
    if n <= q {
        return Err(Error::TooFewRows {
            rows: n,
            columns: q,
            block: "sensitive",
        });
    }
    Ok(())
}

impl Encoder {
    /// Learns centers, scales and level maps from `raw`.
    pub fn fit(raw: &RawDataset, schema: &Schema) -> Result<Self> {
        let resolved = schema.resolve(&raw.header)?;
        Ok(Encoder {
            response: ResponseEncoding::fit(raw, &resolved.response)?,
            predictors: BlockEncoding::fit(raw, &resolved.predictors, schema.scale.predictors, "predictor")?,
            sensitive: BlockEncoding::fit(raw, &resolved.sensitive, schema.scale.sensitive, "sensitive")?,
        })
    }

    pub fn transform(&self, raw: &RawDataset) -> Result<ModelMatrices> {
        let (x, s) = self.transform_features(raw)?;
        let y_raw = self.response.raw_values(raw)?;
        let y = y_raw.add_scalar(-self.response.center());
        Ok(ModelMatrices {
            y,
            y_raw,
            x,
            s,
            encoder: self.clone(),
        })
    }

    /// Predictor and sensitive blocks only; the response column may be absent.
    pub fn transform_features(&self, raw: &RawDataset) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        Ok((self.predictors.transform(raw)?, self.sensitive.transform(raw)?))
    }

    /// Data columns needed to score new rows.
    pub fn feature_columns(&self) -> Vec<String> {
        let mut v = self.predictors.source_columns();
        v.extend(self.sensitive.source_columns());
        v
    }

    pub fn unseen_levels(&self, raw: &RawDataset) -> Vec<(String, String)> {
        let mut v = self.predictors.unseen_levels(raw);
        v.extend(self.sensitive.unseen_levels(raw));
        v
    }
}

/// One-hot encodes (dropping the reference level), centers and optionally scales.
pub fn encode(raw: &RawDataset, schema: &Schema) -> Result<ModelMatrices> {
    let encoder = Encoder::fit(raw, schema)?;
    let mm = encoder.transform(raw)?;
    check_dims(mm.n(), mm.x.ncols(), mm.s.ncols())?;
    Ok(mm)
}
