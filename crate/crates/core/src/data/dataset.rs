use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::Tensor2;

/// How rows are divided into train / validation / test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitConvention {
    /// Fixed row counts from the start of the file; later rows are unused.
    Fixed { train: usize, val: usize, test: usize },
    /// `train = ⌊T·train⌋`, `test = ⌊T·test⌋`, validation takes the rest.
    Ratio { train: f64, test: f64 },
}

impl SplitConvention {
    /// 12/4/4 months of hourly data.
    pub const ETT_HOURLY: Self = SplitConvention::Fixed {
        train: 8640,
        val: 2880,
        test: 2880,
    };
    /// 12/4/4 months at 15-minute resolution.
    pub const ETT_MINUTE: Self = SplitConvention::Fixed {
        train: 34560,
        val: 11520,
        test: 11520,
    };
    pub const SEVENTY_TEN_TWENTY: Self = SplitConvention::Ratio { train: 0.7, test: 0.2 };

    /// Everything is training data (toy inputs, inspection).
    pub const ALL_TRAIN: Self = SplitConvention::Ratio { train: 1.0, test: 0.0 };

    pub fn boundaries(&self, rows: usize) -> Result<[Range<usize>; 3]> {
        let (a, b, c) = match *self {
            SplitConvention::Fixed { train, val, test } => {
                if rows < train + val + test {
                    return Err(Error::config(format!(
                        "split convention needs {} rows, dataset has {rows}",
                        train + val + test
                    )));
                }
                (train, val, test)
            }
            SplitConvention::Ratio { train, test } => {
                if !(0.0..=1.0).contains(&train) || !(0.0..=1.0).contains(&test) || train + test > 1.0 {
                    return Err(Error::config(format!("invalid split ratios train={train} test={test}")));
                }
                let a = (rows as f64 * train) as usize;
                let c = (rows as f64 * test) as usize;
                (a, rows - a - c, c)
            }
        };
        Ok([0..a, a..a + b, a + b..a + b + c])
    }
}

/// `ett_hourly`, `ett_minute`, `70/10/20`, or `ratio:<train>,<test>`.
impl std::str::FromStr for SplitConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ett_hourly" => return Ok(SplitConvention::ETT_HOURLY),
            "ett_minute" => return Ok(SplitConvention::ETT_MINUTE),
            "70/10/20" => return Ok(SplitConvention::SEVENTY_TEN_TWENTY),
            _ => {}
        }
        let bad = || Error::config(format!("unknown split convention `{s}` (ett_hourly, ett_minute, 70/10/20, ratio:<train>,<test>)"));
        let (train, test) = s.strip_prefix("ratio:").and_then(|r| r.split_once(',')).ok_or_else(bad)?;
        let conv = SplitConvention::Ratio {
            train: train.trim().parse().map_err(|_| bad())?,
            test: test.trim().parse().map_err(|_| bad())?,
        };
        conv.boundaries(100)?;
        Ok(conv)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// A multivariate series with its splits and train-split standardization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesDataset {
    pub name: String,
    pub columns: Vec<String>,
    /// `T × C`, as read.
    pub raw: Tensor2,
    /// `T × C`, z-scored with the train statistics. Models and metrics use these.
    pub values: Tensor2,
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
    pub mean: Vec<f64>,
    /// Population standard deviation of the train rows (1 for constant channels).
    pub std: Vec<f64>,
}

impl SeriesDataset {
    pub fn new(name: impl Into<String>, columns: Vec<String>, raw: Tensor2, convention: SplitConvention) -> Result<Self> {
        if columns.len() != raw.cols() {
            return Err(Error::Data(format!("{} column names for {} channels", columns.len(), raw.cols())));
        }
        if raw.cols() == 0 || raw.rows() == 0 {
            return Err(Error::Data("dataset has no values".into()));
        }
        let [train, val, test] = convention.boundaries(raw.rows())?;
        if train.is_empty() {
            return Err(Error::config("train split is empty"));
        }
        let n = train.len() as f64;
        let mut mean = vec![0.0; raw.cols()];
        let mut std = vec![0.0; raw.cols()];
        for (c, (m, s)) in mean.iter_mut().zip(std.iter_mut()).enumerate() {
            let col = train.clone().map(|t| raw.get(t, c));
            *m = col.clone().sum::<f64>() / n;
            let var = col.map(|v| (v - *m) * (v - *m)).sum::<f64>() / n;
            *s = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        }
        let mut values = raw.clone();
        for t in 0..values.rows() {
            for (c, v) in values.row_mut(t).iter_mut().enumerate() {
                *v = (*v - mean[c]) / std[c];
            }
        }
        Ok(Self {
            name: name.into(),
            columns,
            raw,
            values,
            train,
            val,
            test,
            mean,
            std,
        })
    }

    pub fn channels(&self) -> usize {
        self.values.cols()
    }

    pub fn timesteps(&self) -> usize {
        self.values.rows()
    }

    pub fn split_range(&self, split: Split) -> Range<usize> {
        match split {
            Split::Train => self.train.clone(),
            Split::Val => self.val.clone(),
            Split::Test => self.test.clone(),
        }
    }

    /// Maps standardized values of channel `c` back to the original scale.
    pub fn destandardize(&self, c: usize, v: f64) -> f64 {
        v * self.std[c] + self.mean[c]
    }
}

/// Reads a CSV with a header row whose first column is a timestamp
/// (ignored) and whose remaining columns are numeric channels.
pub fn load_csv(path: impl AsRef<Path>, convention: SplitConvention) -> Result<SeriesDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path.file_stem().map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    read_csv(file, &name, convention)
}

pub fn read_csv(reader: impl std::io::Read, name: &str, convention: SplitConvention) -> Result<SeriesDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Data(format!("unreadable header: {e}")))?.clone();
    if header.len() < 2 {
        return Err(Error::Data("expected a timestamp column and at least one value column".into()));
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            column: 0,
            detail: e.to_string(),
        })?;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                row,
                column: rec.len(),
                detail: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        for (j, cell) in rec.iter().enumerate().skip(1) {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                column: j + 1,
                detail: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: j + 1,
                    detail: format!("`{cell}` is not finite"),
                });
            }
            data.push(v);
        }
        rows += 1;
    }
    let raw = Tensor2::from_vec(rows, columns.len(), data)?;
    SeriesDataset::new(name, columns, raw, convention)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convention_names() {
        assert_eq!("ett_hourly".parse::<SplitConvention>().unwrap(), SplitConvention::ETT_HOURLY);
        assert_eq!("70/10/20".parse::<SplitConvention>().unwrap(), SplitConvention::SEVENTY_TEN_TWENTY);
        assert_eq!(
            "ratio:0.6, 0.3".parse::<SplitConvention>().unwrap(),
            SplitConvention::Ratio { train: 0.6, test: 0.3 }
        );
        assert!("ratio:0.9,0.3".parse::<SplitConvention>().is_err());
        assert!("weekly".parse::<SplitConvention>().is_err());
    }

    #[test]
    fn toy_csv_is_standardized() {
        let csv = "date,x\n2020-01-01,1\n2020-01-02,2\n2020-01-03,3\n";
        let ds = read_csv(csv.as_bytes(), "toy", SplitConvention::ALL_TRAIN).unwrap();
        assert_eq!(ds.values.col(0).iter().sum::<f64>(), 0.0);
        assert_eq!(ds.mean, vec![2.0]);
        assert!((ds.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(ds.destandardize(0, ds.values.get(2, 0)), 3.0);
    }

    #[test]
    fn ett_hourly_splits() {
        let raw = Tensor2::zeros(14_400, 1);
        let ds = SeriesDataset::new("etth1", vec!["OT".into()], raw, SplitConvention::ETT_HOURLY).unwrap();
        assert_eq!((ds.train.len(), ds.val.len(), ds.test.len()), (8640, 2880, 2880));
        assert_eq!(ds.val.start, 8640);
        assert!(SeriesDataset::new("short", vec!["OT".into()], Tensor2::zeros(14_399, 1), SplitConvention::ETT_HOURLY).is_err());
    }

    #[test]
    fn ratio_splits() {
        let [a, b, c] = SplitConvention::SEVENTY_TEN_TWENTY.boundaries(52_696).unwrap();
        assert_eq!(a.len(), 36_887);
        assert_eq!(c.len(), 10_539);
        assert_eq!(a.len() + b.len() + c.len(), 52_696);
        assert_eq!(b.end, c.start);
    }

    #[test]
    fn statistics_ignore_val_and_test_rows() {
        let mut raw = Tensor2::zeros(100, 1);
        for t in 0..100 {
            raw.set(t, 0, (t as f64).sin());
        }
        let a = SeriesDataset::new("a", vec!["x".into()], raw.clone(), SplitConvention::SEVENTY_TEN_TWENTY).unwrap();
        raw.set(95, 0, 1e9);
        raw.set(75, 0, -1e9);
        let b = SeriesDataset::new("b", vec!["x".into()], raw, SplitConvention::SEVENTY_TEN_TWENTY).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.std, b.std);
    }

    #[test]
    fn parse_errors_carry_position() {
        let csv = "date,a,b\nt0,1,2\nt1,3,oops\n";
        match read_csv(csv.as_bytes(), "bad", SplitConvention::ALL_TRAIN) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
        let err = load_csv("/nonexistent/weather.csv", SplitConvention::SEVENTY_TEN_TWENTY).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.is_data());
    }
}
