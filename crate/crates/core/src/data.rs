//! Datasets: Friedman #3 synthesis, CSV ingestion, the seeded 80/20 split and
//! z-score standardization.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::Matrix;
use crate::scalar::Scalar;

/// Feature matrix and response vector with a provenance name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    pub name: String,
    pub feature_names: Vec<String>,
    pub x: Matrix<T>,
    pub y: Vec<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(name: impl Into<String>, x: Matrix<T>, y: Vec<T>) -> Result<Self> {
        let feature_names = (1..=x.cols()).map(|i| format!("x{i}")).collect();
        Self::with_feature_names(name, feature_names, x, y)
    }

    pub fn with_feature_names(
        name: impl Into<String>,
        feature_names: Vec<String>,
        x: Matrix<T>,
        y: Vec<T>,
    ) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} targets",
                x.rows(),
                y.len()
            )));
        }
        if feature_names.len() != x.cols() {
            return Err(Error::Shape(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                x.cols()
            )));
        }
        if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("dataset contains non-finite values".into()));
        }
        Ok(Dataset {
            name: name.into(),
            feature_names,
            x,
            y,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.x.cols()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Dataset {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }

    /// Writes a header row (feature names then `target_name`) and one line per sample.
    pub fn write_csv(&self, path: &Path, target_name: &str) -> Result<()> {
        let mut out = csv::Writer::from_path(path)?;
        let mut header = self.feature_names.clone();
        header.push(target_name.to_string());
        out.write_record(&header)?;
        for r in 0..self.len() {
            let rec: Vec<String> = self
                .x
                .row(r)
                .iter()
                .chain(std::iter::once(&self.y[r]))
                .map(|v| format!("{v:?}"))
                .collect();
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Friedman #3: `y = atan((z2·z3 − 1/(z2·z4)) / z1) + noise_std · N(0, 1)` with
/// `z1 ∈ [0, 100]`, `z2 ∈ [40π, 560π]`, `z3 ∈ [0, 1]`, `z4 ∈ [1, 11]`.
pub fn friedman3_response(z: &[f64; 4]) -> f64 {
    let [z1, z2, z3, z4] = *z;
    ((z2 * z3 - 1.0 / (z2 * z4)) / z1).atan()
}

pub const FRIEDMAN3_BOUNDS: [(f64, f64); 4] = [
    (0.0, 100.0),
    (40.0 * std::f64::consts::PI, 560.0 * std::f64::consts::PI),
    (0.0, 1.0),
    (1.0, 11.0),
];

pub fn gen_friedman3<R: Rng + ?Sized>(n: usize, rng: &mut R, noise_std: f64) -> Result<Dataset<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("Friedman3 needs n >= 1".into()));
    }
    let mut xs = Vec::with_capacity(n * 4);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut z = [0.0; 4];
        for (zi, &(lo, hi)) in z.iter_mut().zip(&FRIEDMAN3_BOUNDS) {
            *zi = rng.random_range(lo..=hi);
        }
        let noise = if noise_std == 0.0 {
            0.0
        } else {
            noise_std * f64::standard_normal(rng)
        };
        y.push(friedman3_response(&z) + noise);
        xs.extend_from_slice(&z);
    }
    Dataset::with_feature_names(
        "friedman3",
        (1..=4).map(|i| format!("z{i}")).collect(),
        Matrix::from_vec(n, 4, xs)?,
        y,
    )
}

/// Reads a headered, comma-separated numeric table. `target` becomes `y`;
/// columns in `drop` are discarded; everything else is a feature.
pub fn load_csv(path: &Path, target: &str, drop: &[&str]) -> Result<Dataset<f64>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let target_idx = header
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| Error::MissingColumn {
            path: path.into(),
            column: target.into(),
        })?;
    for d in drop {
        if !header.iter().any(|h| h == d) {
            return Err(Error::MissingColumn {
                path: path.into(),
                column: (*d).into(),
            });
        }
    }
    let feature_idx: Vec<usize> = (0..header.len())
        .filter(|&i| i != target_idx && !drop.contains(&header[i].as_str()))
        .collect();
    let mut xs = Vec::new();
    let mut y = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            let cell = rec.get(i).unwrap_or("");
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumericCell {
                    path: path.into(),
                    row: row + 1,
                    column: header[i].clone(),
                    value: cell.into(),
                })
        };
        for &i in &feature_idx {
            xs.push(parse(i)?);
        }
        y.push(parse(target_idx)?);
    }
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    let n = y.len();
    Dataset::with_feature_names(
        name,
        feature_idx.iter().map(|&i| header[i].clone()).collect(),
        Matrix::from_vec(n, feature_idx.len(), xs)?,
        y,
    )
}

/// Boston housing: 13 features, target `MEDV`.
pub fn load_boston(path: &Path) -> Result<Dataset<f64>> {
    let mut ds = load_csv(path, "MEDV", &[])?;
    ds.name = "boston".into();
    Ok(ds)
}

/// Energy efficiency: 8 features `X1..X8`, first response `Y1`; `Y2` is dropped.
pub fn load_energy(path: &Path) -> Result<Dataset<f64>> {
    let mut ds = load_csv(path, "Y1", &["Y2"])?;
    ds.name = "energy".into();
    Ok(ds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset<T> {
    pub train: Dataset<T>,
    pub valid: Dataset<T>,
    pub train_idx: Vec<usize>,
    pub valid_idx: Vec<usize>,
    pub split_seed: u64,
}

/// Seeded permutation; the first `floor(0.8 n)` rows train, the rest validate.
pub fn split_80_20<T: Scalar>(ds: &Dataset<T>, seed: u64) -> Result<SplitDataset<T>> {
    let n = ds.len();
    if n < 5 {
        return Err(Error::InvalidArgument(format!(
            "an 80/20 split needs at least 5 rows, got {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = n * 4 / 5;
    let (train_idx, valid_idx) = perm.split_at(n_train);
    Ok(SplitDataset {
        train: ds.select(train_idx),
        valid: ds.select(valid_idx),
        train_idx: train_idx.to_vec(),
        valid_idx: valid_idx.to_vec(),
        split_seed: seed,
    })
}

/// Per-column z-scoring fitted on training rows only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T> {
    pub x_mean: Vec<T>,
    pub x_std: Vec<T>,
    pub y_mean: T,
    pub y_std: T,
}

fn mean_std<T: Scalar>(v: impl Iterator<Item = T> + Clone, what: &str) -> (T, T) {
    let n = T::lit(v.clone().count() as f64);
    let m = v.clone().sum::<T>() / n;
    let var = v.map(|x| (x - m) * (x - m)).sum::<T>() / n;
    let sd = var.sqrt();
    if sd > T::zero() && sd.is_finite() {
        (m, sd)
    } else {
        log::warn!("{what} is constant on the training rows; using unit scale");
        (m, T::one())
    }
}

impl<T: Scalar> Standardizer<T> {
    pub fn fit(train: &Dataset<T>) -> Self {
        let (mut x_mean, mut x_std) = (Vec::new(), Vec::new());
        for c in 0..train.feature_dim() {
            let col = train.x.col(c);
            let (m, s) = mean_std(col.iter().copied(), &format!("feature `{}`", train.feature_names[c]));
            x_mean.push(m);
            x_std.push(s);
        }
        let (y_mean, y_std) = mean_std(train.y.iter().copied(), "target");
        Standardizer {
            x_mean,
            x_std,
            y_mean,
            y_std,
        }
    }

    pub fn apply(&self, ds: &Dataset<T>) -> Result<Dataset<T>> {
        if ds.feature_dim() != self.x_mean.len() {
            return Err(Error::Shape(format!(
                "standardizer fitted on {} features, dataset has {}",
                self.x_mean.len(),
                ds.feature_dim()
            )));
        }
        let mut x = ds.x.clone();
        for r in 0..x.rows() {
            for (c, v) in x.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.x_mean[c]) / self.x_std[c];
            }
        }
        let y = ds.y.iter().map(|&v| (v - self.y_mean) / self.y_std).collect();
        Ok(Dataset {
            name: ds.name.clone(),
            feature_names: ds.feature_names.clone(),
            x,
            y,
        })
    }

    pub fn invert(&self, ds: &Dataset<T>) -> Result<Dataset<T>> {
        if ds.feature_dim() != self.x_mean.len() {
            return Err(Error::Shape("standardizer/dataset feature count differs".into()));
        }
        let mut x = ds.x.clone();
        for r in 0..x.rows() {
            for (c, v) in x.row_mut(r).iter_mut().enumerate() {
                *v = *v * self.x_std[c] + self.x_mean[c];
            }
        }
        Ok(Dataset {
            name: ds.name.clone(),
            feature_names: ds.feature_names.clone(),
            x,
            y: self.invert_y(&ds.y),
        })
    }

    pub fn invert_y(&self, y: &[T]) -> Vec<T> {
        y.iter().map(|&v| v * self.y_std + self.y_mean).collect()
    }
}

/// Split, then standardize both halves with statistics of the training half.
pub fn prepare<T: Scalar>(ds: &Dataset<T>, seed: u64) -> Result<(SplitDataset<T>, Standardizer<T>)> {
    let split = split_80_20(ds, seed)?;
    let st = Standardizer::fit(&split.train);
    let train = st.apply(&split.train)?;
    let valid = st.apply(&split.valid)?;
    Ok((
        SplitDataset {
            train,
            valid,
            ..split
        },
        st,
    ))
}

/// Writes `contents` to `path` through a temporary sibling and a rename.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension(format!(
        "tmp.{}.{:?}",
        std::process::id(),
        std::thread::current().id()
    ));
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(contents).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn friedman3_bounds_and_determinism() {
        let a = gen_friedman3(10_000, &mut ChaCha8Rng::seed_from_u64(1), 1.0).unwrap();
        for r in 0..a.len() {
            for (c, &(lo, hi)) in FRIEDMAN3_BOUNDS.iter().enumerate() {
                let v = a.x.get(r, c);
                assert!(v >= lo && v <= hi);
            }
        }
        let b = gen_friedman3(10_000, &mut ChaCha8Rng::seed_from_u64(1), 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.feature_names, vec!["z1", "z2", "z3", "z4"]);
    }

    #[test]
    fn friedman3_point_value() {
        let y = friedman3_response(&[1.0, 4.0 * std::f64::consts::PI, 0.5, 1.0]);
        let expected = (2.0 * std::f64::consts::PI - 1.0 / (4.0 * std::f64::consts::PI)).atan();
        assert_eq!(y, expected);
        assert!((y - 1.4109).abs() < 1e-4);
    }

    #[test]
    fn noiseless_friedman3_matches_formula() {
        let ds = gen_friedman3(50, &mut ChaCha8Rng::seed_from_u64(3), 0.0).unwrap();
        for r in 0..50 {
            let z = ds.x.row(r);
            assert_eq!(ds.y[r], friedman3_response(&[z[0], z[1], z[2], z[3]]));
        }
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn toy_csv_parses_exactly() {
        let f = write_tmp("a,b,target\n1,2.5,3\n-4,5e-1,6\n7,8,9.25\n");
        let ds = load_csv(f.path(), "target", &[]).unwrap();
        assert_eq!(ds.x.shape(), (3, 2));
        assert_eq!(ds.x.values(), &[1.0, 2.5, -4.0, 0.5, 7.0, 8.0]);
        assert_eq!(ds.y, vec![3.0, 6.0, 9.25]);
        assert_eq!(ds.feature_names, vec!["a", "b"]);
    }

    #[test]
    fn csv_errors_are_specific() {
        let f = write_tmp("a,b,y\n1,2,3\n4,oops,6\n");
        let err = load_csv(f.path(), "y", &[]).unwrap_err();
        match err {
            Error::NonNumericCell { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
            }
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(
            load_csv(f.path(), "nope", &[]),
            Err(Error::MissingColumn { .. })
        ));
        assert!(matches!(
            load_csv(Path::new("/definitely/missing.csv"), "y", &[]),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn energy_layout_drops_second_response() {
        let f = write_tmp(
            "X1,X2,X3,X4,X5,X6,X7,X8,Y1,Y2\n0.98,514.5,294,110.25,7,2,0,0,15.55,21.33\n0.9,563.5,318.5,122.5,7,3,0.1,1,20.84,28.28\n",
        );
        let ds = load_energy(f.path()).unwrap();
        assert_eq!(ds.feature_dim(), 8);
        assert_eq!(ds.y, vec![15.55, 20.84]);
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        for (n, tr, va) in [(100, 80, 20), (503, 402, 101), (5, 4, 1)] {
            let ds = Dataset::new("t", Matrix::<f64>::zeros(n, 1), vec![0.0; n]).unwrap();
            let s = split_80_20(&ds, 7).unwrap();
            assert_eq!((s.train.len(), s.valid.len()), (tr, va));
        }
        let tiny = Dataset::new("t", Matrix::<f64>::zeros(4, 1), vec![0.0; 4]).unwrap();
        assert!(split_80_20(&tiny, 0).is_err());
    }

    #[test]
    fn split_is_a_disjoint_cover() {
        let n = 97;
        let ds = Dataset::new(
            "t",
            Matrix::column(&(0..n).map(|i| i as f64).collect::<Vec<_>>()),
            vec![0.0; n],
        )
        .unwrap();
        let s = split_80_20(&ds, 13).unwrap();
        let mut all: Vec<usize> = s.train_idx.iter().chain(&s.valid_idx).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
        assert_eq!(s.valid.x.col(0)[0] as usize, s.valid_idx[0]);
        assert_eq!(split_80_20(&ds, 13).unwrap().valid_idx, s.valid_idx);
    }

    #[test]
    fn standardizer_round_trip_and_moments() {
        let ds = gen_friedman3(200, &mut ChaCha8Rng::seed_from_u64(2), 1.0).unwrap();
        let (split, st) = prepare(&ds, 5).unwrap();
        for c in 0..4 {
            let m = split.train.x.col(c).iter().sum::<f64>() / split.train.len() as f64;
            assert!(m.abs() < 1e-10);
        }
        let back = st.invert(&split.valid).unwrap();
        let raw = ds.select(&split.valid_idx);
        for (a, b) in back.x.values().iter().zip(raw.x.values()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        for (a, b) in back.y.iter().zip(&raw.y) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn constant_column_gets_unit_scale() {
        let x = Matrix::from_rows(&[[1.0, 3.0], [2.0, 3.0], [3.0, 3.0]]).unwrap();
        let ds = Dataset::new("c", x, vec![1.0, 2.0, 3.0]).unwrap();
        let st = Standardizer::fit(&ds);
        assert_eq!(st.x_std[1], 1.0);
        let z = st.apply(&ds).unwrap();
        assert!(z.x.col(1).iter().all(|&v| v == 0.0));
    }
}
