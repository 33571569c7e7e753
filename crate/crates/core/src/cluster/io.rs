//! Text format for mixtures and CSV for loss histories.
//!
//! ```text
//! seiswarp-gmm 1
//! components 3
//! dim 2
//! covariance_mode full
//! weights
//! 0.5 0.3 0.2
//! means
//! <K rows of d values>
//! covariances
//! <K blocks of d rows (full) or K rows of d variances (diagonal)>
//! ```
//! Values are written in shortest round-trip decimal form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::model::{CovarianceMode, GmmModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &str = "seiswarp-gmm 1";

fn row<T: Scalar>(out: &mut String, xs: impl Iterator<Item = T>) {
    let line: Vec<String> = xs.map(|v| v.to_string()).collect();
    writeln!(out, "{}", line.join(" ")).unwrap();
}

pub fn gmm_to_text<T: Scalar>(model: &GmmModel<T>) -> String {
    let (k, d) = (model.n_components(), model.dim());
    let mut out = String::new();
    writeln!(out, "{MAGIC}\ncomponents {k}\ndim {d}\ncovariance_mode {}", model.mode).unwrap();
    out.push_str("weights\n");
    row(&mut out, model.weights.iter().copied());
    out.push_str("means\n");
    for m in model.means.rows() {
        row(&mut out, m.iter().copied());
    }
    out.push_str("covariances\n");
    for c in &model.covariances {
        match model.mode {
            CovarianceMode::Full => {
                for r in c.rows() {
                    row(&mut out, r.iter().copied());
                }
            }
            CovarianceMode::Diagonal => row(&mut out, c.diag().iter().copied()),
        }
    }
    out
}

struct Lines<'a> {
    path: &'a Path,
    inner: Box<dyn Iterator<Item = (usize, &'a str)> + 'a>,
}

impl<'a> Lines<'a> {
    fn header(&self, reason: impl Into<String>) -> Error {
        Error::MalformedHeader {
            path: self.path.to_path_buf(),
            reason: reason.into(),
        }
    }

    fn malformed(&self, line: usize, reason: impl Into<String>) -> Error {
        Error::Malformed {
            path: self.path.to_path_buf(),
            line,
            reason: reason.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .ok_or_else(|| self.header(format!("unexpected end of file, wanted {what}")))
    }

    fn field(&mut self, key: &str) -> Result<String> {
        let (_, l) = self.next(key)?;
        l.strip_prefix(key)
            .filter(|rest| rest.starts_with(' '))
            .map(|v| v.trim().to_string())
            .ok_or_else(|| self.header(format!("expected '{key} ...', found '{l}'")))
    }

    fn section(&mut self, name: &str) -> Result<()> {
        let (ln, l) = self.next(name)?;
        if l == name {
            Ok(())
        } else {
            Err(self.malformed(ln, format!("expected section '{name}', found '{l}'")))
        }
    }

    fn values<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>> {
        let (ln, l) = self.next("values")?;
        let v = l
            .split_whitespace()
            .map(|x| {
                x.parse::<T>()
                    .map_err(|_| self.malformed(ln, format!("'{x}' is not a number")))
            })
            .collect::<Result<Vec<T>>>()?;
        if v.len() != n {
            return Err(self.malformed(ln, format!("expected {n} values, found {}", v.len())));
        }
        Ok(v)
    }
}

/// Parses [`gmm_to_text`] output; `path` only labels errors.
pub fn gmm_from_text<T: Scalar>(path: &Path, text: &str) -> Result<GmmModel<T>> {
    let mut r = Lines {
        path,
        inner: Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.trim()))
                .filter(|(_, l)| !l.is_empty()),
        ),
    };
    let (_, magic) = r.next("magic line")?;
    if magic != MAGIC {
        return Err(r.header(format!("expected '{MAGIC}', found '{magic}'")));
    }
    let k: usize = r
        .field("components")?
        .parse()
        .map_err(|_| r.header("bad component count"))?;
    let d: usize = r.field("dim")?.parse().map_err(|_| r.header("bad dimension"))?;
    let mode = match r.field("covariance_mode")?.as_str() {
        "full" => CovarianceMode::Full,
        "diagonal" => CovarianceMode::Diagonal,
        other => return Err(r.header(format!("unknown covariance mode '{other}'"))),
    };
    if k == 0 || d == 0 {
        return Err(r.header("components and dim must be positive"));
    }

    r.section("weights")?;
    let weights = Array1::from(r.values::<T>(k)?);
    r.section("means")?;
    let mut means = Array2::zeros((k, d));
    for i in 0..k {
        means.row_mut(i).assign(&Array1::from(r.values::<T>(d)?));
    }
    r.section("covariances")?;
    let mut covariances = Vec::with_capacity(k);
    for _ in 0..k {
        let mut c = Array2::zeros((d, d));
        match mode {
            CovarianceMode::Full => {
                for i in 0..d {
                    c.row_mut(i).assign(&Array1::from(r.values::<T>(d)?));
                }
            }
            CovarianceMode::Diagonal => {
                for (i, v) in r.values::<T>(d)?.into_iter().enumerate() {
                    c[[i, i]] = v;
                }
            }
        }
        covariances.push(c);
    }
    if let Some((ln, l)) = r.inner.next() {
        return Err(r.malformed(ln, format!("trailing content '{l}'")));
    }
    GmmModel::new(weights, means, covariances, mode)
}

pub fn save_gmm<T: Scalar>(path: &Path, model: &GmmModel<T>) -> Result<()> {
    fs::write(path, gmm_to_text(model)).map_err(|e| Error::io(path, e))
}

pub fn load_gmm<T: Scalar>(path: &Path) -> Result<GmmModel<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    gmm_from_text(path, &text)
}

/// `epoch,nll` rows, epochs numbered from 1.
pub fn loss_history_to_csv<T: Scalar>(history: &[T]) -> String {
    let mut out = String::from("epoch,nll\n");
    for (i, v) in history.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, v).unwrap();
    }
    out
}

pub fn save_loss_history<T: Scalar>(path: &Path, history: &[T]) -> Result<()> {
    fs::write(path, loss_history_to_csv(history)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn model(mode: CovarianceMode) -> GmmModel<f64> {
        let c0 = match mode {
            CovarianceMode::Full => array![[1.5, 0.1 + 0.2], [0.1 + 0.2, 2.0]],
            CovarianceMode::Diagonal => array![[1.5, 0.0], [0.0, 2.0]],
        };
        GmmModel::new(
            array![0.25, 0.75],
            array![[1.0 / 3.0, -2.0], [1e-300, 7.0e12]],
            vec![c0, Array2::eye(2)],
            mode,
        )
        .unwrap()
    }

    #[test]
    fn round_trips_bit_exactly() {
        for mode in [CovarianceMode::Full, CovarianceMode::Diagonal] {
            let m = model(mode);
            let text = gmm_to_text(&m);
            let back: GmmModel<f64> = gmm_from_text(Path::new("m"), &text).unwrap();
            assert_eq!(back, m);
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.gmm");
        save_gmm(&p, &model(CovarianceMode::Full)).unwrap();
        assert_eq!(load_gmm::<f64>(&p).unwrap(), model(CovarianceMode::Full));
    }

    #[test]
    fn rejects_bad_files() {
        let good = gmm_to_text(&model(CovarianceMode::Full));
        let p = Path::new("m");
        assert!(matches!(
            gmm_from_text::<f64>(p, &good.replace("seiswarp-gmm 1", "gmm")),
            Err(Error::MalformedHeader { .. })
        ));
        assert!(matches!(
            gmm_from_text::<f64>(p, &good.replace("0.25 0.75", "0.25 x")),
            Err(Error::Malformed { line: 6, .. })
        ));
        let truncated: String = good.lines().take(9).collect::<Vec<_>>().join("\n");
        assert!(gmm_from_text::<f64>(p, &truncated).is_err());
        assert!(gmm_from_text::<f64>(p, &format!("{good}1 2\n")).is_err());
        assert!(gmm_from_text::<f64>(p, &good.replace("0.25 0.75", "0.5 0.75")).is_err());
    }

    #[test]
    fn loss_csv_layout() {
        assert_eq!(loss_history_to_csv(&[3.5f64, 2.25]), "epoch,nll\n1,3.5\n2,2.25\n");
    }
}
