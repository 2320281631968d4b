//! PCA compression of description embeddings: `e = W^T (z - mean)`.

use ndarray::{Array1, Array2, ArrayView1, Axis, ShapeBuilder};

use super::eigen::symmetric_eigen;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    mean: Array1<f64>,
    /// `dim x d_t`; columns are orthonormal principal directions.
    components: Array2<f64>,
}

impl PcaModel {
    pub fn new(mean: Array1<f64>, components: Array2<f64>) -> Result<Self> {
        if components.nrows() != mean.len() {
            return Err(Error::Shape {
                expected: mean.len(),
                actual: components.nrows(),
            });
        }
        Ok(Self { mean, components })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.ncols()
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn components(&self) -> &Array2<f64> {
        &self.components
    }

    /// Text layout: `d_t`, input dimension, the mean, then components column-major.
    /// One number per line.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(24 * (self.mean.len() * (1 + self.output_dim())));
        out.push_str(&format!("{}\n{}\n", self.output_dim(), self.input_dim()));
        for x in &self.mean {
            out.push_str(&format!("{x:?}\n"));
        }
        for col in self.components.columns() {
            for x in col {
                out.push_str(&format!("{x:?}\n"));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next_usize = |what: &str| -> Result<usize> {
            let (i, l) = lines
                .next()
                .ok_or_else(|| Error::schema(0, format!("missing {what}")))?;
            l.trim()
                .parse()
                .map_err(|_| Error::schema(i + 1, format!("invalid {what} {l:?}")))
        };
        let d_t = next_usize("d_t")?;
        let dim = next_usize("dimension")?;
        if d_t > dim {
            return Err(Error::schema(1, format!("d_t {d_t} exceeds dimension {dim}")));
        }
        let expected = dim
            .checked_mul(d_t + 1)
            .filter(|n| *n <= 1 << 26)
            .ok_or_else(|| Error::schema(2, "model too large"))?;
        let mut values = Vec::with_capacity(expected);
        for (i, l) in text.lines().enumerate().skip(2) {
            if values.len() == expected {
                if !l.trim().is_empty() {
                    return Err(Error::schema(i + 1, "trailing data"));
                }
                continue;
            }
            let x: f64 = l
                .trim()
                .parse()
                .map_err(|_| Error::schema(i + 1, format!("invalid number {l:?}")))?;
            if !x.is_finite() {
                return Err(Error::schema(i + 1, "non-finite value"));
            }
            values.push(x);
        }
        if values.len() != expected {
            return Err(Error::schema(
                text.lines().count(),
                format!("expected {expected} values, found {}", values.len()),
            ));
        }
        let comps = values.split_off(dim);
        let mean = Array1::from(values);
        let components = Array2::from_shape_vec((dim, d_t).f(), comps).expect("length checked");
        Ok(Self {
            mean,
            components: components.as_standard_layout().to_owned(),
        })
    }
}


/// Principal directions with the variance each one captures.
#[derive(Clone, Debug)]
pub struct PcaFit {
    pub model: PcaModel,
    pub eigenvalues: Vec<f64>,
}

/// Fits the top `d_t` principal components of `rows` (one sample per row).
///
/// `d_t == 0` yields an empty projection and `d_t == dim` an identity basis
/// after mean-centring. Otherwise components are eigenvectors of the sample
/// covariance in descending eigenvalue order, each signed so its first
/// nonzero entry is positive.
pub fn fit_pca(rows: &Array2<f64>, d_t: usize) -> Result<PcaModel> {
    fit_pca_with_spectrum(rows, d_t).map(|f| f.model)
}

pub fn fit_pca_with_spectrum(rows: &Array2<f64>, d_t: usize) -> Result<PcaFit> {
    let (n, dim) = rows.dim();
    if d_t > dim {
        return Err(Error::Config(format!("d_t {d_t} exceeds input dimension {dim}")));
    }
    let mean = if n > 0 {
        rows.mean_axis(Axis(0)).expect("non-empty")
    } else {
        Array1::zeros(dim)
    };
    if d_t == 0 {
        return Ok(PcaFit {
            model: PcaModel {
                mean,
                components: Array2::zeros((dim, 0)),
            },
            eigenvalues: Vec::new(),
        });
    }
    if d_t == dim {
        return Ok(PcaFit {
            model: PcaModel {
                mean,
                components: Array2::eye(dim),
            },
            eigenvalues: Vec::new(),
        });
    }
    if n < 2 {
        return Err(Error::Config(format!("PCA needs at least 2 rows, got {n}")));
    }
    if d_t > n.min(dim) {
        return Err(Error::Config(format!(
            "d_t {d_t} exceeds min(rows {n}, dimension {dim})"
        )));
    }

    let centered = rows - &mean.view().insert_axis(Axis(0));
    let denom = (n - 1) as f64;
    let (values, mut components) = if dim <= n {
        let cov = centered.t().dot(&centered) / denom;
        let (vals, vecs) = symmetric_eigen(&cov);
        let comps = vecs.slice(ndarray::s![.., ..d_t]).to_owned();
        (vals[..d_t].to_vec(), comps)
    } else {
        // Eigenvectors of X^T X recovered from the n x n Gram matrix X X^T.
        let gram = centered.dot(&centered.t()) / denom;
        let (vals, vecs) = symmetric_eigen(&gram);
        let tol = vals.first().copied().unwrap_or(0.0).abs().max(1e-300) * 1e-10;
        let mut comps = Array2::<f64>::zeros((dim, d_t));
        let mut filled = 0;
        for k in 0..d_t {
            if vals[k] <= tol {
                break;
            }
            let u = centered.t().dot(&vecs.column(k)) / (vals[k] * denom).sqrt();
            comps.column_mut(k).assign(&u);
            filled += 1;
        }
        complete_basis(&mut comps, filled);
        let v = (0..d_t).map(|k| vals[k].max(0.0)).collect();
        (v, comps)
    };
    for mut col in components.columns_mut() {
        if let Some(first) = col.iter().copied().find(|x| x.abs() > 1e-12) {
            if first < 0.0 {
                col.mapv_inplace(|x| -x);
            }
        }
    }
    Ok(PcaFit {
        model: PcaModel { mean, components },
        eigenvalues: values,
    })
}

/// Fills columns `filled..` with unit vectors orthogonal to all earlier columns,
/// drawn from the standard basis by Gram-Schmidt.
fn complete_basis(comps: &mut Array2<f64>, mut filled: usize) {
    let (dim, want) = comps.dim();
    let mut candidate = 0;
    while filled < want && candidate < dim {
        let mut v = Array1::<f64>::zeros(dim);
        v[candidate] = 1.0;
        candidate += 1;
        for _ in 0..2 {
            for k in 0..filled {
                let c = comps.column(k);
                let proj = c.dot(&v);
                v.scaled_add(-proj, &c);
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-6 {
            comps.column_mut(filled).assign(&(v / norm));
            filled += 1;
        }
    }
}

/// `W^T (z - mean)`.
pub fn project(model: &PcaModel, z: ArrayView1<f64>) -> Result<Array1<f64>> {
    if z.len() != model.input_dim() {
        return Err(Error::Shape {
            expected: model.input_dim(),
            actual: z.len(),
        });
    }
    let centered = &z - &model.mean;
    Ok(model.components.t().dot(&centered))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0))
    }

    fn assert_orthonormal(c: &Array2<f64>) {
        let g = c.t().dot(c);
        for ((i, j), x) in g.indexed_iter() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((x - want).abs() < 1e-6, "gram[{i},{j}] = {x}");
        }
    }

    #[test]
    fn rank_one_direction() {
        let dir = array![3.0, 0.0, 4.0] / 5.0;
        let rows = Array2::from_shape_fn((6, 3), |(i, j)| (i as f64 - 2.0) * dir[j]);
        let m = fit_pca(&rows, 1).unwrap();
        let c = m.components().column(0);
        assert!((c.dot(&dir).abs() - 1.0).abs() < 1e-9);
        assert!(c[0] > 0.0);
    }

    #[test]
    fn mean_projects_to_zero() {
        let rows = random(8, 5, 1);
        let m = fit_pca(&rows, 3).unwrap();
        let p = project(&m, m.mean().view()).unwrap();
        assert!(p.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn both_routes_orthonormal_and_sorted() {
        for (n, d) in [(10, 4), (4, 10), (12, 12), (3, 30)] {
            let rows = random(n, d, (n * 100 + d) as u64);
            let k = (n - 1).min(d);
            let fit = fit_pca_with_spectrum(&rows, k).unwrap();
            assert_orthonormal(fit.model.components());
            assert!(fit.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn completes_rank_deficient_basis() {
        let rows = random(3, 8, 9);
        let m = fit_pca(&rows, 3).unwrap();
        assert_orthonormal(m.components());
    }

    #[test]
    fn special_dimensions() {
        let rows = random(5, 6, 2);
        let empty = fit_pca(&rows, 0).unwrap();
        assert_eq!(project(&empty, rows.row(0)).unwrap().len(), 0);
        let full = fit_pca(&rows, 6).unwrap();
        let z = rows.row(1);
        let p = project(&full, z).unwrap();
        let centered = &z - full.mean();
        assert!((p.dot(&p).sqrt() - centered.dot(&centered).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn config_errors() {
        let rows = random(4, 6, 3);
        assert!(matches!(fit_pca(&rows, 5), Err(Error::Config(_))));
        assert!(matches!(fit_pca(&rows, 7), Err(Error::Config(_))));
        assert!(matches!(fit_pca(&random(1, 6, 0), 2), Err(Error::Config(_))));
        let m = fit_pca(&rows, 2).unwrap();
        assert!(matches!(project(&m, Array1::zeros(5).view()), Err(Error::Shape { .. })));
    }

    #[test]
    fn text_round_trip() {
        let m = fit_pca(&random(7, 5, 4), 3).unwrap();
        assert_eq!(PcaModel::from_text(&m.to_text()).unwrap(), m);
        assert!(PcaModel::from_text("2\n3\n0.1\n").is_err());
        assert!(PcaModel::from_text("4\n3\n").is_err());
        assert!(PcaModel::from_text("").is_err());
    }
}
