//! Seeded Gaussian projection operators and the dense dataset type they act on.
//!
//! Each operator row is an i.i.d. standard-normal vector normalised to unit
//! length. Rows are not orthogonalised unless asked for; in thousands of
//! dimensions they are nearly orthogonal anyway. Coordinates of projected
//! points are left unscaled: comparisons against the original space multiply
//! squared distances by `n/n'` at the point of comparison.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{JlError, Result};

/// An `m x d` dense point set with one identifier per point.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Array2<f64>,
    ids: Vec<u64>,
}

impl Dataset {
    pub fn new(points: Array2<f64>, ids: Vec<u64>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(JlError::Shape("a dataset needs at least one point".into()));
        }
        if ids.len() != points.nrows() {
            return Err(JlError::Shape(format!(
                "{} ids for {} points",
                ids.len(),
                points.nrows()
            )));
        }
        if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
            let d = points.ncols();
            return Err(JlError::Format(format!(
                "non-finite value at point {}, coordinate {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self { points, ids })
    }

    /// Points numbered `0..m`.
    pub fn from_points(points: Array2<f64>) -> Result<Self> {
        let ids = (0..points.nrows() as u64).collect();
        Self::new(points, ids)
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    /// Same ids, new coordinates.
    pub fn with_points(&self, points: Array2<f64>) -> Result<Self> {
        Self::new(points, self.ids.clone())
    }

    pub fn into_points(self) -> Array2<f64> {
        self.points
    }
}

/// The reconstructible part of an operator: the matrix is a pure function of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperatorSpec {
    pub n: usize,
    pub n_prime: usize,
    pub seed: u64,
    pub orthogonalize: bool,
}

impl OperatorSpec {
    pub fn build(&self) -> Result<ProjectionOperator> {
        if self.orthogonalize {
            ProjectionOperator::build_orthogonalized(self.n, self.n_prime, self.seed)
        } else {
            ProjectionOperator::build(self.n, self.n_prime, self.seed)
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "jlkit-operator 1\nn={}\nn_prime={}\nseed={}\northogonalize={}\n",
            self.n, self.n_prime, self.seed, self.orthogonalize
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some("jlkit-operator 1") {
            return Err(JlError::Format("missing operator header".into()));
        }
        let (mut n, mut n_prime, mut seed, mut orthogonalize) = (None, None, None, false);
        for line in lines {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| JlError::Format(format!("bad operator line `{line}`")))?;
            let bad = |_| JlError::Format(format!("bad value in `{line}`"));
            match key.trim() {
                "n" => n = Some(value.trim().parse().map_err(bad)?),
                "n_prime" => n_prime = Some(value.trim().parse().map_err(bad)?),
                "seed" => seed = Some(value.trim().parse().map_err(bad)?),
                "orthogonalize" => {
                    orthogonalize = value
                        .trim()
                        .parse()
                        .map_err(|_| JlError::Format(format!("bad value in `{line}`")))?
                }
                other => return Err(JlError::Format(format!("unknown operator key `{other}`"))),
            }
        }
        let missing = |k: &str| JlError::Format(format!("operator file lacks `{k}`"));
        Ok(Self {
            n: n.ok_or_else(|| missing("n"))?,
            n_prime: n_prime.ok_or_else(|| missing("n_prime"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            orthogonalize,
        })
    }
}

/// First ChaCha8 stream used for operator rows. Mixture clusters and
/// [`crate::datagen::gaussian_points`] use streams below this.
pub const OPERATOR_STREAM: u64 = 1 << 63;

/// An `n' x n` matrix with unit-norm rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOperator {
    spec: OperatorSpec,
    rows: Array2<f64>,
}

impl ProjectionOperator {
    /// Row `i` is drawn from ChaCha8 stream `OPERATOR_STREAM + i` of the key
    /// derived from `seed`, so rows can be generated in any order with
    /// identical results. The offset keeps rows independent of data generated
    /// from the same seed.
    pub fn build(n: usize, n_prime: usize, seed: u64) -> Result<Self> {
        check_shape(n, n_prime)?;
        let mut rows = Array2::<f64>::zeros((n_prime, n));
        rows.axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(i, mut row)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(OPERATOR_STREAM + i as u64);
                for v in row.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                let norm = row.dot(&row).sqrt();
                row.mapv_inplace(|v| v / norm);
            });
        Ok(Self {
            spec: OperatorSpec {
                n,
                n_prime,
                seed,
                orthogonalize: false,
            },
            rows,
        })
    }

    /// Same draw, followed by modified Gram-Schmidt over the rows.
    pub fn build_orthogonalized(n: usize, n_prime: usize, seed: u64) -> Result<Self> {
        let mut op = Self::build(n, n_prime, seed)?;
        for i in 0..n_prime {
            for j in 0..i {
                let (done, mut rest) = op.rows.view_mut().split_at(Axis(0), i);
                let prev = done.row(j);
                let mut cur = rest.row_mut(0);
                let c = cur.dot(&prev);
                cur.scaled_add(-c, &prev);
            }
            let mut cur = op.rows.row_mut(i);
            let norm = cur.dot(&cur).sqrt();
            cur.mapv_inplace(|v| v / norm);
        }
        op.spec.orthogonalize = true;
        Ok(op)
    }

    pub fn from_spec(spec: &OperatorSpec) -> Result<Self> {
        spec.build()
    }

    pub fn spec(&self) -> OperatorSpec {
        self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn n_prime(&self) -> usize {
        self.spec.n_prime
    }

    pub fn seed(&self) -> u64 {
        self.spec.seed
    }

    pub fn rows(&self) -> ArrayView2<'_, f64> {
        self.rows.view()
    }

    /// `sqrt(n/n')`, the factor mapping projected distances back to the
    /// original scale.
    pub fn scale(&self) -> f64 {
        self.squared_scale().sqrt()
    }

    /// `n/n'`, applied to squared distances.
    pub fn squared_scale(&self) -> f64 {
        self.spec.n as f64 / self.spec.n_prime as f64
    }

    /// `x' = M x` for every point; ids are carried over.
    pub fn project(&self, data: &Dataset) -> Result<Dataset> {
        if data.dim() != self.spec.n {
            return Err(JlError::Shape(format!(
                "operator expects dimension {}, dataset has {}",
                self.spec.n,
                data.dim()
            )));
        }
        let projected = data.points().dot(&self.rows.t());
        data.with_points(projected)
    }
}

fn check_shape(n: usize, n_prime: usize) -> Result<()> {
    if n_prime == 0 || n_prime >= n {
        return Err(JlError::Shape(format!(
            "need 0 < n' < n, got n'={n_prime}, n={n}"
        )));
    }
    Ok(())
}

/// Builds the operator for `(n, n_prime, seed)` and applies it.
pub fn project(data: &Dataset, n_prime: usize, seed: u64) -> Result<Dataset> {
    ProjectionOperator::build(data.dim(), n_prime, seed)?.project(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn deterministic_in_seed() {
        let a = ProjectionOperator::build(4, 2, 17).unwrap();
        let b = ProjectionOperator::build(4, 2, 17).unwrap();
        assert_eq!(a, b);
        let c = ProjectionOperator::build(4, 2, 18).unwrap();
        assert_ne!(a.rows(), c.rows());
    }

    #[test]
    fn rows_have_unit_norm() {
        let op = ProjectionOperator::build(300, 40, 3).unwrap();
        for row in op.rows().rows() {
            assert!((row.dot(&row).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rows_prefix_independent_of_count() {
        // Row i depends only on (seed, i).
        let a = ProjectionOperator::build(50, 5, 9).unwrap();
        let b = ProjectionOperator::build(50, 12, 9).unwrap();
        assert_eq!(a.rows(), b.rows().slice(ndarray::s![..5, ..]));
    }

    #[test]
    fn rejects_bad_shape() {
        assert!(ProjectionOperator::build(4, 4, 0).is_err());
        assert!(ProjectionOperator::build(4, 0, 0).is_err());
        let op = ProjectionOperator::build(4, 2, 0).unwrap();
        let data = Dataset::from_points(Array2::zeros((3, 5))).unwrap();
        assert!(matches!(op.project(&data), Err(JlError::Shape(_))));
    }

    #[test]
    fn orthogonalized_rows_are_orthonormal() {
        let op = ProjectionOperator::build_orthogonalized(60, 20, 5).unwrap();
        let gram = op.rows().dot(&op.rows().t());
        for i in 0..20 {
            for j in 0..20 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-12);
            }
        }
        assert!(op.spec().orthogonalize);
    }

    #[test]
    fn zero_maps_to_zero_and_scaling_commutes() {
        let op = ProjectionOperator::build(6, 3, 1).unwrap();
        let x = array![
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, -2.0, 0.5, 3.0, 0.0, 1.0]
        ];
        let two_x = &x * 2.0;
        let p = op.project(&Dataset::from_points(x).unwrap()).unwrap();
        let q = op.project(&Dataset::from_points(two_x).unwrap()).unwrap();
        assert!(p.point(0).iter().all(|&v| v == 0.0));
        for (a, b) in p.point(1).iter().zip(q.point(1).iter()) {
            assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn near_orthogonal_rows_in_high_dimension() {
        // Inner products of independent random unit vectors in R^n have
        // standard deviation 1/sqrt(n) ~ 0.0045 here; 0.05 is ~11 sigma.
        let trials = 100;
        let mut good = 0;
        for seed in 0..trials {
            let op = ProjectionOperator::build(50_000, 100, seed).unwrap();
            let gram = op.rows().dot(&op.rows().t());
            let worst = (0..100)
                .flat_map(|i| (0..100).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| gram[[i, j]].abs())
                .fold(0.0, f64::max);
            if worst < 0.05 {
                good += 1;
            }
        }
        assert!(good as f64 / trials as f64 >= 0.99);
    }

    #[test]
    fn spec_text_roundtrip() {
        let spec = OperatorSpec {
            n: 5000,
            n_prime: 2188,
            seed: u64::MAX,
            orthogonalize: false,
        };
        assert_eq!(OperatorSpec::from_text(&spec.to_text()).unwrap(), spec);
        assert!(OperatorSpec::from_text("nope").is_err());
        assert!(OperatorSpec::from_text("jlkit-operator 1\nn=3\n").is_err());
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::from_points(Array2::zeros((0, 3))).is_err());
        assert!(Dataset::new(Array2::zeros((2, 3)), vec![1]).is_err());
        assert!(Dataset::from_points(array![[1.0, f64::NAN]]).is_err());
    }

    proptest! {
        #[test]
        fn projection_is_linear(
            seed in any::<u64>(),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            xs in proptest::collection::vec(-10.0f64..10.0, 24),
            ys in proptest::collection::vec(-10.0f64..10.0, 24),
        ) {
            let op = ProjectionOperator::build(8, 3, seed).unwrap();
            let x = Array2::from_shape_vec((3, 8), xs).unwrap();
            let y = Array2::from_shape_vec((3, 8), ys).unwrap();
            let combo = &x * a + &y * b;
            let px = op.project(&Dataset::from_points(x).unwrap()).unwrap();
            let py = op.project(&Dataset::from_points(y).unwrap()).unwrap();
            let pc = op.project(&Dataset::from_points(combo).unwrap()).unwrap();
            let want = px.points() * a + py.points() * b;
            for (got, want) in pc.points().iter().zip(want.iter()) {
                let scale = want.abs().max(1.0);
                prop_assert!((got - want).abs() <= 1e-10 * scale);
            }
        }
    }
}
