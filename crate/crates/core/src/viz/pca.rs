use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PcaError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("points differ in dimension")]
    Ragged,
    #[error("all points are identical")]
    RankZero,
}

/// Two-component PCA of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// Projected coordinates, one pair per input point.
    pub coords: Vec<[f64; 2]>,
    /// Fraction of total variance captured by each component.
    pub explained: [f64; 2],
    /// Unit principal directions; the second is zero for 1-D input.
    pub components: [Vec<f64>; 2],
    pub mean: Vec<f64>,
    /// All covariance eigenvalues, descending (population normalization).
    pub eigenvalues: Vec<f64>,
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn orient(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Mean-centred PCA onto the two leading eigenvectors of the covariance.
/// Each direction is signed so that its largest-magnitude coordinate is
/// positive.
pub fn pca_project(points: &[Vec<f64>]) -> Result<Pca, PcaError> {
    if points.len() < 2 {
        return Err(PcaError::TooFewPoints(points.len()));
    }
    let k = points[0].len();
    if points.iter().any(|p| p.len() != k) {
        return Err(PcaError::Ragged);
    }
    let n = points.len() as f64;
    let mut mean = vec![0.0; k];
    for p in points {
        mean.iter_mut().zip(p).for_each(|(m, x)| *m += x / n);
    }
    let centered = DMatrix::from_fn(points.len(), k, |i, j| points[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / n;
    let total = cov.trace();
    if total <= 0.0 {
        return Err(PcaError::RankZero);
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let component = |r: usize| -> Vec<f64> {
        match order.get(r) {
            Some(&i) => {
                let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
                orient(&mut v);
                v
            }
            None => vec![0.0; k],
        }
    };
    let components = [component(0), component(1)];
    let coords = (0..points.len())
        .map(|i| {
            let row = centered.row(i);
            let dot = |c: &[f64]| row.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
            [dot(&components[0]), dot(&components[1])]
        })
        .collect();
    let frac = |r: usize| eigenvalues.get(r).map_or(0.0, |v| v / total);
    Ok(Pca {
        coords,
        explained: [frac(0), frac(1)],
        components,
        mean,
        eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(seed: u64, n: usize, k: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..k).map(|j| rng.random_range(-1.0..1.0) * (j + 1) as f64).collect())
            .collect()
    }

    #[test]
    fn planar_points_explain_everything() {
        let pts: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let (a, b) = (i as f64, (i * i % 7) as f64);
                vec![a + b, a - b, 2.0 * a, 0.5 * b, 0.0]
            })
            .collect();
        let p = pca_project(&pts).unwrap();
        assert_abs_diff_eq!(p.explained[0] + p.explained[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mirrored_input_negates_coordinates() {
        let pts = cloud(1, 30, 4);
        let mirrored: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|x| -x).collect()).collect();
        let (a, b) = (pca_project(&pts).unwrap(), pca_project(&mirrored).unwrap());
        assert_eq!(a.components, b.components);
        for (x, y) in a.coords.iter().zip(&b.coords) {
            assert_abs_diff_eq!(x[0], -y[0], epsilon = 1e-12);
            assert_abs_diff_eq!(x[1], -y[1], epsilon = 1e-12);
        }
        for c in &a.components {
            let big = c.iter().cloned().fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn reconstruction_error_is_trailing_eigenvalues() {
        let pts = cloud(2, 50, 6);
        let p = pca_project(&pts).unwrap();
        let mut err = 0.0;
        for (x, c) in pts.iter().zip(&p.coords) {
            for j in 0..x.len() {
                let rec = p.mean[j] + c[0] * p.components[0][j] + c[1] * p.components[1][j];
                err += (x[j] - rec).powi(2);
            }
        }
        err /= pts.len() as f64;
        assert_abs_diff_eq!(err, p.eigenvalues[2..].iter().sum::<f64>(), epsilon = 1e-10);
    }

    #[test]
    fn projected_covariance_is_diagonal() {
        let p = pca_project(&cloud(3, 40, 5)).unwrap();
        let cross: f64 = p.coords.iter().map(|c| c[0] * c[1]).sum::<f64>() / p.coords.len() as f64;
        assert!(cross.abs() < 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(pca_project(&[vec![1.0, 2.0]]), Err(PcaError::TooFewPoints(1)));
        assert_eq!(pca_project(&[vec![1.0, 2.0], vec![1.0, 2.0]]), Err(PcaError::RankZero));
        assert_eq!(pca_project(&[vec![1.0], vec![1.0, 2.0]]), Err(PcaError::Ragged));
        let p = pca_project(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(p.coords, vec![[-1.0, 0.0], [1.0, 0.0]]);
        assert_eq!(p.explained, [1.0, 0.0]);
    }
}
