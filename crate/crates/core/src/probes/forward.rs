use super::{EuclideanProbe, Model, PoincareProbe, Probe};
use crate::geometry::{grad, raw, BallPoint, GeometryError};
use ndarray::{Array2, ArrayView2};

/// Metric the probe's outputs live in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Space {
    Euclidean,
    /// Poincaré ball with curvature magnitude `c`.
    Poincare(f64),
}

fn diff(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

impl Space {
    pub fn dist(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Space::Euclidean => raw::norm(&diff(x, y)),
            Space::Poincare(c) => raw::distance(x, y, c),
        }
    }

    pub fn sq_dist(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Space::Euclidean => raw::norm_sq(&diff(x, y)),
            Space::Poincare(c) => raw::distance(x, y, c).powi(2),
        }
    }

    /// Squared distance to the origin (the predicted depth).
    pub fn sq_norm(self, x: &[f64]) -> f64 {
        match self {
            Space::Euclidean => raw::norm_sq(x),
            Space::Poincare(c) => raw::distance_to_origin(x, c).powi(2),
        }
    }

    pub fn dist_grad(self, x: &[f64], y: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        match self {
            Space::Euclidean => {
                let d = diff(x, y);
                let n = raw::norm(&d);
                if n == 0.0 {
                    return (0.0, vec![0.0; x.len()], vec![0.0; y.len()]);
                }
                let gx: Vec<f64> = d.iter().map(|v| v / n).collect();
                let gy = gx.iter().map(|v| -v).collect();
                (n, gx, gy)
            }
            Space::Poincare(c) => grad::distance_grad(x, y, c),
        }
    }

    pub fn sq_dist_grad(self, x: &[f64], y: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        match self {
            Space::Euclidean => {
                let d = diff(x, y);
                let gx: Vec<f64> = d.iter().map(|v| 2.0 * v).collect();
                let gy = gx.iter().map(|v| -v).collect();
                (raw::norm_sq(&d), gx, gy)
            }
            Space::Poincare(c) => grad::sq_distance_grad(x, y, c),
        }
    }

    pub fn sq_norm_grad(self, x: &[f64]) -> (f64, Vec<f64>) {
        match self {
            Space::Euclidean => (raw::norm_sq(x), x.iter().map(|v| 2.0 * v).collect()),
            Space::Poincare(c) => {
                let zero = vec![0.0; x.len()];
                let (v, gx, _) = grad::sq_distance_grad(x, &zero, c);
                (v, gx)
            }
        }
    }
}

enum Cache {
    Poincare {
        u: Array2<f64>,
        p_pre: Vec<Vec<f64>>,
        p: Vec<Vec<f64>>,
        q_pre: Vec<Vec<f64>>,
    },
    Euclidean {
        a: Array2<f64>,
        z: Option<Array2<f64>>,
    },
}

/// Projected points of one sentence plus what the backward pass needs.
pub struct Forward {
    pub points: Vec<Vec<f64>>,
    cache: Cache,
}

impl PoincareProbe {
    /// Probe output for a single embedding.
    pub fn project(&self, h: &[f64]) -> Result<BallPoint, GeometryError> {
        if h.len() != self.p.nrows() {
            return Err(GeometryError::DimensionMismatch {
                left: h.len(),
                right: self.p.nrows(),
            });
        }
        if !h.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let emb = ArrayView2::from_shape((1, h.len()), h).expect("row view");
        let fwd = self.forward(emb);
        Ok(BallPoint::from_projected(fwd.points.into_iter().next().unwrap(), self.c))
    }

    fn forward(&self, emb: ArrayView2<'_, f64>) -> Forward {
        let c = self.c.get();
        let u = emb.dot(&self.p);
        let mut p_pre = Vec::with_capacity(u.nrows());
        let mut p = Vec::with_capacity(u.nrows());
        let mut q_pre = Vec::with_capacity(u.nrows());
        let mut points = Vec::with_capacity(u.nrows());
        for row in u.rows() {
            let pre = raw::exp0(row.as_slice().expect("row-major"), c);
            let mut pp = pre.clone();
            raw::project_in_place(&mut pp, c);
            let q = if self.use_q {
                let qp = raw::mobius_matvec(self.q.view(), &pp, c);
                let mut q = qp.clone();
                raw::project_in_place(&mut q, c);
                q_pre.push(qp);
                q
            } else {
                pp.clone()
            };
            p_pre.push(pre);
            p.push(pp);
            points.push(q);
        }
        Forward {
            points,
            cache: Cache::Poincare { u, p_pre, p, q_pre },
        }
    }
}

impl EuclideanProbe {
    fn forward(&self, emb: ArrayView2<'_, f64>) -> Forward {
        let a = emb.dot(&self.b1);
        let (points, z) = match &self.second {
            None => (rows(&a), None),
            Some(s) => {
                let z = a.mapv(|v| s.activation.apply(v));
                let e = z.dot(&s.b2.t());
                (rows(&e), Some(z))
            }
        };
        Forward {
            points,
            cache: Cache::Euclidean { a, z },
        }
    }
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

impl Model {
    /// Runs the probe over a `t × n` embedding matrix.
    ///
    /// # Panics
    /// If the embedding width differs from the probe's input dimension.
    pub fn forward(&self, emb: ArrayView2<'_, f64>) -> Forward {
        assert_eq!(
            emb.ncols(),
            self.probe.input_dim(),
            "embedding width does not match the probe"
        );
        match &self.probe {
            Probe::Poincare(p) => p.forward(emb),
            Probe::Euclidean(e) => e.forward(emb),
        }
    }

    pub fn project_sentence(&self, emb: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
        self.forward(emb).points
    }

    /// Accumulates into `grad` the parameter adjoints given the adjoint of
    /// every output point.
    pub(crate) fn backward(&self, emb: ArrayView2<'_, f64>, fwd: &Forward, adj: &[Vec<f64>], grad: &mut Model) {
        match (&self.probe, &fwd.cache, &mut grad.probe) {
            (Probe::Poincare(pr), Cache::Poincare { u, p_pre, p, q_pre }, Probe::Poincare(g)) => {
                let c = pr.c.get();
                let mut g_u = Array2::<f64>::zeros(u.raw_dim());
                for (i, a) in adj.iter().enumerate() {
                    if a.iter().all(|v| *v == 0.0) {
                        continue;
                    }
                    let g_p = if pr.use_q {
                        let g_qpre = grad::project_vjp(&q_pre[i], c, a);
                        grad::matvec_vjp(pr.q.view(), &p[i], c, &g_qpre, g.q.view_mut())
                    } else {
                        a.clone()
                    };
                    let g_ppre = grad::project_vjp(&p_pre[i], c, &g_p);
                    let gu = grad::exp0_vjp(u.row(i).as_slice().expect("row-major"), c, &g_ppre);
                    g_u.row_mut(i).iter_mut().zip(gu).for_each(|(d, s)| *d = s);
                }
                g.p += &emb.t().dot(&g_u);
            }
            (Probe::Euclidean(pr), Cache::Euclidean { a, z }, Probe::Euclidean(g)) => {
                let g_e = Array2::from_shape_fn((adj.len(), pr.b1.ncols()), |(i, j)| adj[i][j]);
                let g_a = match (&pr.second, z, &mut g.second) {
                    (Some(s), Some(z), Some(gs)) => {
                        gs.b2 += &g_e.t().dot(z);
                        let g_z = g_e.dot(&s.b2);
                        let act = s.activation;
                        let mut g_a = g_z;
                        g_a.zip_mut_with(a, |gv, &av| *gv *= act.derivative(av));
                        g_a
                    }
                    _ => g_e,
                };
                g.b1 += &emb.t().dot(&g_a);
            }
            _ => unreachable!("gradient model must mirror the model"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Curvature;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn q_after_exp0_equals_exp0_of_q() {
        for c in [0.1, 1.0, 2.5] {
            let q = array![[0.9, -0.4, 0.2], [0.3, 1.1, 0.0], [-0.5, 0.2, 0.7]];
            let probe = PoincareProbe {
                p: Array2::eye(3),
                q: q.clone(),
                c: Curvature::new(c).unwrap(),
                use_q: true,
            };
            let u = [0.3, -0.2, 0.25];
            let got = probe.project(&u).unwrap();
            let want = raw::exp0(&raw::matvec(q.view(), &u), c);
            for (a, b) in got.coords().iter().zip(&want) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_input_or_zero_p_maps_to_origin() {
        let mut probe = PoincareProbe {
            p: array![[0.5, 0.1], [0.2, -0.3]],
            q: Array2::eye(2),
            c: Curvature::new(1.0).unwrap(),
            use_q: true,
        };
        assert_eq!(probe.project(&[0.0, 0.0]).unwrap().coords(), &[0.0, 0.0]);
        let h = [0.4, 0.7];
        let expect = raw::norm(&raw::matvec(probe.p.t(), &h)).tanh();
        assert_abs_diff_eq!(probe.project(&h).unwrap().norm(), expect, epsilon = 1e-12);
        probe.p.fill(0.0);
        assert_eq!(probe.project(&h).unwrap().coords(), &[0.0, 0.0]);
        assert!(probe.project(&[1.0]).is_err());
    }
}
