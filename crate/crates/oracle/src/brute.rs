use mmsb_core::Tensor3;
use nalgebra::{DMatrix, DVector};

/// `|X|^{-1} sum_x G(x, a) G(x, b) G(x, c)`, one scalar product at a time.
pub fn raw_threestar(g: &DMatrix<f64>, x: &[usize], a: &[usize], b: &[usize], c: &[usize]) -> Tensor3 {
    let mut t = Tensor3::zeros([a.len(), b.len(), c.len()]);
    for (ia, &na) in a.iter().enumerate() {
        for (ib, &nb) in b.iter().enumerate() {
            for (ic, &nc) in c.iter().enumerate() {
                let mut s = 0.0;
                for &nx in x {
                    s += g[(nx, na)] * g[(nx, nb)] * g[(nx, nc)];
                }
                t.set(ia, ib, ic, s / x.len() as f64);
            }
        }
    }
    t
}

/// The centered 3-star statistic over heads `y`, unwhitened, term by term:
/// `(a0+1)(a0+2) E[g_a g_b g_c] - a0(a0+1) (E[g_a g_b] m_c + E[g_a g_c] m_b + m_a E[g_b g_c]) + 2 a0^2 m_a m_b m_c`
/// with `E` and `m` averages over `y`.
pub fn centered_threestar(
    g: &DMatrix<f64>,
    y: &[usize],
    a: &[usize],
    b: &[usize],
    c: &[usize],
    alpha0: f64,
) -> Tensor3 {
    let h = y.len() as f64;
    let avg = |f: &dyn Fn(usize) -> f64| y.iter().map(|&u| f(u)).sum::<f64>() / h;
    let mut t = Tensor3::zeros([a.len(), b.len(), c.len()]);
    for (ia, &na) in a.iter().enumerate() {
        for (ib, &nb) in b.iter().enumerate() {
            for (ic, &nc) in c.iter().enumerate() {
                let abc = avg(&|u| g[(u, na)] * g[(u, nb)] * g[(u, nc)]);
                let ab = avg(&|u| g[(u, na)] * g[(u, nb)]);
                let ac = avg(&|u| g[(u, na)] * g[(u, nc)]);
                let bc = avg(&|u| g[(u, nb)] * g[(u, nc)]);
                let (ma, mb, mc) = (avg(&|u| g[(u, na)]), avg(&|u| g[(u, nb)]), avg(&|u| g[(u, nc)]));
                let v = (alpha0 + 1.0) * (alpha0 + 2.0) * abc
                    - alpha0 * (alpha0 + 1.0) * (ab * mc + ac * mb + ma * bc)
                    + 2.0 * alpha0 * alpha0 * ma * mb * mc;
                t.set(ia, ib, ic, v);
            }
        }
    }
    t
}

/// `|X|^{-1} sum_{x in X} G[x, A]^T`.
pub fn edge_mean(g: &DMatrix<f64>, x: &[usize], a: &[usize]) -> DVector<f64> {
    DVector::from_fn(a.len(), |j, _| x.iter().map(|&u| g[(u, a[j])]).sum::<f64>() / x.len() as f64)
}

/// `sqrt(alpha0 + 1) G[X, A] - (sqrt(alpha0 + 1) - 1) 1 mu^T`, entry by entry.
pub fn modified_adjacency(g: &DMatrix<f64>, x: &[usize], a: &[usize], alpha0: f64) -> DMatrix<f64> {
    let mu = edge_mean(g, x, a);
    let c = (alpha0 + 1.0).sqrt();
    DMatrix::from_fn(x.len(), a.len(), |i, j| c * g[(x[i], a[j])] - (c - 1.0) * mu[j])
}

/// `T(M1, M2, M3)[p, q, r] = sum_{a,b,c} T[a, b, c] M1[a, p] M2[b, q] M3[c, r]`.
pub fn multilinear(t: &Tensor3, m1: &DMatrix<f64>, m2: &DMatrix<f64>, m3: &DMatrix<f64>) -> Tensor3 {
    let [d1, d2, d3] = t.dims();
    let mut out = Tensor3::zeros([m1.ncols(), m2.ncols(), m3.ncols()]);
    for p in 0..m1.ncols() {
        for q in 0..m2.ncols() {
            for r in 0..m3.ncols() {
                let mut s = 0.0;
                for a in 0..d1 {
                    for b in 0..d2 {
                        for c in 0..d3 {
                            s += t.get(a, b, c) * m1[(a, p)] * m2[(b, q)] * m3[(c, r)];
                        }
                    }
                }
                out.set(p, q, r, s);
            }
        }
    }
    out
}

/// `T(I, v, v)`
pub fn ivv(t: &Tensor3, v: &DVector<f64>) -> DVector<f64> {
    let [d1, d2, d3] = t.dims();
    DVector::from_fn(d1, |p, _| {
        let mut s = 0.0;
        for q in 0..d2 {
            for r in 0..d3 {
                s += t.get(p, q, r) * v[q] * v[r];
            }
        }
        s
    })
}

/// `T(v, v, v)`
pub fn vvv(t: &Tensor3, v: &DVector<f64>) -> f64 {
    ivv(t, v).dot(v)
}

/// All singular values, largest first.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}
