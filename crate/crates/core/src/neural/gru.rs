//! Gated recurrent cell: `n = tanh(W_n x + b_n + r * (U_n h))`, `h' = (1 - z) n + z h`.

use super::linalg::sigmoid;
#[cfg(test)]
use super::linalg::Matrix;
use super::params::GruParams;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub(crate) struct GruCache<T> {
    pub x: Vec<T>,
    pub h: Vec<T>,
    pub z: Vec<T>,
    pub r: Vec<T>,
    pub n: Vec<T>,
    /// `U_n h`, needed for the reset-gate gradient.
    pub uh_n: Vec<T>,
}

pub(crate) fn step<T: Scalar>(p: &GruParams<T>, x: &[T], h: &[T]) -> (Vec<T>, GruCache<T>) {
    let hd = p.hidden();
    let mut gx = p.b.clone();
    p.w.matvec_add(x, &mut gx);
    let gh = p.u.matvec(h);
    let mut z = vec![T::zero(); hd];
    let mut r = vec![T::zero(); hd];
    let mut n = vec![T::zero(); hd];
    let mut out = vec![T::zero(); hd];
    for i in 0..hd {
        z[i] = sigmoid(gx[i] + gh[i]);
        r[i] = sigmoid(gx[hd + i] + gh[hd + i]);
        n[i] = (gx[2 * hd + i] + r[i] * gh[2 * hd + i]).tanh();
        out[i] = (T::one() - z[i]) * n[i] + z[i] * h[i];
    }
    let cache = GruCache {
        x: x.to_vec(),
        h: h.to_vec(),
        z,
        r,
        n,
        uh_n: gh[2 * hd..].to_vec(),
    };
    (out, cache)
}

/// Accumulates parameter gradients into `g`, returns `(dx, dh)`.
pub(crate) fn backward<T: Scalar>(
    p: &GruParams<T>,
    g: &mut GruParams<T>,
    c: &GruCache<T>,
    dout: &[T],
) -> (Vec<T>, Vec<T>) {
    let hd = p.hidden();
    let one = T::one();
    let mut dgx = vec![T::zero(); 3 * hd];
    let mut dgh = vec![T::zero(); 3 * hd];
    let mut dh = vec![T::zero(); hd];
    for i in 0..hd {
        let (z, r, n) = (c.z[i], c.r[i], c.n[i]);
        let dn = dout[i] * (one - z);
        let dz = dout[i] * (c.h[i] - n);
        dh[i] = dout[i] * z;
        let dan = dn * (one - n * n);
        let dr = dan * c.uh_n[i];
        let daz = dz * z * (one - z);
        let dar = dr * r * (one - r);
        dgx[i] = daz;
        dgx[hd + i] = dar;
        dgx[2 * hd + i] = dan;
        dgh[i] = daz;
        dgh[hd + i] = dar;
        dgh[2 * hd + i] = dan * r;
    }
    g.w.outer_add(&dgx, &c.x);
    for (b, &d) in g.b.iter_mut().zip(&dgx) {
        *b += d;
    }
    g.u.outer_add(&dgh, &c.h);
    let mut dx = vec![T::zero(); c.x.len()];
    p.w.matvec_t_add(&dgx, &mut dx);
    p.u.matvec_t_add(&dgh, &mut dh);
    (dx, dh)
}

/// Runs the cell over `xs` from a zero state, optionally right to left. Outputs are
/// indexed by input position in both directions.
pub(crate) fn run<T: Scalar>(
    p: &GruParams<T>,
    xs: &[&[T]],
    reverse: bool,
) -> (Vec<Vec<T>>, Vec<GruCache<T>>) {
    let len = xs.len();
    let mut h = vec![T::zero(); p.hidden()];
    let mut outs = vec![Vec::new(); len];
    let mut caches: Vec<Option<GruCache<T>>> = vec![None; len];
    for k in 0..len {
        let i = if reverse { len - 1 - k } else { k };
        let (nh, c) = step(p, xs[i], &h);
        outs[i] = nh.clone();
        caches[i] = Some(c);
        h = nh;
    }
    (outs, caches.into_iter().map(|c| c.expect("every position visited")).collect())
}

/// Backward through [`run`]. `douts[i]` is the loss gradient at output `i`; returns the
/// input gradients by position.
pub(crate) fn run_backward<T: Scalar>(
    p: &GruParams<T>,
    g: &mut GruParams<T>,
    caches: &[GruCache<T>],
    douts: &[Vec<T>],
    reverse: bool,
) -> Vec<Vec<T>> {
    let len = caches.len();
    let mut dxs = vec![Vec::new(); len];
    let mut carry = vec![T::zero(); p.hidden()];
    for k in (0..len).rev() {
        let i = if reverse { len - 1 - k } else { k };
        let mut d = douts[i].clone();
        for (a, &b) in d.iter_mut().zip(&carry) {
            *a += b;
        }
        let (dx, dh) = backward(p, g, &caches[i], &d);
        dxs[i] = dx;
        carry = dh;
    }
    dxs
}

#[cfg(test)]
pub(crate) fn zero_like<T: Scalar>(p: &GruParams<T>) -> GruParams<T> {
    GruParams {
        w: Matrix::zeros(p.w.rows, p.w.cols),
        u: Matrix::zeros(p.u.rows, p.u.cols),
        b: vec![T::zero(); p.b.len()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cell() -> GruParams<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        GruParams {
            w: Matrix::uniform(6, 3, 0.8, &mut rng),
            u: Matrix::uniform(6, 2, 0.8, &mut rng),
            b: super::super::linalg::uniform_vec(6, 0.8, &mut rng),
        }
    }

    #[test]
    fn reversed_input_reverses_backward_states() {
        let p = cell();
        let a = [0.3, -0.2, 0.9];
        let b = [-0.5, 0.4, 0.1];
        let (fwd, _) = run(&p, &[&a, &b], false);
        let (bwd, _) = run(&p, &[&b, &a], true);
        // right-to-left over (b, a) visits a then b, like left-to-right over (a, b)
        assert_eq!(fwd[0], bwd[1]);
        assert_eq!(fwd[1], bwd[0]);
    }

    #[test]
    fn step_gradient_matches_finite_differences() {
        let p = cell();
        let x = [0.3, -0.2, 0.9];
        let h = [0.1, -0.4];
        let loss = |p: &GruParams<f64>, x: &[f64], h: &[f64]| {
            let (o, _) = step(p, x, h);
            o[0] * 0.7 - o[1] * 1.3
        };
        let (_, c) = step(&p, &x, &h);
        let mut g = zero_like(&p);
        let (dx, dh) = backward(&p, &mut g, &c, &[0.7, -1.3]);
        let eps = 1e-6;
        for i in 0..3 {
            let mut xp = x;
            xp[i] += eps;
            let mut xm = x;
            xm[i] -= eps;
            let fd = (loss(&p, &xp, &h) - loss(&p, &xm, &h)) / (2.0 * eps);
            assert!((fd - dx[i]).abs() < 1e-8);
        }
        for i in 0..2 {
            let mut hp = h;
            hp[i] += eps;
            let mut hm = h;
            hm[i] -= eps;
            let fd = (loss(&p, &x, &hp) - loss(&p, &x, &hm)) / (2.0 * eps);
            assert!((fd - dh[i]).abs() < 1e-8);
        }
        for k in 0..p.u.data.len() {
            let mut pp = p.clone();
            pp.u.data[k] += eps;
            let mut pm = p.clone();
            pm.u.data[k] -= eps;
            let fd = (loss(&pp, &x, &h) - loss(&pm, &x, &h)) / (2.0 * eps);
            assert!((fd - g.u.data[k]).abs() < 1e-8);
        }
    }
}
