//! Packing of `(W, A)` into the nonnegative split vector
//! `x = [W₊ | W₋ | A₊ | A₋]` used to turn ℓ1 penalties into smooth objectives
//! over the orthant.

use crate::mat::Mat;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Split {
    pub d: usize,
    /// Stacked lag rows; zero when only `W` is being optimized.
    pub pd: usize,
    /// Freeze the diagonal of `W` at zero: self-loops are structurally
    /// impossible and a free diagonal creates a degenerate loss minimum.
    pub pin_w_diag: bool,
}

impl Split {
    pub fn new(d: usize, pd: usize) -> Self {
        Split {
            d,
            pd,
            pin_w_diag: true,
        }
    }

    pub fn w_len(&self) -> usize {
        self.d * self.d
    }

    pub fn a_len(&self) -> usize {
        self.pd * self.d
    }

    pub fn len(&self) -> usize {
        2 * (self.w_len() + self.a_len())
    }

    pub fn pack<T: Scalar>(&self, w: &Mat<T>, a: Option<&Mat<T>>) -> Vec<T> {
        let mut x = Vec::with_capacity(self.len());
        x.extend(w.as_slice().iter().map(|&v| v.max(T::zero())));
        x.extend(w.as_slice().iter().map(|&v| (-v).max(T::zero())));
        if let Some(a) = a {
            x.extend(a.as_slice().iter().map(|&v| v.max(T::zero())));
            x.extend(a.as_slice().iter().map(|&v| (-v).max(T::zero())));
        }
        if self.pin_w_diag {
            let wl = self.w_len();
            for i in 0..self.d {
                x[i * self.d + i] = T::zero();
                x[wl + i * self.d + i] = T::zero();
            }
        }
        x
    }

    pub fn unpack_w<T: Scalar>(&self, x: &[T]) -> Mat<T> {
        let wl = self.w_len();
        let mut w = Mat::zeros(self.d, self.d);
        for (i, v) in w.as_mut_slice().iter_mut().enumerate() {
            *v = x[i] - x[wl + i];
        }
        w
    }

    pub fn unpack_a<T: Scalar>(&self, x: &[T]) -> Mat<T> {
        let wl = self.w_len();
        let al = self.a_len();
        let mut a = Mat::zeros(self.pd, self.d);
        for (i, v) in a.as_mut_slice().iter_mut().enumerate() {
            *v = x[2 * wl + i] - x[2 * wl + al + i];
        }
        a
    }

    /// Sum of split entries, i.e. the ℓ1 norms of the packed matrices on the
    /// feasible set, weighted per block.
    pub fn penalty<T: Scalar>(&self, x: &[T], lambda_w: T, lambda_a: T) -> T {
        let wl = self.w_len();
        let w_sum: T = x[..2 * wl].iter().copied().sum();
        let a_sum: T = x[2 * wl..].iter().copied().sum();
        lambda_w * w_sum + lambda_a * a_sum
    }

    /// Writes `[Gw + λw | -Gw + λw | Ga + λa | -Ga + λa]` into `grad`.
    ///
    /// With `pin_w_diag` the diagonal coordinates report a zero gradient, so
    /// the minimizer never moves them off their zero start: the solve runs on
    /// the self-loop-free subspace.
    pub fn write_grad<T: Scalar>(
        &self,
        gw: &Mat<T>,
        ga: Option<&Mat<T>>,
        lambda_w: T,
        lambda_a: T,
        grad: &mut [T],
    ) {
        let wl = self.w_len();
        for (i, &g) in gw.as_slice().iter().enumerate() {
            grad[i] = g + lambda_w;
            grad[wl + i] = -g + lambda_w;
        }
        if let Some(ga) = ga {
            let al = self.a_len();
            for (i, &g) in ga.as_slice().iter().enumerate() {
                grad[2 * wl + i] = g + lambda_a;
                grad[2 * wl + al + i] = -g + lambda_a;
            }
        }
        if self.pin_w_diag {
            for i in 0..self.d {
                grad[i * self.d + i] = T::zero();
                grad[wl + i * self.d + i] = T::zero();
            }
        }
    }
}
