//! One-dimensional convolution (cross-correlation) with symmetric zero
//! padding `(K-1)/2`, so a stride-1 layer preserves length.
//!
//! Two interchangeable kernels compute the same function: an im2col + GEMM
//! path for short kernels and strided layers, and an FFT path for long
//! stride-1 kernels where direct evaluation costs `O(K·L)` per channel pair.

use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use super::{fan_in_uniform, join, Module, Param};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Kernels at least this long use the FFT path under [`ConvAlgo::Auto`].
pub const SPECTRAL_MIN_KERNEL: usize = 15;


#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvAlgo {
    Auto,
    Direct,
    Spectral,
}

#[derive(Clone, Debug)]
pub struct Conv1d<T = f32> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    stride: usize,
    algo: ConvAlgo,
    cache: Option<ConvCache<T>>,
}

#[derive(Clone, Debug)]
enum ConvCache<T> {
    Direct(Tensor<T>),
    Spectral(SpectralCache<T>),
}

#[derive(Clone, Debug)]
struct SpectralCache<T> {
    batch: usize,
    len: usize,
    n_fft: usize,
    /// Per bin, `[batch × 2·c_in]` (real parts, then imaginary parts).
    x_spec: Vec<T>,
    /// Per bin, the `[2·c_out × 2·c_in]` real form of the kernel spectrum.
    w_block: Vec<T>,
}

impl<T: Scalar> Conv1d<T> {
    pub fn new<R: Rng + ?Sized>(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let weight = fan_in_uniform(&[c_out, c_in, kernel], c_in * kernel, rng);
        Self::from_parts(weight, Tensor::zeros(&[c_out]), stride)
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>, stride: usize) -> Result<Self> {
        if weight.rank() != 3 {
            return Err(Error::dim("conv1d", "weight rank", 3, weight.rank()));
        }
        let k = weight.dim(2);
        if k.is_multiple_of(2) {
            return Err(Error::Config(format!("conv1d kernel size must be odd, got {k}")));
        }
        if stride == 0 {
            return Err(Error::Config("conv1d stride must be at least 1".into()));
        }
        bias.expect_shape("conv1d bias", &[weight.dim(0)])?;
        Ok(Self {
            weight: Param::new(weight),
            bias: Param::new(bias),
            stride,
            algo: ConvAlgo::Auto,
            cache: None,
        })
    }

    pub fn with_algo(mut self, algo: ConvAlgo) -> Self {
        self.algo = algo;
        self
    }

    pub fn kernel_size(&self) -> usize {
        self.weight.value.dim(2)
    }

    pub fn in_channels(&self) -> usize {
        self.weight.value.dim(1)
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.dim(0)
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn out_len(&self, len: usize) -> usize {
        (len - 1) / self.stride + 1
    }

    fn uses_spectral(&self) -> bool {
        match self.algo {
            ConvAlgo::Direct => false,
            ConvAlgo::Spectral => self.stride == 1,
            ConvAlgo::Auto => self.stride == 1 && self.kernel_size() >= SPECTRAL_MIN_KERNEL,
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(usize, usize)> {
        if x.rank() != 3 {
            return Err(Error::dim("conv1d", "input rank", 3, x.rank()));
        }
        if x.dim(1) != self.in_channels() {
            return Err(Error::dim("conv1d", "input channels", self.in_channels(), x.dim(1)));
        }
        if x.dim(2) == 0 {
            return Err(Error::dim("conv1d", "input length", 1, 0));
        }
        Ok((x.dim(0), x.dim(2)))
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (y, cache) = self.compute(x, true)?;
        self.cache = cache;
        Ok(y)
    }

    /// Forward pass without caching, for inference on shared parameters.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.compute(x, false)?.0)
    }

    fn compute(&self, x: &Tensor<T>, keep: bool) -> Result<(Tensor<T>, Option<ConvCache<T>>)> {
        self.check_input(x)?;
        if self.uses_spectral() {
            let (y, cache) = spectral_forward(x, &self.weight.value, &self.bias.value);
            Ok((y, keep.then_some(ConvCache::Spectral(cache))))
        } else {
            let y = direct_forward(x, &self.weight.value, &self.bias.value, self.stride);
            Ok((y, keep.then(|| ConvCache::Direct(x.clone()))))
        }
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    pub fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::Usage("conv1d backward called without a cached forward pass".into()))?;
        let (co, ci, k) = (self.out_channels(), self.in_channels(), self.kernel_size());
        match cache {
            ConvCache::Direct(x) => {
                let (n, l) = (x.dim(0), x.dim(2));
                gy.expect_shape("conv1d backward", &[n, co, self.out_len(l)])?;
                let gx = direct_backward(
                    &x,
                    &self.weight.value,
                    gy,
                    self.stride,
                    &mut self.weight.grad,
                    &mut self.bias.grad,
                );
                Ok(gx)
            }
            ConvCache::Spectral(c) => {
                gy.expect_shape("conv1d backward", &[c.batch, co, c.len])?;
                debug_assert_eq!(c.w_block.len(), 4 * co * ci * (c.n_fft / 2 + 1));
                let gx = spectral_backward(&c, gy, ci, k, &mut self.weight.grad, &mut self.bias.grad);
                Ok(gx)
            }
        }
    }
}

impl<T: Scalar> Module<T> for Conv1d<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        f(&join(prefix, "weight"), &self.weight);
        f(&join(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

/// Single-example convenience form: `input [C_in, L]`, `weight [C_out, C_in, K]`.
pub fn conv1d_forward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    if input.rank() != 2 {
        return Err(Error::dim("conv1d", "input rank", 2, input.rank()));
    }
    let conv = Conv1d::from_parts(weight.clone(), bias.clone(), 1)?;
    conv.infer(&input.clone().unsqueeze0())?.squeeze0()
}

// ---------------------------------------------------------------------------
// im2col + GEMM

/// Valid output range `[lo, hi)` for kernel tap `kk` so the source index
/// `t·stride + kk − pad` lies inside `[0, len)`.
fn tap_range(kk: usize, pad: usize, stride: usize, len: usize, lout: usize) -> (usize, usize) {
    let lo = if kk >= pad { 0 } else { (pad - kk).div_ceil(stride) };
    // need t*stride + kk - pad <= len - 1
    let hi = if kk > pad + len - 1 {
        0
    } else {
        ((pad + len - 1 - kk) / stride + 1).min(lout)
    };
    (lo.min(hi), hi)
}

fn im2col<T: Scalar>(x: &[T], ci: usize, len: usize, k: usize, stride: usize, cols: &mut [T]) {
    let pad = k / 2;
    let lout = (len - 1) / stride + 1;
    for i in 0..ci {
        let src = &x[i * len..(i + 1) * len];
        for kk in 0..k {
            let row = &mut cols[(i * k + kk) * lout..(i * k + kk + 1) * lout];
            let (lo, hi) = tap_range(kk, pad, stride, len, lout);
            // only the padding edges need clearing; the middle is overwritten
            row[..lo].fill(T::zero());
            row[hi..].fill(T::zero());
            if stride == 1 {
                if hi > lo {
                    let s0 = lo + kk - pad;
                    row[lo..hi].copy_from_slice(&src[s0..s0 + (hi - lo)]);
                }
            } else {
                for t in lo..hi {
                    row[t] = src[t * stride + kk - pad];
                }
            }
        }
    }
}

fn col2im<T: Scalar>(cols: &[T], ci: usize, len: usize, k: usize, stride: usize, gx: &mut [T]) {
    let pad = k / 2;
    let lout = (len - 1) / stride + 1;
    for i in 0..ci {
        let dst = &mut gx[i * len..(i + 1) * len];
        for kk in 0..k {
            let row = &cols[(i * k + kk) * lout..(i * k + kk + 1) * lout];
            let (lo, hi) = tap_range(kk, pad, stride, len, lout);
            for t in lo..hi {
                dst[t * stride + kk - pad] += row[t];
            }
        }
    }
}

fn direct_forward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>, stride: usize) -> Tensor<T> {
    let (n, ci, len) = (x.dim(0), x.dim(1), x.dim(2));
    let (co, k) = (w.dim(0), w.dim(2));
    let lout = (len - 1) / stride + 1;
    let mut y = Tensor::zeros(&[n, co, lout]);
    y.data_mut()
        .par_chunks_mut(co * lout)
        .enumerate()
        .for_each(|(s, out)| {
            let mut cols = vec![T::zero(); ci * k * lout];
            im2col(x.item(s), ci, len, k, stride, &mut cols);
            for o in 0..co {
                out[o * lout..(o + 1) * lout].fill(b.data()[o]);
            }
            T::matmul(co, ci * k, lout, w.data(), false, &cols, false, out, true);
        });
    y
}

fn direct_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    gy: &Tensor<T>,
    stride: usize,
    gw: &mut Tensor<T>,
    gb: &mut Tensor<T>,
) -> Tensor<T> {
    let (n, ci, len) = (x.dim(0), x.dim(1), x.dim(2));
    let (co, k) = (w.dim(0), w.dim(2));
    let lout = (len - 1) / stride + 1;
    let per_sample: Vec<(Vec<T>, Vec<T>)> = (0..n)
        .into_par_iter()
        .map(|s| {
            let g = gy.item(s);
            let mut cols = vec![T::zero(); ci * k * lout];
            im2col(x.item(s), ci, len, k, stride, &mut cols);
            let mut gw_s = vec![T::zero(); co * ci * k];
            // gW = gy · colsᵀ
            T::matmul(co, lout, ci * k, g, false, &cols, true, &mut gw_s, false);
            // gcols = Wᵀ · gy
            T::matmul(ci * k, co, lout, w.data(), true, g, false, &mut cols, false);
            let mut gx = vec![T::zero(); ci * len];
            col2im(&cols, ci, len, k, stride, &mut gx);
            (gx, gw_s)
        })
        .collect();
    let mut gx = Vec::with_capacity(n * ci * len);
    for (gx_s, gw_s) in &per_sample {
        gx.extend_from_slice(gx_s);
        for (a, &b) in gw.data_mut().iter_mut().zip(gw_s) {
            *a += b;
        }
    }
    for s in 0..n {
        let g = gy.item(s);
        for o in 0..co {
            gb.data_mut()[o] += g[o * lout..(o + 1) * lout].iter().copied().sum::<T>();
        }
    }
    Tensor::from_vec(&[n, ci, len], gx).expect("shape computed above")
}

// ---------------------------------------------------------------------------
// FFT path (stride 1 only)

/// Smallest even 5-smooth length `≥ len + pad`; enough to avoid circular
/// aliasing for the forward pass and both gradients. Odd lengths are skipped
/// because the real transform is much slower on them.
pub(crate) fn spectral_len(len: usize, kernel: usize) -> usize {
    let need = len + kernel / 2;
    (need..)
        .find(|&m| {
            let mut r = m;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            r == 1 && m.is_multiple_of(2)
        })
        .expect("5-smooth numbers are unbounded")
}

struct Plans<T: Scalar> {
    n: usize,
    bins: usize,
    fwd: Arc<dyn RealToComplex<T>>,
    inv: Arc<dyn ComplexToReal<T>>,
}

fn czero<T: Scalar>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

impl<T: Scalar> Plans<T> {
    fn new(n: usize) -> Self {
        let mut planner = RealFftPlanner::<T>::new();
        Self {
            n,
            bins: n / 2 + 1,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    /// Transforms the `outer × inner` rows of `rows` (each `len` samples,
    /// placed into a zeroed plan-length buffer by `place`) into bin-major
    /// blocks: for bin `f`, an `outer × 2·inner` matrix whose row `a` holds
    /// the real parts of rows `(a, 0..inner)` followed by their imaginary parts.
    fn block_spectra(
        &self,
        rows: &[T],
        outer: usize,
        inner: usize,
        len: usize,
        place: impl Fn(&[T], &mut [T]) + Sync,
    ) -> Vec<T> {
        let (bins, width) = (self.bins, 2 * inner);
        // One `[bins × width]` tile per outer index, then a plain row copy per bin.
        let tiles: Vec<Vec<T>> = (0..outer)
            .into_par_iter()
            .map_init(
                || (vec![T::zero(); self.n], vec![czero(); bins], vec![czero(); self.fwd.get_scratch_len()]),
                |(buf, spec, scratch), a| {
                    let mut tile = vec![T::zero(); bins * width];
                    for j in 0..inner {
                        let r = a * inner + j;
                        buf.fill(T::zero());
                        place(&rows[r * len..(r + 1) * len], buf);
                        self.fwd
                            .process_with_scratch(buf, spec, scratch)
                            .expect("buffer lengths match plan");
                        for (f, z) in spec.iter().enumerate() {
                            tile[f * width + j] = z.re;
                            tile[f * width + inner + j] = z.im;
                        }
                    }
                    tile
                },
            )
            .collect();
        let mut out = vec![T::zero(); bins * outer * width];
        out.par_chunks_mut(outer * width).enumerate().for_each(|(f, block)| {
            for (dst, tile) in block.chunks_mut(width).zip(&tiles) {
                dst.copy_from_slice(&tile[f * width..(f + 1) * width]);
            }
        });
        out
    }

    /// Inverse transforms every entry `(a, 0..inner)` of the bin-major
    /// `blocks`, handing each time-domain row (plan length, unscaled) to `emit`.
    fn inverse_rows(&self, blocks: &[T], outer: usize, inner: usize, a: usize, mut emit: impl FnMut(usize, &[T])) {
        let (bins, width) = (self.bins, 2 * inner);
        let mut tile = vec![T::zero(); bins * width];
        for (f, dst) in tile.chunks_mut(width).enumerate() {
            let at = (f * outer + a) * width;
            dst.copy_from_slice(&blocks[at..at + width]);
        }
        let mut spec = vec![czero(); bins];
        let mut buf = vec![T::zero(); self.n];
        let mut work = vec![czero(); self.inv.get_scratch_len()];
        for j in 0..inner {
            for (f, z) in spec.iter_mut().enumerate() {
                *z = Complex::new(tile[f * width + j], tile[f * width + inner + j]);
            }
            spec[0].im = T::zero();
            spec[bins - 1].im = T::zero();
            self.inv
                .process_with_scratch(&mut spec, &mut buf, &mut work)
                .expect("buffer lengths match plan");
            emit(j, &buf);
        }
    }
}

/// Per-bin product `c_f = a_f · b_f` (`b_f` transposed when `trans_b`), or
/// `a_fᵀ · b_f` when `trans_a`.
#[allow(clippy::too_many_arguments)]
fn per_bin_matmul<T: Scalar>(
    bins: usize,
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    trans_a: bool,
    b: &[T],
    trans_b: bool,
) -> Vec<T> {
    let mut c = vec![T::zero(); bins * m * n];
    c.par_chunks_mut(m * n).enumerate().for_each(|(f, cf)| {
        let af = &a[f * m * k..(f + 1) * m * k];
        let bf = &b[f * k * n..(f + 1) * k * n];
        T::matmul(m, k, n, af, trans_a, bf, trans_b, cf, false);
    });
    c
}

fn spectral_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> (Tensor<T>, SpectralCache<T>) {
    let (n, ci, len) = (x.dim(0), x.dim(1), x.dim(2));
    let (co, k) = (w.dim(0), w.dim(2));
    let pad = k / 2;
    let plans = Plans::<T>::new(spectral_len(len, k));
    let (nf, bins) = (plans.n, plans.bins);

    // Reversed, wrapped kernel so circular convolution yields cross-correlation.
    let w_spec = plans.block_spectra(w.data(), co, ci, k, |taps, buf| {
        for (kk, &v) in taps.iter().enumerate() {
            buf[(pad as isize - kk as isize).rem_euclid(nf as isize) as usize] = v;
        }
    });
    // Complex product as a real matrix, stored transposed:
    // Y = [Xre Xim]·Bᵀ with rows of B being [Wre −Wim] then [Wim Wre].
    let (wi, wo) = (2 * ci, 2 * co);
    let mut w_block = vec![T::zero(); bins * wo * wi];
    w_block.par_chunks_mut(wo * wi).enumerate().for_each(|(f, blk)| {
        let src = &w_spec[f * co * wi..(f + 1) * co * wi];
        let (top, bottom) = blk.split_at_mut(co * wi);
        for o in 0..co {
            let (re, im) = src[o * wi..(o + 1) * wi].split_at(ci);
            let (t_re, t_im) = top[o * wi..(o + 1) * wi].split_at_mut(ci);
            let (b_im, b_re) = bottom[o * wi..(o + 1) * wi].split_at_mut(ci);
            t_re.copy_from_slice(re);
            b_re.copy_from_slice(re);
            b_im.copy_from_slice(im);
            for (d, &v) in t_im.iter_mut().zip(im) {
                *d = -v;
            }
        }
    });
    drop(w_spec);
    let x_spec = plans.block_spectra(x.data(), n, ci, len, |row, buf| buf[..row.len()].copy_from_slice(row));
    let y_spec = per_bin_matmul(bins, n, wi, wo, &x_spec, false, &w_block, true);

    let scale = T::one() / T::of(nf as f64);
    let mut y = Tensor::zeros(&[n, co, len]);
    y.data_mut()
        .par_chunks_mut(co * len)
        .enumerate()
        .for_each(|(s, out)| {
            plans.inverse_rows(&y_spec, n, co, s, |o, buf| {
                let bo = b.data()[o];
                for (dst, &v) in out[o * len..(o + 1) * len].iter_mut().zip(&buf[..len]) {
                    *dst = v * scale + bo;
                }
            });
        });

    let cache = SpectralCache {
        batch: n,
        len,
        n_fft: nf,
        x_spec,
        w_block,
    };
    (y, cache)
}

fn spectral_backward<T: Scalar>(
    c: &SpectralCache<T>,
    gy: &Tensor<T>,
    ci: usize,
    k: usize,
    gw: &mut Tensor<T>,
    gb: &mut Tensor<T>,
) -> Tensor<T> {
    let (n, len, nf) = (c.batch, c.len, c.n_fft);
    let co = gy.dim(1);
    let pad = k / 2;
    let plans = Plans::<T>::new(nf);
    let bins = plans.bins;
    let scale = T::one() / T::of(nf as f64);
    let (wi, wo) = (2 * ci, 2 * co);

    let g_spec = plans.block_spectra(gy.data(), n, co, len, |row, buf| buf[..row.len()].copy_from_slice(row));

    // Input gradient: the untransposed real block multiplies by conj(W).
    let gx_spec = per_bin_matmul(bins, n, wo, wi, &g_spec, false, &c.w_block, false);
    let mut gx = Tensor::zeros(&[n, ci, len]);
    gx.data_mut()
        .par_chunks_mut(ci * len)
        .enumerate()
        .for_each(|(s, out)| {
            plans.inverse_rows(&gx_spec, n, ci, s, |i, buf| {
                for (dst, &v) in out[i * len..(i + 1) * len].iter_mut().zip(&buf[..len]) {
                    *dst = v * scale;
                }
            });
        });
    drop(gx_spec);

    // Weight gradient: Σ_s conj(G)·X, assembled from the blocks of [Gre Gim]ᵀ·[Xre Xim].
    let p = per_bin_matmul(bins, wo, n, wi, &g_spec, true, &c.x_spec, false);
    let mut gw_spec = vec![T::zero(); bins * co * wi];
    gw_spec.par_chunks_mut(co * wi).enumerate().for_each(|(f, blk)| {
        let pf = &p[f * wo * wi..(f + 1) * wo * wi];
        for o in 0..co {
            for i in 0..ci {
                blk[o * wi + i] = pf[o * wi + i] + pf[(co + o) * wi + ci + i];
                blk[o * wi + ci + i] = pf[o * wi + ci + i] - pf[(co + o) * wi + i];
            }
        }
    });
    drop(p);
    let tap = |kk: usize| (kk as isize - pad as isize).rem_euclid(nf as isize) as usize;
    gw.data_mut()
        .par_chunks_mut(ci * k)
        .enumerate()
        .for_each(|(o, dst)| {
            plans.inverse_rows(&gw_spec, co, ci, o, |i, buf| {
                for (kk, d) in dst[i * k..(i + 1) * k].iter_mut().enumerate() {
                    *d += buf[tap(kk)] * scale;
                }
            });
        });
    for s in 0..n {
        let g = gy.item(s);
        for o in 0..co {
            gb.data_mut()[o] += g[o * len..(o + 1) * len].iter().copied().sum::<T>();
        }
    }
    gx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Straight-from-the-definition reference.
    fn naive(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, stride: usize) -> Tensor<f64> {
        let (n, ci, len) = (x.dim(0), x.dim(1), x.dim(2));
        let (co, k) = (w.dim(0), w.dim(2));
        let pad = k as isize / 2;
        let lout = (len - 1) / stride + 1;
        let mut y = Tensor::zeros(&[n, co, lout]);
        for s in 0..n {
            for o in 0..co {
                for t in 0..lout {
                    let mut acc = b.data()[o];
                    for i in 0..ci {
                        for kk in 0..k {
                            let src = (t * stride) as isize + kk as isize - pad;
                            if src >= 0 && (src as usize) < len {
                                acc += w.data()[(o * ci + i) * k + kk] * x.data()[(s * ci + i) * len + src as usize];
                            }
                        }
                    }
                    y.data_mut()[(s * co + o) * lout + t] = acc;
                }
            }
        }
        y
    }

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let x = Tensor::<f32>::from_fn(&[1, 7], |i| i as f32 * 0.3 - 1.0);
        let mut w = Tensor::zeros(&[1, 1, 5]);
        w.data_mut()[2] = 1.0;
        let y = conv1d_forward(&x, &w, &Tensor::zeros(&[1])).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn ones_kernel_on_constant_sums_neighbours() {
        let c = 2.5f64;
        let x = Tensor::full(&[1, 6], c);
        let w = Tensor::full(&[1, 1, 3], 1.0);
        let y = conv1d_forward(&x, &w, &Tensor::zeros(&[1])).unwrap();
        let want = [2.0 * c, 3.0 * c, 3.0 * c, 3.0 * c, 3.0 * c, 2.0 * c];
        for (a, b) in y.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn both_kernels_match_naive_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(ci, co, len, k, stride) in &[
            (2, 3, 9, 3, 1),
            (2, 3, 9, 3, 2),
            (3, 2, 10, 5, 2),
            (1, 2, 7, 9, 1),
            (2, 2, 16, 21, 1),
            (3, 4, 5, 11, 1),
        ] {
            let x = random(&[2, ci, len], &mut rng);
            let w = random(&[co, ci, k], &mut rng);
            let b = random(&[co], &mut rng);
            let want = naive(&x, &w, &b, stride);
            for algo in [ConvAlgo::Direct, ConvAlgo::Spectral] {
                let conv = Conv1d::from_parts(w.clone(), b.clone(), stride).unwrap().with_algo(algo);
                let got = conv.infer(&x).unwrap();
                assert_eq!(got.shape(), want.shape());
                for (a, b) in got.data().iter().zip(want.data()) {
                    assert!((a - b).abs() < 1e-10, "{algo:?} k={k} stride={stride}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn backward_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random(&[3, 2, 12], &mut rng);
        let w = random(&[3, 2, 7], &mut rng);
        let b = random(&[3], &mut rng);
        let gy = random(&[3, 3, 12], &mut rng);
        let mut grads = Vec::new();
        for algo in [ConvAlgo::Direct, ConvAlgo::Spectral] {
            let mut conv = Conv1d::from_parts(w.clone(), b.clone(), 1).unwrap().with_algo(algo);
            conv.forward(&x).unwrap();
            let gx = conv.backward(&gy).unwrap();
            grads.push((gx, conv.weight.grad.clone(), conv.bias.grad.clone()));
        }
        let (a, b) = (&grads[0], &grads[1]);
        for (u, v) in [(&a.0, &b.0), (&a.1, &b.1), (&a.2, &b.2)] {
            for (p, q) in u.data().iter().zip(v.data()) {
                assert!((p - q).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn multi_scale_kernels_preserve_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for k in [51, 101, 201] {
            for len in [1, 50, 512] {
                let conv = Conv1d::<f32>::new(2, 2, k, 1, &mut rng).unwrap();
                let y = conv.infer(&Tensor::zeros(&[1, 2, len])).unwrap();
                assert_eq!(y.shape(), &[1, 2, len]);
            }
        }
    }

    #[test]
    fn identity_kernel_backward_and_zero_grad() {
        let mut w = Tensor::<f64>::zeros(&[1, 1, 3]);
        w.data_mut()[1] = 1.0;
        let mut conv = Conv1d::from_parts(w, Tensor::zeros(&[1]), 1).unwrap();
        let x = Tensor::from_fn(&[1, 1, 5], |i| i as f64);
        conv.forward(&x).unwrap();
        let g = Tensor::from_fn(&[1, 1, 5], |i| 1.0 - i as f64);
        assert_eq!(conv.backward(&g).unwrap(), g);

        conv.zero_grad();
        conv.forward(&x).unwrap();
        let gx = conv.backward(&Tensor::zeros(&[1, 1, 5])).unwrap();
        assert!(gx.data().iter().all(|&v| v == 0.0));
        assert!(conv.weight.grad.data().iter().all(|&v| v == 0.0));
        assert!(conv.bias.grad.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn errors_are_structured() {
        let w = Tensor::<f32>::zeros(&[1, 2, 4]);
        assert!(matches!(Conv1d::from_parts(w, Tensor::zeros(&[1]), 1), Err(Error::Config(_))));
        let mut conv = Conv1d::<f32>::from_parts(Tensor::zeros(&[1, 2, 3]), Tensor::zeros(&[1]), 1).unwrap();
        match conv.infer(&Tensor::zeros(&[1, 3, 8])) {
            Err(Error::Dimension { axis, .. }) => assert_eq!(axis, "input channels"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(conv.backward(&Tensor::zeros(&[1, 1, 8])), Err(Error::Usage(_))));
    }
}
