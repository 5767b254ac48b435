use super::{join, Module, Param};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub const GROUP_NORM_EPS: f64 = 1e-5;

/// Group normalization over `[B, C, L]` with a per-channel affine.
#[derive(Clone, Debug)]
pub struct GroupNorm<T = f32> {
    pub gain: Param<T>,
    pub shift: Param<T>,
    groups: usize,
    cache: Option<NormCache<T>>,
}

#[derive(Clone, Debug)]
struct NormCache<T> {
    normalized: Tensor<T>,
    inv_std: Vec<T>,
}

impl<T: Scalar> GroupNorm<T> {
    pub fn new(channels: usize, groups: usize) -> Result<Self> {
        Self::from_parts(groups, Tensor::full(&[channels], T::one()), Tensor::zeros(&[channels]))
    }

    pub fn from_parts(groups: usize, gain: Tensor<T>, shift: Tensor<T>) -> Result<Self> {
        let channels = gain.len();
        if groups == 0 || !channels.is_multiple_of(groups) {
            return Err(Error::Config(format!(
                "group norm: {channels} channels not divisible by {groups} groups"
            )));
        }
        shift.expect_shape("group norm shift", &[channels])?;
        Ok(Self {
            gain: Param::new(gain),
            shift: Param::new(shift),
            groups,
            cache: None,
        })
    }

    pub fn channels(&self) -> usize {
        self.gain.value.len()
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (y, cache) = self.compute(x)?;
        self.cache = Some(cache);
        Ok(y)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.compute(x)?.0)
    }

    fn compute(&self, x: &Tensor<T>) -> Result<(Tensor<T>, NormCache<T>)> {
        if x.rank() != 3 {
            return Err(Error::dim("group norm", "input rank", 3, x.rank()));
        }
        let (n, c, l) = (x.dim(0), x.dim(1), x.dim(2));
        if c != self.channels() {
            return Err(Error::dim("group norm", "channels", self.channels(), c));
        }
        let cg = c / self.groups;
        let m = cg * l;
        let eps = T::of(GROUP_NORM_EPS);
        let mut normalized = Tensor::zeros(x.shape());
        let mut y = Tensor::zeros(x.shape());
        let mut inv_std = Vec::with_capacity(n * self.groups);
        let (gain, shift) = (self.gain.value.data(), self.shift.value.data());
        for s in 0..n {
            for g in 0..self.groups {
                let off = s * c * l + g * m;
                let xs = &x.data()[off..off + m];
                let mean = xs.iter().copied().sum::<T>() / T::of(m as f64);
                let var = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / T::of(m as f64);
                let is = T::one() / (var + eps).sqrt();
                inv_std.push(is);
                let hs = &mut normalized.data_mut()[off..off + m];
                for (h, &v) in hs.iter_mut().zip(xs) {
                    *h = (v - mean) * is;
                }
                let ys = &mut y.data_mut()[off..off + m];
                for (j, (yc, hc)) in ys.chunks_exact_mut(l).zip(hs.chunks_exact(l)).enumerate() {
                    let (a, b) = (gain[g * cg + j], shift[g * cg + j]);
                    for (o, &h) in yc.iter_mut().zip(hc) {
                        *o = h * a + b;
                    }
                }
            }
        }
        Ok((y, NormCache { normalized, inv_std }))
    }

    pub fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::Usage("group norm backward without forward".into()))?;
        gy.expect_shape("group norm backward", cache.normalized.shape())?;
        let (n, c, l) = (gy.dim(0), gy.dim(1), gy.dim(2));
        let cg = c / self.groups;
        let m = cg * l;
        let mf = T::of(m as f64);
        let mut gx = Tensor::zeros(gy.shape());
        let gain = self.gain.value.data();
        for s in 0..n {
            for g in 0..self.groups {
                let off = s * c * l + g * m;
                let h = &cache.normalized.data()[off..off + m];
                let gys = &gy.data()[off..off + m];
                let mut mean_gh = T::zero();
                let mut mean_ghh = T::zero();
                for (j, (gc, hc)) in gys.chunks_exact(l).zip(h.chunks_exact(l)).enumerate() {
                    let ch = g * cg + j;
                    let (mut sg, mut sgh) = (T::zero(), T::zero());
                    for (&gv, &hv) in gc.iter().zip(hc) {
                        sg += gv;
                        sgh += gv * hv;
                    }
                    self.gain.grad.data_mut()[ch] += sgh;
                    self.shift.grad.data_mut()[ch] += sg;
                    mean_gh += sg * gain[ch];
                    mean_ghh += sgh * gain[ch];
                }
                mean_gh = mean_gh / mf;
                mean_ghh = mean_ghh / mf;
                let is = cache.inv_std[s * self.groups + g];
                let out = &mut gx.data_mut()[off..off + m];
                for (j, ((oc, gc), hc)) in out.chunks_exact_mut(l).zip(gys.chunks_exact(l)).zip(h.chunks_exact(l)).enumerate() {
                    let a = gain[g * cg + j];
                    for ((o, &gv), &hv) in oc.iter_mut().zip(gc).zip(hc) {
                        *o = is * (gv * a - mean_gh - hv * mean_ghh);
                    }
                }
            }
        }
        Ok(gx)
    }
}

impl<T: Scalar> Module<T> for GroupNorm<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        f(&join(prefix, "gain"), &self.gain);
        f(&join(prefix, "shift"), &self.shift);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f(&join(prefix, "gain"), &mut self.gain);
        f(&join(prefix, "shift"), &mut self.shift);
    }
}

/// Single-example form over `[C, L]` with scalar gain and shift.
pub fn group_norm<T: Scalar>(input: &Tensor<T>, groups: usize, gain: T, shift: T) -> Result<Tensor<T>> {
    if input.rank() != 2 {
        return Err(Error::dim("group norm", "input rank", 2, input.rank()));
    }
    let c = input.dim(0);
    let gn = GroupNorm::from_parts(groups, Tensor::full(&[c], gain), Tensor::full(&[c], shift))?;
    gn.infer(&input.clone().unsqueeze0())?.squeeze0()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_normalizes_to_zero() {
        let x = Tensor::<f64>::full(&[4, 6], 3.0);
        let y = group_norm(&x, 2, 1.0, 0.0).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_values_map_to_unit_pair() {
        let x = Tensor::<f64>::from_vec(&[1, 2], vec![1.0, 3.0]).unwrap();
        let y = group_norm(&x, 1, 1.0, 0.0).unwrap();
        // mean 2, variance 1
        let s = 1.0 / (1.0 + GROUP_NORM_EPS).sqrt();
        assert!((y.data()[0] + s).abs() < 1e-12);
        assert!((y.data()[1] - s).abs() < 1e-12);
    }

    #[test]
    fn zero_gain_yields_shift() {
        let x = Tensor::<f32>::from_fn(&[8, 5], |i| (i as f32).sin());
        let y = group_norm(&x, 8, 0.0, 5.0).unwrap();
        assert!(y.data().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn indivisible_groups_are_a_config_error() {
        assert!(matches!(GroupNorm::<f32>::new(6, 4), Err(Error::Config(_))));
    }
}
