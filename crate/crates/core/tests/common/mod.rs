//! Oracles shared by the acceptance suite and the focused integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use neurodiff::diffusion::{forward_marginal, forward_step, Denoiser, DenoiserConfig, NoiseSchedule};
use neurodiff::harness::compute_auc;
use neurodiff::nn::check::{max_relative_error, numeric_gradient};
use neurodiff::nn::loss::{l1_loss, mse_loss};
use neurodiff::nn::{AdaptiveAvgPool, Conv1d, ConvAlgo, ConvBlock, GroupNorm, Linear, Module, Param, Silu, Upsample};
use neurodiff::prep::filter::{butter_bandpass, notch_filter};
use neurodiff::prep::{common_average_reference, Recording};
use neurodiff::refine::{one_hot, CaeConfig, RefineModel};
use neurodiff::Tensor;

pub const FD_STEP: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.sample::<f64, _>(StandardNormal))
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn flat_params<M: Module<f64>>(m: &M, grads: bool) -> Vec<f64> {
    let mut out = Vec::new();
    m.visit("", &mut |_, p: &Param<f64>| {
        out.extend_from_slice(if grads { p.grad.data() } else { p.value.data() })
    });
    out
}

fn set_params<M: Module<f64>>(m: &mut M, flat: &[f64]) {
    let mut at = 0;
    m.visit_mut("", &mut |_, p| {
        let n = p.value.len();
        p.value.data_mut().copy_from_slice(&flat[at..at + n]);
        at += n;
    });
}

/// Wraps a parameter-free op so the generic checker can drive it.
#[derive(Clone)]
pub struct Stateless<L>(pub L);

impl<L> Module<f64> for Stateless<L> {
    fn visit(&self, _: &str, _: &mut dyn FnMut(&str, &Param<f64>)) {}
    fn visit_mut(&mut self, _: &str, _: &mut dyn FnMut(&str, &mut Param<f64>)) {}
}

/// Max relative error between backprop and central differences of the
/// scalar `Σ r ⊙ f(x)`, over the input and every parameter.
pub fn check_layer<M, F, B>(model: &M, x: &Tensor<f64>, seed: u64, fwd: F, bwd: B) -> f64
where
    M: Module<f64> + Clone,
    F: Fn(&mut M, &Tensor<f64>) -> Tensor<f64>,
    B: Fn(&mut M, &Tensor<f64>) -> Tensor<f64>,
{
    let mut m = model.clone();
    let y = fwd(&mut m, x);
    let r = randn(y.shape(), &mut rng(seed ^ 0x5eed));
    m.zero_grad();
    let gx = bwd(&mut m, &r);
    let gp = flat_params(&m, true);

    let shape = x.shape().to_vec();
    let mut xs = x.data().to_vec();
    let nx = numeric_gradient(&mut xs, FD_STEP, |v| {
        let mut mm = model.clone();
        dot(&fwd(&mut mm, &Tensor::from_vec(&shape, v.to_vec()).unwrap()), &r)
    });
    let mut ps = flat_params(model, false);
    let np = numeric_gradient(&mut ps, FD_STEP, |v| {
        let mut mm = model.clone();
        set_params(&mut mm, v);
        dot(&fwd(&mut mm, x), &r)
    });
    max_relative_error(gx.data(), &nx).max(max_relative_error(&gp, &np))
}

/// Per-layer worst error over `seeds` random draws of weights and inputs.
pub fn layer_gradient_errors(seeds: u64) -> Vec<(&'static str, f64)> {
    let mut worst: Vec<(&'static str, f64)> = Vec::new();
    let mut record = |name: &'static str, e: f64| match worst.iter_mut().find(|(n, _)| *n == name) {
        Some(slot) => slot.1 = slot.1.max(e),
        None => worst.push((name, e)),
    };
    for s in 0..seeds {
        let mut g = rng(s);
        let x = randn(&[2, 3, 12], &mut g);

        for (name, k, stride, algo) in [
            ("conv1d", 5, 1, ConvAlgo::Direct),
            ("conv1d stride 2", 3, 2, ConvAlgo::Direct),
            ("conv1d spectral", 7, 1, ConvAlgo::Spectral),
        ] {
            let c = Conv1d::<f64>::new(3, 4, k, stride, &mut g).unwrap().with_algo(algo);
            let e = check_layer(&c, &x, s, |m, x| m.forward(x).unwrap(), |m, g| m.backward(g).unwrap());
            record(name, e);
        }

        let lin = Linear::<f64>::new(5, 3, &mut g);
        let xl = randn(&[4, 5], &mut g);
        record("linear", check_layer(&lin, &xl, s, |m, x| m.forward(x).unwrap(), |m, g| m.backward(g).unwrap()));

        let mut gn = GroupNorm::<f64>::new(4, 2).unwrap();
        gn.visit_mut("", &mut |_, p| {
            for v in p.value.data_mut() {
                *v += 0.3 * g.sample::<f64, _>(StandardNormal);
            }
        });
        let xg = randn(&[2, 4, 6], &mut g);
        record("group norm", check_layer(&gn, &xg, s, |m, x| m.forward(x).unwrap(), |m, g| m.backward(g).unwrap()));

        let silu = Stateless(Silu::<f64>::new());
        record("silu", check_layer(&silu, &x, s, |m, x| m.0.forward(x), |m, g| m.0.backward(g).unwrap()));

        for target in [1, 4] {
            let pool = Stateless(AdaptiveAvgPool::new(target).unwrap());
            let e = check_layer(&pool, &x, s, |m, x| m.0.forward(x).unwrap(), |m, g| m.0.backward(g).unwrap());
            record("adaptive avg pool", e);
        }

        let up = Stateless(Upsample::new(24));
        record("upsample", check_layer(&up, &x, s, |m, x| m.0.forward(x).unwrap(), |m, g| m.0.backward(g).unwrap()));

        let block = ConvBlock::<f64>::new(3, 4, 5, 1, 2, &mut g).unwrap();
        record("conv block", check_layer(&block, &x, s, |m, x| m.forward(x).unwrap(), |m, g| m.backward(g).unwrap()));
    }
    worst
}

pub fn tiny_denoiser_config() -> DenoiserConfig {
    DenoiserConfig {
        channels: 2,
        kernel_size: 5,
        widths: [4, 8, 8],
        groups: 4,
        time_dim: 8,
    }
}

pub fn tiny_cae_config() -> CaeConfig {
    CaeConfig {
        channels: 2,
        kernel_size: 5,
        widths: [4, 8],
        cond_channels: 4,
        groups: 2,
    }
}

/// Denoiser L1 objective against a clean target, checked end to end.
pub fn denoiser_gradient_error(seed: u64) -> f64 {
    let mut g = rng(seed);
    let model = Denoiser::<f64>::new(tiny_denoiser_config(), &mut g).unwrap();
    let x_t = randn(&[2, 2, 16], &mut g);
    let x0 = randn(&[2, 2, 16], &mut g);
    let ts = [3usize, 150];
    let loss = |m: &mut Denoiser<f64>, x: &Tensor<f64>| l1_loss(&m.forward(x, &ts).unwrap(), &x0).unwrap();

    let mut m = model.clone();
    let (_, gy) = loss(&mut m, &x_t);
    m.zero_grad();
    let gx = m.backward(&gy).unwrap();
    let gp = flat_params(&m, true);

    let mut xs = x_t.data().to_vec();
    let nx = numeric_gradient(&mut xs, FD_STEP, |v| {
        loss(&mut model.clone(), &Tensor::from_vec(x_t.shape(), v.to_vec()).unwrap()).0
    });
    let mut ps = flat_params(&model, false);
    let np = numeric_gradient(&mut ps, FD_STEP, |v| {
        let mut mm = model.clone();
        set_params(&mut mm, v);
        loss(&mut mm, &x_t).0
    });
    max_relative_error(gx.data(), &nx).max(max_relative_error(&gp, &np))
}

/// `L1(reconstruction, x0) + α·MSE(scores, one-hot)` through autoencoder
/// and classifier, with the denoiser estimate held fixed as the condition.
pub fn refine_gradient_error(seed: u64) -> f64 {
    let alpha = 0.1;
    let mut g = rng(seed);
    let model = RefineModel::<f64>::new(tiny_cae_config(), 3, &mut g).unwrap();
    let x_t = randn(&[2, 2, 32], &mut g);
    let x0 = randn(&[2, 2, 32], &mut g);
    let cond = randn(&[2, 2, 32], &mut g);
    let y = one_hot::<f64>(&[0, 2], 3).unwrap();
    let loss = |m: &mut RefineModel<f64>, x: &Tensor<f64>| {
        let out = m.forward(x, Some(&cond)).unwrap();
        let (l_rec, g_rec) = l1_loss(out.reconstruction.as_ref().unwrap(), &x0).unwrap();
        let (l_clf, mut g_clf) = mse_loss(&out.scores, &y).unwrap();
        g_clf.scale(alpha);
        (l_rec + alpha * l_clf, g_rec, g_clf)
    };

    let mut m = model.clone();
    let (_, g_rec, g_clf) = loss(&mut m, &x_t);
    m.zero_grad();
    let gx = m.backward(Some(&g_rec), &g_clf).unwrap();
    let gp = flat_params(&m, true);

    let mut xs = x_t.data().to_vec();
    let nx = numeric_gradient(&mut xs, FD_STEP, |v| {
        loss(&mut model.clone(), &Tensor::from_vec(x_t.shape(), v.to_vec()).unwrap()).0
    });
    let mut ps = flat_params(&model, false);
    let np = numeric_gradient(&mut ps, FD_STEP, |v| {
        let mut mm = model.clone();
        set_params(&mut mm, v);
        loss(&mut mm, &x_t).0
    });
    max_relative_error(gx.data(), &nx).max(max_relative_error(&gp, &np))
}

pub struct MomentErrors {
    pub t: usize,
    /// Mean over elements of `|m̂ − m| / σ`.
    pub mean_err: f64,
    /// Mean over elements of `|v̂ − v| / v`.
    pub var_err: f64,
    pub max_mean_err: f64,
    pub max_var_err: f64,
}

fn moments(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    let d = samples[0].len();
    let mean: Vec<f64> = (0..d).map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / n).collect();
    let var = (0..d)
        .map(|j| samples.iter().map(|s| (s[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0))
        .collect();
    (mean, var)
}

/// Iterates single noising steps `t` times and compares the empirical
/// per-element moments with the closed-form marginal.
pub fn diffusion_moment_errors(trials: usize, seed: u64) -> Vec<MomentErrors> {
    let schedule = NoiseSchedule::default();
    let steps = schedule.steps();
    let x0 = Tensor::<f64>::from_fn(&[2, 16], |i| 1.0 + 0.5 * (i as f64 * 0.7).sin());
    let mut g = rng(seed);
    [1, steps / 2, steps]
        .into_iter()
        .map(|t| {
            let samples: Vec<Vec<f64>> = (0..trials)
                .map(|_| {
                    let mut x = x0.clone();
                    for s in 1..=t {
                        x = forward_step(&schedule, &x, s, &mut g).unwrap();
                    }
                    x.into_data()
                })
                .collect();
            let (m, v) = moments(&samples);
            let ab = schedule.alpha_bar(t).unwrap();
            let (mut me, mut ve, mut mx_m, mut mx_v) = (0.0, 0.0, 0.0f64, 0.0f64);
            for (j, &x) in x0.data().iter().enumerate() {
                let (want_m, want_v) = (ab.sqrt() * x, 1.0 - ab);
                let em = (m[j] - want_m).abs() / want_v.sqrt();
                let ev = (v[j] - want_v).abs() / want_v;
                me += em;
                ve += ev;
                mx_m = mx_m.max(em);
                mx_v = mx_v.max(ev);
            }
            let d = x0.len() as f64;
            MomentErrors {
                t,
                mean_err: me / d,
                var_err: ve / d,
                max_mean_err: mx_m,
                max_var_err: mx_v,
            }
        })
        .collect()
}

/// Same statistics for direct closed-form draws, as a control.
pub fn marginal_moment_errors(trials: usize, t: usize, seed: u64) -> (f64, f64) {
    let schedule = NoiseSchedule::default();
    let x0 = Tensor::<f64>::from_fn(&[2, 16], |i| 1.0 + 0.5 * (i as f64 * 0.7).sin());
    let mut g = rng(seed);
    let samples: Vec<Vec<f64>> = (0..trials)
        .map(|_| forward_marginal(&schedule, &x0, t, &mut g).unwrap().x_t.into_data())
        .collect();
    let (m, v) = moments(&samples);
    let ab = schedule.alpha_bar(t).unwrap();
    let d = x0.len() as f64;
    let me = x0.data().iter().zip(&m).map(|(x, mm)| (mm - ab.sqrt() * x).abs()).sum::<f64>() / d / (1.0 - ab).sqrt();
    let ve = v.iter().map(|vv| (vv - (1.0 - ab)).abs()).sum::<f64>() / d / (1.0 - ab);
    (me, ve)
}

pub fn tone(freq: f64, fs: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / fs).sin()).collect()
}

pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// RMS gain over the middle half, away from edge transients.
pub fn middle_gain(input: &[f64], output: &[f64]) -> f64 {
    let (a, b) = (input.len() / 4, 3 * input.len() / 4);
    rms(&output[a..b]) / rms(&input[a..b])
}

pub struct FilterOracles {
    pub notch_60_db: f64,
    pub bandpass_10_gain: f64,
    pub pulse_asymmetry: f64,
    pub pulse_peak_shift: usize,
    pub car_max_column_mean: f64,
}

pub fn filter_oracles() -> FilterOracles {
    let fs = 1000.0;
    let n = 8000;

    let notch = notch_filter(60.0, 30.0, fs).unwrap();
    let x60 = tone(60.0, fs, n);
    let y60 = notch.filtfilt(&x60, notch.default_padlen(fs)).unwrap();
    let notch_60_db = -20.0 * middle_gain(&x60, &y60).log10();

    let bp = butter_bandpass(4, 0.5, 115.0, fs).unwrap();
    let x10 = tone(10.0, fs, n);
    let y10 = bp.filtfilt(&x10, bp.default_padlen(fs)).unwrap();
    let bandpass_10_gain = middle_gain(&x10, &y10);

    let c = n / 2;
    let pulse: Vec<f64> = (0..n)
        .map(|i| {
            let d = (i as f64 - c as f64) / 5.0;
            (-0.5 * d * d).exp()
        })
        .collect();
    let yp = bp.filtfilt(&pulse, bp.default_padlen(fs)).unwrap();
    let peak = yp.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let pulse_asymmetry = (1..n / 4).map(|k| (yp[c + k] - yp[c - k]).abs()).fold(0.0, f64::max) / peak;
    let argmax = (0..n).max_by(|&a, &b| yp[a].total_cmp(&yp[b])).unwrap();

    let mut g = rng(7);
    let (chans, samples) = (8, 2000);
    let data = Tensor::<f32>::from_fn(&[chans, samples], |_| (5.0 * g.sample::<f64, _>(StandardNormal)) as f32);
    let rec = Recording {
        data,
        fs,
        channel_names: (0..chans).map(|c| format!("ch{c}")).collect(),
        events: Vec::new(),
        class_names: Vec::new(),
        subject: "oracle".into(),
    };
    let car = common_average_reference(&rec).unwrap();
    let car_max_column_mean = (0..samples)
        .map(|s| (0..chans).map(|c| car.channel(c)[s] as f64).sum::<f64>().abs() / chans as f64)
        .fold(0.0, f64::max);

    FilterOracles {
        notch_60_db,
        bandpass_10_gain,
        pulse_asymmetry,
        pulse_peak_shift: argmax.abs_diff(c),
        car_max_column_mean,
    }
}

/// Pair-counting AUC for one class: wins plus half ties over all
/// positive/negative pairs.
pub fn brute_binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let (mut twice_wins, mut pairs) = (0u64, 0u64);
    for (i, &pi) in positive.iter().enumerate() {
        if !pi {
            continue;
        }
        for (j, &pj) in positive.iter().enumerate() {
            if pj {
                continue;
            }
            pairs += 1;
            twice_wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    (pairs > 0).then(|| (twice_wins as f64 / 2.0) / pairs as f64)
}

pub fn brute_macro_auc(scores: &[f64], k: usize, labels: &[usize]) -> Option<f64> {
    let n = labels.len();
    let per: Vec<f64> = (0..k)
        .filter_map(|c| {
            let col: Vec<f64> = (0..n).map(|i| scores[i * k + c]).collect();
            let pos: Vec<bool> = labels.iter().map(|&l| l == c).collect();
            brute_binary_auc(&col, &pos)
        })
        .collect();
    (!per.is_empty()).then(|| per.iter().sum::<f64>() / per.len() as f64)
}

/// A random multiclass instance with `N ≤ 50`; half of them draw scores from
/// a coarse grid so ties are common.
pub fn random_auc_instance(g: &mut ChaCha8Rng) -> (Vec<f64>, usize, Vec<usize>) {
    let k = g.gen_range(2..=5);
    let n = g.gen_range(2..=50);
    let coarse = g.gen_bool(0.5);
    let scores = (0..n * k)
        .map(|_| if coarse { g.gen_range(0..4) as f64 / 4.0 } else { g.gen::<f64>() })
        .collect();
    let labels = (0..n).map(|_| g.gen_range(0..k)).collect();
    (scores, k, labels)
}

/// Returns the number of instances where the two disagree (or only one is defined).
pub fn auc_mismatches(instances: usize, seed: u64) -> usize {
    let mut g = rng(seed);
    let mut bad = 0;
    let mut done = 0;
    while done < instances {
        let (scores, k, labels) = random_auc_instance(&mut g);
        let fast = compute_auc(&scores, k, &labels).ok().map(|r| r.macro_auc);
        let slow = brute_macro_auc(&scores, k, &labels);
        if slow.is_none() {
            // Undefined instance; both sides must agree it is an error.
            if fast.is_some() {
                bad += 1;
            }
            continue;
        }
        if fast != slow {
            bad += 1;
        }
        done += 1;
    }
    bad
}

/// Random container: unicode metadata, f32 blocks with arbitrary bit
/// patterns (NaN payloads included), u32 blocks and empty shapes.
pub fn random_container(g: &mut ChaCha8Rng) -> neurodiff::data::ndc1::Container {
    use neurodiff::data::ndc1::{Container, TensorBlock, TensorData};
    const ALPHABET: &[char] = &['a', 'z', '0', '_', '.', ' ', 'é', 'λ', '中', '🙂', '\n', '"'];
    let text = |g: &mut ChaCha8Rng, max: usize| -> String {
        let n = g.gen_range(0..=max);
        (0..n).map(|_| ALPHABET[g.gen_range(0..ALPHABET.len())]).collect()
    };
    let mut c = Container::new();
    for _ in 0..g.gen_range(0..6) {
        let key = text(g, 12);
        let value = text(g, 40);
        c.meta.insert(key, value);
    }
    for b in 0..g.gen_range(0..5) {
        let rank = g.gen_range(0..4);
        let shape: Vec<usize> = (0..rank).map(|_| g.gen_range(0..5)).collect();
        let n: usize = shape.iter().product();
        let data = if g.gen_bool(0.7) {
            TensorData::F32((0..n).map(|_| f32::from_bits(g.gen())).collect())
        } else {
            TensorData::U32((0..n).map(|_| g.gen()).collect())
        };
        c.tensors.push(TensorBlock {
            name: format!("{}{b}", text(g, 8)),
            shape,
            data,
        });
    }
    c
}

/// Equality that compares f32 payloads bit for bit.
pub fn containers_identical(a: &neurodiff::data::ndc1::Container, b: &neurodiff::data::ndc1::Container) -> bool {
    use neurodiff::data::ndc1::TensorData;
    a.meta == b.meta
        && a.opaque == b.opaque
        && a.tensors.len() == b.tensors.len()
        && a.tensors.iter().zip(&b.tensors).all(|(x, y)| {
            x.name == y.name
                && x.shape == y.shape
                && match (&x.data, &y.data) {
                    (TensorData::F32(p), TensorData::F32(q)) => {
                        p.len() == q.len() && p.iter().zip(q).all(|(u, v)| u.to_bits() == v.to_bits())
                    }
                    (TensorData::U32(p), TensorData::U32(q)) => p == q,
                    _ => false,
                }
        })
}

/// Flips one bit of the stored checksum of the first block.
pub fn corrupt_first_crc(bytes: &mut [u8]) {
    // magic(4) version(2) count(4) | kind(1) body_len(8) body crc(4)
    let body_len = u64::from_le_bytes(bytes[11..19].try_into().unwrap()) as usize;
    bytes[19 + body_len] ^= 0x01;
}
