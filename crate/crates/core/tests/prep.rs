mod common;

use common::{filter_oracles, middle_gain, rms, rng, tone};
use neurodiff::data::{generate_recording, generate_synthetic, SyntheticSpec};
use neurodiff::prep::{
    bandpass, common_average_reference, epoch_segment, highgamma_select, notch, run_pipeline, Event, PassThrough,
    PrepConfig, Recording,
};
use neurodiff::Tensor;
use rand::Rng;
use realfft::RealFftPlanner;

const FS: f64 = 1000.0;
const N: usize = 8000;

fn single_channel(x: &[f64]) -> Recording {
    two_channels(x, x)
}

fn two_channels(a: &[f64], b: &[f64]) -> Recording {
    let data = a.iter().chain(b).map(|&v| v as f32).collect();
    Recording {
        data: Tensor::from_vec(&[2, a.len()], data).unwrap(),
        fs: FS,
        channel_names: vec!["a".into(), "b".into()],
        events: Vec::new(),
        class_names: Vec::new(),
        subject: "s".into(),
    }
}

fn row(rec: &Recording) -> Vec<f64> {
    rec.channel(0).iter().map(|&v| v as f64).collect()
}

#[test]
fn bandpass_removes_dc_and_keeps_alpha() {
    let dc = vec![3.0; N];
    let out = row(&bandpass(&single_channel(&dc), 0.5, 115.0).unwrap());
    assert!(rms(&out[N / 4..3 * N / 4]) <= 0.01 * rms(&dc));

    let x = tone(10.0, FS, N);
    let out = row(&bandpass(&single_channel(&x), 0.5, 115.0).unwrap());
    assert!((middle_gain(&x, &out) - 1.0).abs() <= 0.05);
}

#[test]
fn notch_removes_line_noise_only() {
    let x = tone(60.0, FS, N);
    let out = row(&notch(&single_channel(&x), 60.0, 30.0).unwrap());
    assert!(middle_gain(&x, &out) <= 0.1);

    let x = tone(40.0, FS, N);
    let out = row(&notch(&single_channel(&x), 60.0, 30.0).unwrap());
    assert!((middle_gain(&x, &out) - 1.0).abs() <= 0.05);
}

#[test]
fn high_gamma_band() {
    let x = tone(90.0, FS, N);
    let out = row(&highgamma_select(&single_channel(&x), [70.0, 115.0]).unwrap());
    assert!((middle_gain(&x, &out) - 1.0).abs() <= 0.05);

    let x = tone(20.0, FS, N);
    let out = row(&highgamma_select(&single_channel(&x), [70.0, 115.0]).unwrap());
    assert!(-20.0 * middle_gain(&x, &out).log10() >= 20.0);
}

#[test]
fn reference_and_zero_phase() {
    let o = filter_oracles();
    assert!(o.car_max_column_mean <= 1e-6);
    assert!(o.pulse_asymmetry <= 1e-6);
    assert_eq!(o.pulse_peak_shift, 0);

    let mut g = rng(3);
    let a: Vec<f64> = (0..500).map(|_| g.gen_range(-10.0..10.0)).collect();
    let b: Vec<f64> = (0..500).map(|_| g.gen_range(-10.0..10.0)).collect();
    let car = common_average_reference(&two_channels(&a, &b)).unwrap();
    for s in 0..500 {
        assert!((car.channel(0)[s] as f64 + car.channel(1)[s] as f64).abs() <= 1e-5);
    }
}

#[test]
fn epochs_are_two_seconds() {
    let fs = 256.0;
    let n = 4000;
    let mut rec = single_channel(&vec![1.0; n]);
    rec.fs = fs;
    rec.events = vec![
        Event { sample: 100, label: 0 },
        Event { sample: 10, label: 0 },
        Event { sample: n - 100, label: 0 },
    ];
    rec.class_names = vec!["a".into()];
    let seg = epoch_segment(&rec, 2.0, 100.0).unwrap();
    assert_eq!(seg.epochs.len(), 1);
    assert_eq!(seg.dropped, 2);
    assert_eq!(seg.epochs[0].data.shape(), &[2, 512]);
    assert!(seg.epochs[0].data.data().iter().all(|v| v.abs() < 1e-6));
}

#[test]
fn full_pipeline_on_generated_recording() {
    let spec = SyntheticSpec {
        num_classes: 3,
        samples_per_class: 4,
        channels: 4,
        active_channels: 2,
        ..SyntheticSpec::default()
    };
    let rec = generate_recording(&spec, 1).unwrap();
    let (set, report) = run_pipeline(&rec, &PrepConfig::default(), &PassThrough).unwrap();
    assert_eq!(set.len() + report.dropped_epochs, 12);
    assert_eq!(set.samples(), 512);
    assert_eq!(set.channels(), 4);
    assert!(set.epochs.all_finite());
}

/// Dominant FFT bin summed over a class's active channels, mapped to the
/// nearest carrier.
fn spectral_peak_class(spec: &SyntheticSpec, epoch: &[f32], len: usize) -> usize {
    let fft = RealFftPlanner::<f64>::new().plan_fft_forward(len);
    let mut spectrum = fft.make_output_vec();
    let mut power = vec![0.0; len / 2];
    let channels: Vec<usize> = (0..spec.num_classes).flat_map(|c| spec.active_set(c)).collect();
    for ch in channels {
        let mut buf: Vec<f64> = epoch[ch * len..(ch + 1) * len].iter().map(|&v| v as f64).collect();
        fft.process(&mut buf, &mut spectrum).unwrap();
        for (p, z) in power.iter_mut().zip(&spectrum) {
            *p += z.norm_sqr();
        }
    }
    let bin = (1..len / 2).max_by(|&a, &b| power[a].total_cmp(&power[b])).unwrap();
    let f = bin as f64 * spec.fs / len as f64;
    (0..spec.num_classes)
        .min_by(|&a, &b| {
            let d = |c: usize| spec.carriers(c).iter().map(|cf| (cf - f).abs()).fold(f64::MAX, f64::min);
            d(a).total_cmp(&d(b))
        })
        .unwrap()
}

#[test]
fn high_snr_synthetic_is_trivially_separable() {
    let spec = SyntheticSpec {
        num_classes: 2,
        samples_per_class: 25,
        snr_db: 60.0,
        ..SyntheticSpec::default()
    };
    let set = generate_synthetic(&spec, 0).unwrap();
    let len = set.samples();
    for (i, &label) in set.labels.iter().enumerate() {
        assert_eq!(spectral_peak_class(&spec, set.epochs.item(i), len), label, "epoch {i}");
    }
}
