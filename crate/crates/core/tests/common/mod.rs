//! Speech + noise pairs with frozen scores from an independent STOI
//! implementation (pystoi 0.4, computed once by fixtures/stoi_reference.py).

#![allow(dead_code)]

use ians::dsp::Waveform;
use ians::synth;

/// (utterance seed, noise kind, snr dB, sample rate)
pub const PAIRS: [(u64, &str, f64, u32); 12] = [
    (11, "white", -5.0, 16_000),
    (12, "white", 0.0, 16_000),
    (13, "white", 5.0, 16_000),
    (14, "white", 10.0, 16_000),
    (15, "pink", -5.0, 16_000),
    (16, "pink", 0.0, 16_000),
    (17, "pink", 5.0, 16_000),
    (18, "babble", 0.0, 16_000),
    (19, "babble", 5.0, 16_000),
    (20, "white", 0.0, 10_000),
    (21, "pink", 0.0, 10_000),
    (22, "babble", 0.0, 10_000),
];

/// pystoi.stoi(clean, degraded, fs) for each pair, in order.
pub const REFERENCE: [f64; 12] = [
    0.605830, 0.725063, 0.831426, 0.840294, 0.604163, 0.772740,
    0.817124, 0.767974, 0.892563, 0.602945, 0.678977, 0.548820,
];

fn quantise(x: &Waveform) -> Waveform {
    let s = x.samples().iter().map(|&v| v as f32 as f64).collect();
    Waveform::new(s, x.sample_rate()).unwrap()
}

pub fn pair(i: usize) -> (Waveform, Waveform) {
    let (seed, kind, snr, fs) = PAIRS[i];
    let clean = synth::utterance(seed, 2.5, fs);
    let noise = match kind {
        "white" => synth::white_noise(seed + 500, clean.len(), fs),
        "pink" => synth::pink_noise(seed + 500, clean.len(), fs),
        _ => synth::babble(seed + 500, clean.len(), fs, 6),
    };
    let noisy = synth::mix_at_snr(&clean, &noise, snr).unwrap();
    (quantise(&clean), quantise(&noisy))
}
