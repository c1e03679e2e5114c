//! Signal types and numerical kernels: FIR filtering, delay lines, seeded
//! noise and WAV ingestion.

mod filter;
mod noise;
mod wav;

pub use filter::{
    axpy, convolve, convolve_truncated, dot, fir_convolve_full, fir_convolve_step, DelayLine,
    FirFilter,
};
pub use noise::{design_bandpass, gen_bandlimited_noise, NoiseKind, NoiseSource, BANDPASS_ORDER};
pub use wav::{load_wav_channel, load_wav_mono, WavAudio};
