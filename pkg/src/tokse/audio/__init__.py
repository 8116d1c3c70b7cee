from .waveform import Waveform, read_wav, write_wav
from .spectral import SpectralConfig, stft, mel_filterbank, mel_spectrogram
from .synth import SpeakerTemplate, default_templates, synth_utterance, noise_signal, synth_rir
from .corpus import AugmentConfig, PairRecord, mix_at_snr, apply_rir, make_corpus, read_manifest, write_manifest

__all__ = [
    "Waveform", "read_wav", "write_wav",
    "SpectralConfig", "stft", "mel_filterbank", "mel_spectrogram",
    "SpeakerTemplate", "default_templates", "synth_utterance", "noise_signal", "synth_rir",
    "AugmentConfig", "PairRecord", "mix_at_snr", "apply_rir", "make_corpus",
    "read_manifest", "write_manifest",
]
