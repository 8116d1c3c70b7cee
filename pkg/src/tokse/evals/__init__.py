from .metrics import (DB_PER_LN, DEFAULT_CEPSTRAL_ORDER, DEFAULT_SPECTRUM,
                      SI_SNR_CAP_DB, cepstra, long_term_average_spectrum, lsd,
                      lsd_trimmed, mcd, mcd_from_cepstra, si_snr,
                      timbre_correlation, token_accuracy)
from .report import MetricReport
from .experiments import (SWEEP_COLUMNS, encoder_latents, evaluate_codec,
                          evaluate_enhancement, read_sweep_csv, steps_to_reach,
                          substitution_experiment, train_direct_codebook,
                          usage_sweep, write_sweep_csv, write_sweep_svg)

__all__ = [
    "DB_PER_LN", "DEFAULT_CEPSTRAL_ORDER", "DEFAULT_SPECTRUM", "SI_SNR_CAP_DB",
    "cepstra", "long_term_average_spectrum", "lsd", "lsd_trimmed", "mcd",
    "mcd_from_cepstra", "si_snr", "timbre_correlation", "token_accuracy",
    "MetricReport",
    "SWEEP_COLUMNS", "encoder_latents", "evaluate_codec", "evaluate_enhancement",
    "read_sweep_csv", "steps_to_reach", "substitution_experiment",
    "train_direct_codebook", "usage_sweep", "write_sweep_csv", "write_sweep_svg",
]
