from .config import (CodecConfig, LossWeights, MelScale, bitrate_bps,
                     config_from_dict, config_to_dict, DEFAULT_MEL_SCALES)
from .model import CodecModel, Encoder, Decoder, Discriminator, DiscriminatorBank
from .losses import (log_mel_in_graph, recon_loss, recon_loss_from_mels, adv_losses,
                     feature_match_loss, total_generator_loss)
from .training import (TrainingDiverged, train_stage1, train_stage2, load_codec,
                       reorganize_checkpoint, calibrate_usage, LOG_COLUMNS)

__all__ = [
    "CodecConfig", "LossWeights", "MelScale", "bitrate_bps", "DEFAULT_MEL_SCALES",
    "config_from_dict", "config_to_dict",
    "CodecModel", "Encoder", "Decoder", "Discriminator", "DiscriminatorBank",
    "log_mel_in_graph", "recon_loss", "recon_loss_from_mels", "adv_losses",
    "feature_match_loss", "total_generator_loss",
    "TrainingDiverged", "train_stage1", "train_stage2", "load_codec",
    "reorganize_checkpoint", "calibrate_usage", "LOG_COLUMNS",
]
