from .codebook import (Codebook, UsageReport, measure_usage, quantize_nearest, update_ema,
                       write_usage_csv, read_usage_csv)
from .group import UNMAPPED, GroupQuantizer, group_quantize, reorganize
from .losses import commitment_loss

__all__ = [
    "Codebook", "UsageReport", "quantize_nearest", "update_ema", "measure_usage",
    "write_usage_csv", "read_usage_csv",
    "GroupQuantizer", "group_quantize", "reorganize", "UNMAPPED",
    "commitment_loss",
]
