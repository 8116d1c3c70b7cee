from .bundle import (BundleError, PipelineBundle, load_bundle, ENHANCE_MODES,
                     CODEC_STAGE1, CODEC_STAGE2, SEMANTIC_VOCAB, N2S_CHECKPOINT,
                     S2S_CHECKPOINT, S2S_NO_CHAIN_CHECKPOINT, SINGLE_LM_CHECKPOINT,
                     CONFIG_SNAPSHOT, PROVENANCE, PLAN_LOG)
from .enhance import EnhanceResult, StageError, enhance, enhance_ablated, enhance_detailed
from .plan import (PlanConfig, PlanError, acoustic_token_pairs, corpus_fingerprint,
                   plan_bundle, plan_from_dict, plan_to_dict, run_stage,
                   run_training_plan, semantic_token_pairs, stage_artifact,
                   stage_names)

__all__ = [
    "BundleError", "PipelineBundle", "load_bundle", "ENHANCE_MODES",
    "CODEC_STAGE1", "CODEC_STAGE2", "SEMANTIC_VOCAB", "N2S_CHECKPOINT",
    "S2S_CHECKPOINT", "S2S_NO_CHAIN_CHECKPOINT", "SINGLE_LM_CHECKPOINT",
    "CONFIG_SNAPSHOT", "PROVENANCE", "PLAN_LOG",
    "EnhanceResult", "StageError", "enhance", "enhance_ablated", "enhance_detailed",
    "PlanConfig", "PlanError", "acoustic_token_pairs", "corpus_fingerprint",
    "plan_bundle", "plan_from_dict", "plan_to_dict", "run_stage",
    "run_training_plan", "semantic_token_pairs", "stage_artifact", "stage_names",
]
