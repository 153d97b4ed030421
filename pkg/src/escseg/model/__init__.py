from .encoders import (EdgeEncoder, EncoderConfig, FeatureMap, PyramidCollapse,
                       PyramidEncoder, edge_encode, encode_events, encode_image,
                       resolve_image_edges)
from .elr import (LOG_EPS, MODALITY_SOFTMAX, PRIOR_ONE_HOT, EdgeDistribution,
                  KeyHead, RecodedFeature, edge_loss, freeze_dictionary, key_map,
                  modality_distribution, prior_distribution, recode_features)
from .fusion import (BETA_DEFAULT, CellAttention, ConfidenceMaps, NoiseEmbeddings,
                     PredictHead, logits_to_mask, predict_mask, rc_forward,
                     total_loss, uo_confidence, uo_forward)
from .network import (EscNet, ModelOutput, NetConfig, dictionary_fingerprint,
                      load_model, save_model)

__all__ = [
    "EdgeEncoder", "EncoderConfig", "FeatureMap", "PyramidCollapse",
    "PyramidEncoder", "edge_encode", "encode_events", "encode_image",
    "resolve_image_edges",
    "LOG_EPS", "MODALITY_SOFTMAX", "PRIOR_ONE_HOT", "EdgeDistribution", "KeyHead",
    "RecodedFeature", "edge_loss", "freeze_dictionary", "key_map",
    "modality_distribution", "prior_distribution", "recode_features",
    "BETA_DEFAULT", "CellAttention", "ConfidenceMaps", "NoiseEmbeddings",
    "PredictHead", "logits_to_mask", "predict_mask", "rc_forward", "total_loss",
    "uo_confidence", "uo_forward",
    "EscNet", "ModelOutput", "NetConfig", "dictionary_fingerprint", "load_model",
    "save_model",
]
