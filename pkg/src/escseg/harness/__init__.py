from .config import RunConfig, load_config, reference_defaults
from .train import TrainResult, train_segmentation
from .evaluate import evaluate_model, occlusion_sweep
from .gradcheck import GradReport, grad_check

__all__ = [
    "RunConfig", "load_config", "reference_defaults",
    "TrainResult", "train_segmentation",
    "evaluate_model", "occlusion_sweep",
    "GradReport", "grad_check",
]
