from ..events.simulator import EventSimConfig, inject_noise_events, simulate_events
from .dataset import (ENV_DATA_ROOT, Sequence, data_root, generate_dataset,
                      list_sequences, read_sequence, write_sequence)
from .isp import (IspConfig, calibrate_attenuation, identity_config, isp_forward,
                  isp_unprocess, lowlight_simulate)
from .occlusion import (DEFAULT_EVENT_ORIGIN, DEFAULT_RGB_ORIGIN, DEFAULT_SIZE,
                        OcclusionSpec, apply_occlusion, apply_occlusions,
                        default_specs)
from .scenes import (SceneConfig, ToyScene, class_palette, generate_toy_scene,
                     luminance)

__all__ = [
    "EventSimConfig", "inject_noise_events", "simulate_events",
    "ENV_DATA_ROOT", "Sequence", "data_root", "generate_dataset",
    "list_sequences", "read_sequence", "write_sequence",
    "IspConfig", "calibrate_attenuation", "identity_config", "isp_forward",
    "isp_unprocess", "lowlight_simulate",
    "DEFAULT_EVENT_ORIGIN", "DEFAULT_RGB_ORIGIN", "DEFAULT_SIZE",
    "OcclusionSpec", "apply_occlusion", "apply_occlusions", "default_specs",
    "SceneConfig", "ToyScene", "class_palette", "generate_toy_scene", "luminance",
]
