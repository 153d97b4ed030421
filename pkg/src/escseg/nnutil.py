"""Shared neural-net plumbing: dtype policy and deterministic initialization.

Everything trains in float64 on CPU. Weights are drawn from a NumPy generator
in sorted parameter-name order, so a seed pins every parameter bit regardless
of torch's own global RNG state.
"""

from __future__ import annotations

from typing import Dict

import numpy as np
import torch

DTYPE = torch.float64


def as_tensor(arr) -> torch.Tensor:
    return torch.as_tensor(np.asarray(arr), dtype=DTYPE)


def _fan_in(param: torch.Tensor) -> int:
    shape = param.shape
    if len(shape) == 2:  # linear (out, in)
        return shape[1]
    if len(shape) >= 3:  # conv-like (out/in, in/out, k, k)
        return shape[1] * int(np.prod(shape[2:]))
    return shape[0]


def init_parameters(module: torch.nn.Module, rng: np.random.Generator) -> None:
    """He-style normal init for weights, zeros for biases, in name order."""
    for name, p in sorted(module.named_parameters(), key=lambda kv: kv[0]):
        with torch.no_grad():
            if p.dim() >= 2:
                std = float(np.sqrt(2.0 / _fan_in(p)))
                p.copy_(as_tensor(rng.normal(0.0, std, tuple(p.shape))))
            else:
                p.zero_()


def zero_parameters(module: torch.nn.Module) -> None:
    for p in module.parameters():
        with torch.no_grad():
            p.zero_()


def parameters_to_arrays(module: torch.nn.Module) -> Dict[str, np.ndarray]:
    return {name: p.detach().cpu().numpy().copy()
            for name, p in module.named_parameters()}


def load_arrays_into(module: torch.nn.Module, arrays: Dict[str, np.ndarray]) -> None:
    own = dict(module.named_parameters())
    if set(own) != set(arrays):
        missing = set(own) ^ set(arrays)
        raise KeyError(f"parameter name mismatch: {sorted(missing)}")
    for name, p in own.items():
        with torch.no_grad():
            p.copy_(as_tensor(arrays[name]))


def count_parameters(module: torch.nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
