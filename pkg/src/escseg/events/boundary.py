"""Semantic boundary extraction and dilation.

A pixel is a boundary pixel when its window contains a different semantic
label, i.e. the mean-filtered label field disagrees with the center. The check
is done on integer min/max so no accidental mean tie (a symmetric label set
like {1,2,3} around center 2) can punch a hole in a real class junction, and
no floating-point tolerance is ever involved.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .types import IGNORE_LABEL, BoundaryMap, ConfigurationError, InputError, SemanticMask

_LO_SENTINEL = -1
_HI_SENTINEL = 2**31


def extract_boundary(mask: SemanticMask, kernel: int = 3) -> BoundaryMap:
    """Label-change boundary of a semantic mask.

    Windows are clipped at the image border; ignore-labeled pixels neither
    seed a boundary nor count as differing neighbors.
    """
    if kernel < 3 or kernel % 2 == 0:
        raise ConfigurationError(f"kernel must be odd and >= 3, got {kernel}")
    labels = mask.labels.astype(np.int64)
    valid = (labels != IGNORE_LABEL)
    size = (kernel, kernel)
    # sentinels make ignore and out-of-bounds pixels never win min/max
    vmax = ndimage.maximum_filter(np.where(valid, labels, _LO_SENTINEL),
                                  size=size, mode="constant", cval=_LO_SENTINEL)
    vmin = ndimage.minimum_filter(np.where(valid, labels, _HI_SENTINEL),
                                  size=size, mode="constant", cval=_HI_SENTINEL)
    edges = valid & ((vmax != labels) | (vmin != labels))
    return BoundaryMap(edges.astype(np.uint8))


def dilate_boundary(b: BoundaryMap, iters: int) -> BoundaryMap:
    """Morphological dilation with a 3x3 all-ones element, ``iters`` times."""
    if iters < 0:
        raise InputError(f"iters must be >= 0, got {iters}")
    if iters == 0:
        # scipy treats iterations=0 as "repeat until convergence"; guard it
        return BoundaryMap(b.edges.copy())
    out = ndimage.binary_dilation(
        b.edges.astype(bool), structure=np.ones((3, 3), dtype=bool), iterations=iters
    )
    return BoundaryMap(out.astype(np.uint8))
