"""Patch tiling, prior fusion and gradient-gated cosine seam blending."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import DimensionError, as_image, check_same_shape, mean_region_gradient

HORIZONTAL = "horizontal"  # neighbours side by side, blend across columns
VERTICAL = "vertical"  # neighbours stacked, blend across rows


def axis_anchors(dim: int, patch: int, stride: int) -> list[int]:
    if patch > dim:
        raise DimensionError(f"patch {patch} is larger than image dimension {dim}")
    if not 1 <= stride <= patch:
        raise ValueError(f"stride must lie in [1, {patch}], got {stride}")
    anchors = list(range(0, dim - patch + 1, stride))
    if anchors[-1] != dim - patch:
        anchors.append(dim - patch)
    return anchors


@dataclass(frozen=True)
class PatchGrid:
    height: int
    width: int
    patch: int
    stride: int
    row_anchors: tuple[int, ...]
    col_anchors: tuple[int, ...]

    @property
    def overlap(self) -> int:
        return self.patch - self.stride

    @property
    def positions(self) -> list[tuple[int, int]]:
        """Top-left anchors in raster order."""
        return [(r, c) for r in self.row_anchors for c in self.col_anchors]

    def window(self, anchor: tuple[int, int]) -> tuple[int, int, int, int]:
        r, c = anchor
        return (r, r + self.patch, c, c + self.patch)

    def cut(self, img: np.ndarray, anchor: tuple[int, int]) -> np.ndarray:
        r0, r1, c0, c1 = self.window(anchor)
        return img[r0:r1, c0:c1]


def build_grid(height: int, width: int, patch: int = 128, stride: int = 96) -> PatchGrid:
    rows = axis_anchors(height, patch, stride)
    cols = axis_anchors(width, patch, stride)
    return PatchGrid(height, width, patch, stride, tuple(rows), tuple(cols))


def fuse_mid(x_mid: np.ndarray, up_low: np.ndarray) -> np.ndarray:
    """Equal-weight fusion of the mid input with the upsampled low prior."""
    check_same_shape(as_image(x_mid), as_image(up_low))
    return 0.5 * (up_low + x_mid)


def fuse_patch(x_patch: np.ndarray, mid_region_up: np.ndarray) -> np.ndarray:
    check_same_shape(as_image(x_patch), as_image(mid_region_up))
    return 0.5 * (mid_region_up + x_patch)


def prior_window(anchor: tuple[int, int], patch: int, prior_shape: tuple[int, int],
                 factor: int) -> tuple[int, int, int, int]:
    """Window of a coarser prior aligned with a full-resolution patch.

    The anchor maps to ``anchor // factor``; the window is shifted back
    inside the prior when it would run past the border.
    """
    if patch % factor:
        raise DimensionError(f"patch {patch} is not divisible by the prior factor {factor}")
    size = patch // factor
    out = []
    for a, dim in zip(anchor, prior_shape):
        if size > dim:
            raise DimensionError(f"prior of shape {prior_shape} is smaller than the aligned window {size}")
        start = min(a // factor, dim - size)
        out.extend((start, start + size))
    return tuple(out)


def cosine_weight(p: float, L: float) -> float:
    if L < 1:
        raise ValueError(f"band width must be >= 1, got {L}")
    if not 0 <= p <= L:
        raise ValueError(f"offset {p} outside band [0, {L}]")
    return 0.5 * (1.0 - math.cos(math.pi * p / L))


def _ramp(L: int) -> np.ndarray:
    return 0.5 * (1.0 - np.cos(np.pi * np.arange(L) / L))


def blend_pair(region1: np.ndarray, region2: np.ndarray, axis: str, L: int) -> np.ndarray:
    """Cosine cross-fade over the first ``L`` pixels along ``axis``.

    ``region2`` is the earlier (left/top) neighbour and ``region1`` the later
    one. Pixel ``k`` of the band gets ``alpha(k) * region1 + (1 - alpha(k)) *
    region2``; from offset ``L`` on, ``region1`` is used as is.
    """
    check_same_shape(region1, region2)
    ax = {HORIZONTAL: 1, VERTICAL: 0}.get(axis)
    if ax is None:
        raise ValueError(f"axis must be {HORIZONTAL!r} or {VERTICAL!r}, got {axis!r}")
    extent = region1.shape[ax]
    if not 1 <= L <= extent:
        raise DimensionError(f"band width {L} does not fit region extent {extent}")
    alpha = _ramp(L)
    alpha = alpha[None, :] if ax == 1 else alpha[:, None]
    out = np.array(region1, dtype=np.float64)
    band = (slice(None), slice(0, L)) if ax == 1 else (slice(0, L), slice(None))
    # written as r2 + a*(r1 - r2) so identical inputs pass through bit-exactly
    out[band] = region2[band] + alpha * (region1[band] - region2[band])
    return out


@dataclass(frozen=True)
class BlendPolicy:
    eta: float = 0.05
    band_width: int = 32

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if self.band_width < 1:
            raise ValueError(f"band width must be >= 1, got {self.band_width}")


@dataclass
class SeamStats:
    blended: int = 0
    stitched: int = 0


def _merge(acc: np.ndarray, piece: np.ndarray, start: int, prev_end: int, axis: str,
           gate_region: tuple[int, int, int, int], mid_grad: np.ndarray, policy: BlendPolicy,
           stats: SeamStats) -> None:
    """Write ``piece`` into ``acc`` at ``start`` along ``axis`` (in place)."""
    ax = 1 if axis == HORIZONTAL else 0
    size = piece.shape[ax]
    ov = prev_end - start

    def sl(a, b):
        return (slice(None), slice(a, b)) if ax == 1 else (slice(a, b), slice(None))

    if ov > 0 and mean_region_gradient(mid_grad, gate_region) > policy.eta:
        L = min(policy.band_width, ov)
        acc[sl(start, prev_end)] = blend_pair(piece[sl(0, ov)], acc[sl(start, prev_end)], axis, L)
        acc[sl(prev_end, start + size)] = piece[sl(ov, size)]
        stats.blended += 1
    else:
        # hard stitch: the later patch owns the whole overlap
        acc[sl(start, start + size)] = piece
        if ov > 0:
            stats.stitched += 1


def assemble(patches, grid: PatchGrid, mid_grad: np.ndarray, policy: BlendPolicy,
             stats: SeamStats | None = None) -> np.ndarray:
    """Stitch per-anchor patches into the full frame.

    ``patches`` maps each grid anchor to its output (a dict or a sequence of
    ``(anchor, patch)`` pairs). Rows of patches are merged left to right
    first, then the resulting strips top to bottom. Each overlap is blended
    only when the mean of ``mid_grad`` over it exceeds ``policy.eta``.
    """
    table = dict(patches)
    missing = [a for a in grid.positions if a not in table]
    if missing:
        raise DimensionError(f"missing patches for anchors {missing[:4]}{'...' if len(missing) > 4 else ''}")
    if mid_grad.shape != (grid.height, grid.width):
        raise DimensionError(f"gradient map {mid_grad.shape} does not match grid {grid.height}x{grid.width}")
    stats = stats if stats is not None else SeamStats()
    P = grid.patch
    out = np.zeros((grid.height, grid.width))
    covered = np.zeros((grid.height, grid.width), dtype=bool)
    prev_row_end = 0
    for r in grid.row_anchors:
        strip = np.zeros((P, grid.width))
        prev_col_end = 0
        for c in grid.col_anchors:
            piece = as_image(table[(r, c)])
            if piece.shape != (P, P):
                raise DimensionError(f"patch at {(r, c)} has shape {piece.shape}, expected {(P, P)}")
            gate = (r, r + P, c, max(prev_col_end, c + 1))
            _merge(strip, piece, c, prev_col_end, HORIZONTAL, gate, mid_grad, policy, stats)
            prev_col_end = c + P
        gate = (r, max(prev_row_end, r + 1), 0, grid.width)
        _merge(out, strip, r, prev_row_end, VERTICAL, gate, mid_grad, policy, stats)
        covered[r:r + P] = True
        prev_row_end = r + P
    if not covered.all():
        raise DimensionError("patch grid leaves pixels uncovered")
    return out
