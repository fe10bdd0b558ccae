"""Synthetic tomography: ellipse phantoms, parallel-beam Radon transform,
filtered back-projection and angular sampling masks.

Geometry conventions: image pixels and detector bins share one length unit
(one image pixel), the rotation centre sits at the image centre, angles are
``pi * i / A`` for ``i = 0..A-1`` and detector ``k`` is at offset
``(k - (D - 1) / 2) * N / D`` from the centre for an ``N x N`` image.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .grid import DimensionError, as_image, normalize
from .rng import make_rng


@dataclass(frozen=True)
class Ellipse:
    """One additive ellipse in normalized coordinates (x, y in [-1, 1], y up)."""

    cx: float
    cy: float
    a: float
    b: float
    angle: float  # degrees, counter-clockwise
    intensity: float


@dataclass(frozen=True)
class Phantom:
    size: int
    ellipses: tuple[Ellipse, ...]

    def __post_init__(self):
        if not self.ellipses:
            raise ValueError("a phantom needs at least one ellipse")


# Shepp-Logan layout with the "modified" (high-contrast) intensities.
DEFAULT_ELLIPSES = (
    Ellipse(0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
    Ellipse(0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8),
    Ellipse(0.22, 0.0, 0.11, 0.31, -18.0, -0.2),
    Ellipse(-0.22, 0.0, 0.16, 0.41, 18.0, -0.2),
    Ellipse(0.0, 0.35, 0.21, 0.25, 0.0, 0.1),
    Ellipse(0.0, 0.1, 0.046, 0.046, 0.0, 0.1),
    Ellipse(0.0, -0.1, 0.046, 0.046, 0.0, 0.1),
    Ellipse(-0.08, -0.605, 0.046, 0.023, 0.0, 0.1),
    Ellipse(0.0, -0.605, 0.023, 0.023, 0.0, 0.1),
    Ellipse(0.06, -0.605, 0.023, 0.046, 0.0, 0.1),
)


def default_phantom(size: int = 128) -> Phantom:
    return Phantom(size, DEFAULT_ELLIPSES)


def phantom_from_json(text: str, size: int) -> Phantom:
    """Parse a JSON list of ellipse records.

    Each record is an object with keys ``cx, cy, a, b, angle, intensity``
    (``angle`` in degrees, optional, default 0). A top-level object with an
    ``"ellipses"`` key is accepted as well.
    """
    doc = json.loads(text)
    if isinstance(doc, dict):
        doc = doc.get("ellipses")
    if not isinstance(doc, list):
        raise ValueError("phantom JSON must be a list of ellipse records")
    ellipses = []
    for i, rec in enumerate(doc):
        try:
            ellipses.append(
                Ellipse(
                    float(rec["cx"]), float(rec["cy"]), float(rec["a"]), float(rec["b"]),
                    float(rec.get("angle", 0.0)), float(rec["intensity"]),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"ellipse record {i} is malformed: {rec!r}") from exc
    return Phantom(size, tuple(ellipses))


def load_phantom(path, size: int) -> Phantom:
    return phantom_from_json(Path(path).read_text(), size)


def rasterize(ph: Phantom, supersample: int = 4) -> np.ndarray:
    """Render the phantom, averaging ``supersample**2`` clamped sub-samples per pixel."""
    if ph.size < 16:
        raise DimensionError(f"phantom size must be >= 16, got {ph.size}")
    n, ss = ph.size, max(1, int(supersample))
    m = n * ss
    coords = (np.arange(m) + 0.5) / m * 2.0 - 1.0
    x = coords[None, :]
    y = -coords[:, None]
    img = np.zeros((m, m))
    for e in ph.ellipses:
        th = math.radians(e.angle)
        dx, dy = x - e.cx, y - e.cy
        u = dx * math.cos(th) + dy * math.sin(th)
        v = -dx * math.sin(th) + dy * math.cos(th)
        img += np.where((u / e.a) ** 2 + (v / e.b) ** 2 <= 1.0, e.intensity, 0.0)
    np.clip(img, 0.0, 1.0, out=img)
    return img.reshape(n, ss, n, ss).mean(axis=(1, 3))


@dataclass(frozen=True)
class ScanGeometry:
    angles: int
    detectors: int

    def __post_init__(self):
        if self.angles < 2 or self.detectors < 2:
            raise ValueError(f"need at least 2 angles and 2 detectors, got {self.angles}x{self.detectors}")

    @property
    def thetas(self) -> np.ndarray:
        return np.arange(self.angles) * (np.pi / self.angles)


def _detector_offsets(geom: ScanGeometry, size: int) -> np.ndarray:
    spacing = size / geom.detectors
    return (np.arange(geom.detectors) - (geom.detectors - 1) / 2.0) * spacing


def radon(img: np.ndarray, geom: ScanGeometry) -> np.ndarray:
    """Line integrals of ``img`` sampled on ``geom``; shape (angles, detectors).

    Each row is the image rotated by -theta (bilinear) and summed along
    columns, with one sample per pixel of path length.
    """
    img = as_image(img)
    n = img.shape[0]
    if img.shape[1] != n:
        raise DimensionError(f"radon needs a square image, got {img.shape}")
    c = (n - 1) / 2.0
    s = _detector_offsets(geom, n)[None, :]
    t = (np.arange(n) - c)[:, None]
    sino = np.empty((geom.angles, geom.detectors))
    for i, th in enumerate(geom.thetas):
        cos_t, sin_t = math.cos(th), math.sin(th)
        x = s * cos_t - t * sin_t
        y = s * sin_t + t * cos_t
        samples = ndimage.map_coordinates(img, [c + y, c + x], order=1, mode="constant", cval=0.0)
        sino[i] = samples.sum(axis=0)
    return sino


def _ramp_response(n_pad: int, spacing: float) -> np.ndarray:
    # spatial Ram-Lak kernel: 1/4 at 0, -1/(pi k)^2 at odd k, 0 at even k
    k = np.fft.fftfreq(n_pad, d=1.0 / n_pad)
    h = np.zeros(n_pad)
    h[0] = 0.25
    odd = (k.astype(int) % 2) != 0
    h[odd] = -1.0 / (np.pi * k[odd]) ** 2
    return np.real(np.fft.fft(h)) / spacing


def filter_projections(sino: np.ndarray, spacing: float = 1.0) -> np.ndarray:
    """Ram-Lak filter each row, zero-padded to the next power of two >= 2*D."""
    d = sino.shape[1]
    n_pad = max(64, 1 << int(math.ceil(math.log2(2 * d))))
    spectrum = np.fft.fft(sino, n=n_pad, axis=1) * _ramp_response(n_pad, spacing)[None, :]
    return np.real(np.fft.ifft(spectrum, axis=1))[:, :d]


def fbp(sino: np.ndarray, geom: ScanGeometry, out_size: int, normalize_output: bool = False) -> np.ndarray:
    """Filtered back-projection onto an ``out_size`` square grid.

    The reconstruction is returned in the sinogram's intensity units and
    clamped to [0, 1]. With ``normalize_output`` it is min-max normalized
    before clamping instead.
    """
    sino = as_image(sino)
    if sino.shape != (geom.angles, geom.detectors):
        raise DimensionError(f"sinogram {sino.shape} does not match geometry {geom.angles}x{geom.detectors}")
    spacing = out_size / geom.detectors
    q = filter_projections(sino, spacing)
    c = (out_size - 1) / 2.0
    x = (np.arange(out_size) - c)[None, :]
    y = (np.arange(out_size) - c)[:, None]
    det_index = np.arange(geom.detectors, dtype=np.float64)
    centre = (geom.detectors - 1) / 2.0
    recon = np.zeros((out_size, out_size))
    for i, th in enumerate(geom.thetas):
        s = x * math.cos(th) + y * math.sin(th)
        recon += np.interp(s / spacing + centre, det_index, q[i], left=0.0, right=0.0)
    recon *= np.pi / geom.angles
    if normalize_output:
        if not np.any(recon):
            return recon
        return normalize(recon)
    return np.clip(recon, 0.0, 1.0)


def _round_half_up(x: float) -> int:
    # absorbs float error just below a .5 tie
    return int(math.floor(x + 0.5 + 1e-9))


def random_angle_mask(angles: int, ratio: float, seed: int, detectors: int = 1) -> np.ndarray:
    """Drop ``round(ratio * angles)`` whole rows chosen uniformly at random."""
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"mask ratio must lie in [0, 1), got {ratio}")
    removed = _round_half_up(ratio * angles)
    mask = np.ones((angles, detectors), dtype=np.uint8)
    drop = make_rng(int(seed)).permutation(angles)[:removed]
    mask[drop] = 0
    return mask


def periodic_angle_mask(angles: int, ratio: float, detectors: int = 1) -> np.ndarray:
    """Keep rows ``i`` with ``i % k == 0`` where ``k = round(1 / (1 - ratio))``."""
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"mask ratio must lie in [0, 1), got {ratio}")
    k = max(1, _round_half_up(1.0 / (1.0 - ratio)))
    mask = np.zeros((angles, detectors), dtype=np.uint8)
    mask[::k] = 1
    return mask


@dataclass
class SyntheticCase:
    phantom: np.ndarray
    sinogram: np.ndarray
    geometry: ScanGeometry
    extra: dict = field(default_factory=dict)


def synthetic_sinogram(size: int = 128, angles: int = 180, detectors: int | None = None,
                       phantom: Phantom | None = None) -> SyntheticCase:
    """Rasterize a phantom and project it; the sinogram is scaled to [0, 1]."""
    ph = phantom or default_phantom(size)
    if ph.size != size:
        ph = Phantom(size, ph.ellipses)
    img = rasterize(ph)
    geom = ScanGeometry(angles, detectors or size)
    sino = radon(img, geom)
    peak = float(sino.max())
    scale = 1.0 / peak if peak > 0 else 1.0
    return SyntheticCase(img, sino * scale, geom, {"scale": scale})
