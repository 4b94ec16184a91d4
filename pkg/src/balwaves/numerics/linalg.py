"""Closed-form eigen-decomposition of 2x2 complex matrices."""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Eig2:
    values: tuple[complex, complex]
    vectors: tuple[np.ndarray, np.ndarray | None]
    defective: bool = False


def _normalize(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    k = int(np.argmax(np.abs(v)))
    phase = v[k] / abs(v[k])
    return v / phase


def eig2(m) -> Eig2:
    """Eigenpairs of a 2x2 matrix.

    Eigenvalues come from the characteristic quadratic, with the smaller
    root recovered from det / larger root to avoid cancellation.
    Eigenvectors have unit norm and their largest component real positive.
    A defective matrix returns the single eigenvector and ``defective=True``.
    """
    m = np.asarray(m, dtype=complex)
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    tr = a + d
    det = a * d - b * c
    disc = cmath.sqrt(tr * tr / 4 - det)
    half = tr / 2
    big = half + disc if abs(half + disc) >= abs(half - disc) else half - disc
    small = det / big if big != 0 else half - (big - half)
    scale = max(np.abs(m).max(), 1e-300)
    vecs = []
    for lam in (big, small):
        r1 = np.array([b, lam - a])
        r2 = np.array([lam - d, c])
        v = r1 if np.linalg.norm(r1) >= np.linalg.norm(r2) else r2
        if np.linalg.norm(v) <= 1e-14 * scale:
            # m - lam I is (numerically) zero: any vector works
            v = np.array([1.0 + 0j, 0.0]) if not vecs else np.array([0.0, 1.0 + 0j])
        vecs.append(_normalize(v))
    defective = False
    if abs(big - small) <= 1e-12 * scale:
        residual = np.linalg.norm(m - big * np.eye(2))
        if residual > 1e-12 * scale:
            defective = True
    if defective:
        return Eig2((big, small), (vecs[0], None), True)
    return Eig2((big, small), (vecs[0], vecs[1]))
