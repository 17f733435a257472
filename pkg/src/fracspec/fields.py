"""Coefficient fields: constants, callables, and sampled arrays.

Coefficient data enters the package either as a constant, as a
closed-form evaluator ``x -> value``, or as an array of samples on a
uniform grid.  Sampled arrays are wrapped in :class:`SampledField`,
which interpolates multilinearly; the interpolation choice is recorded
so reports can state it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def multilinear(values: np.ndarray, origin, h, x, periodic: bool = False):
    """Multilinear interpolation of ``values`` sampled on a uniform grid.

    values: nd array of samples, one axis per space dimension.
    origin: coordinates of the sample with index (0, ..., 0).
    h: grid spacing, scalar or per-axis.
    x: query points, shape (npts, ndim) or (ndim,).
    periodic: wrap indices instead of clamping at the array edge.
    """
    values = np.asarray(values, dtype=float)
    nd = values.ndim
    x = np.atleast_2d(np.asarray(x, dtype=float))
    h = np.broadcast_to(np.asarray(h, dtype=float), (nd,))
    origin = np.broadcast_to(np.asarray(origin, dtype=float), (nd,))
    t = (x - origin) / h
    i0 = np.floor(t).astype(np.int64)
    frac = t - i0
    out = np.zeros(x.shape[0])
    # accumulate over the 2^nd cell corners
    for corner in range(1 << nd):
        w = np.ones(x.shape[0])
        idx = []
        for ax in range(nd):
            bit = (corner >> ax) & 1
            ia = i0[:, ax] + bit
            if periodic:
                ia = ia % values.shape[ax]
            else:
                ia = np.clip(ia, 0, values.shape[ax] - 1)
            idx.append(ia)
            w = w * (frac[:, ax] if bit else 1.0 - frac[:, ax])
        out += w * values[tuple(idx)]
    return out if out.shape[0] > 1 else float(out[0])


@dataclass(frozen=True)
class SampledField:
    """Scalar or matrix field given by samples on a uniform grid."""

    values: np.ndarray
    origin: tuple
    h: float
    periodic: bool = False
    interpolation: str = field(default="multilinear")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        nd = len(self.origin)
        extra = self.values.shape[nd:]
        if not extra:
            return multilinear(self.values, self.origin, self.h, x, self.periodic)
        flat = self.values.reshape(self.values.shape[:nd] + (-1,))
        comps = [
            multilinear(flat[..., k], self.origin, self.h, x, self.periodic)
            for k in range(flat.shape[-1])
        ]
        return np.asarray(comps).reshape(extra)
