"""NumPy implementations of the ray-sampling kernels.

These mirror ``_ckernels.pyx`` operation for operation so both back ends give
bit-identical grids.
"""

from __future__ import annotations

import numpy as np


def _relay_at(ux, uy, wx, wy, puw_c, cos_t, sin_t, radii, rays, idx, t, h, c):
    r = radii[idx]
    px = ux + r * cos_t[rays]
    py = uy + r * sin_t[rays]
    dx = px - wx
    dy = py - wy
    via = puw_c + (t * (dx * dx + dy * dy) ** h + c)
    dx = px - ux
    dy = py - uy
    return via <= t * (dx * dx + dy * dy) ** h + c


def apply_obstructor(first_excl, ux, uy, wx, wy, cos_t, sin_t, radii, t, n, c):
    """Lower ``first_excl[k]`` to the first grid index on ray ``k`` relayed by ``w``.

    ``first_excl`` holds, per ray, the smallest radial index whose sample is
    outside the residual region (``len(radii)`` when none is). Relay-region
    membership is monotone along a ray from ``u``, so a binary search below the
    current bound suffices. Returns the number of rays that changed.
    """
    h = 0.5 * n
    dx = wx - ux
    dy = wy - uy
    puw_c = t * (dx * dx + dy * dy) ** h + c
    dw = np.sqrt(dx * dx + dy * dy)
    rays = np.flatnonzero(first_excl > 1)
    # relay regions only meet rays pointing towards w, beyond |w|
    toward = (cos_t[rays] * dx + sin_t[rays] * dy > 0.0) & (radii[first_excl[rays] - 1] > dw)
    rays = rays[toward]
    if rays.size == 0:
        return 0
    hi = first_excl[rays] - 1
    hit = _relay_at(ux, uy, wx, wy, puw_c, cos_t, sin_t, radii, rays, hi, t, h, c)
    rays = rays[hit]
    if rays.size == 0:
        return 0
    hi = hi[hit]
    lo = np.ones_like(hi)
    while True:
        open_ = lo < hi
        if not open_.any():
            break
        mid = (lo + hi) // 2
        r = _relay_at(ux, uy, wx, wy, puw_c, cos_t, sin_t, radii, rays, mid, t, h, c)
        hi = np.where(open_ & r, mid, hi)
        lo = np.where(open_ & ~r, mid + 1, lo)
    first_excl[rays] = hi
    return int(rays.size)


def dense_first_excl(ux, uy, obstructors, cos_t, sin_t, radii, t, n, c):
    """Brute-force twin of repeated ``apply_obstructor``: every grid point is tested."""
    h = 0.5 * n
    nr = len(radii)
    px = ux + radii[None, :] * cos_t[:, None]
    py = uy + radii[None, :] * sin_t[:, None]
    dx = px - ux
    dy = py - uy
    direct = t * (dx * dx + dy * dy) ** h + c
    excluded = np.zeros(px.shape, dtype=bool)
    for wx, wy in obstructors:
        ex = wx - ux
        ey = wy - uy
        puw_c = t * (ex * ex + ey * ey) ** h + c
        dx = px - wx
        dy = py - wy
        excluded |= puw_c + (t * (dx * dx + dy * dy) ** h + c) <= direct
    excluded[:, 0] = False
    first = np.where(excluded.any(axis=1), excluded.argmax(axis=1), nr)
    return first.astype(np.int32)
