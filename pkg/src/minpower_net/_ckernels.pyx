# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled ray-sampling kernel; see ``_pykernels`` for the reference semantics."""

from libc.math cimport pow, sqrt


cdef inline double _pw(double d2, double h) nogil:
    if h == 2.0:
        return d2 * d2
    if h == 1.0:
        return d2
    return pow(d2, h)


cdef inline bint _relay_at(double ux, double uy, double wx, double wy, double puw_c,
                           double cs, double sn, double r,
                           double t, double h, double c) nogil:
    cdef double px = ux + r * cs
    cdef double py = uy + r * sn
    cdef double dx = px - wx
    cdef double dy = py - wy
    cdef double via = puw_c + (t * _pw(dx * dx + dy * dy, h) + c)
    dx = px - ux
    dy = py - uy
    return via <= t * _pw(dx * dx + dy * dy, h) + c


def apply_obstructor(int[::1] first_excl, double ux, double uy, double wx, double wy,
                     const double[::1] cos_t, const double[::1] sin_t,
                     const double[::1] radii, double t, double n, double c):
    cdef Py_ssize_t k, nrays = first_excl.shape[0]
    cdef int lo, hi, mid, changed = 0
    cdef double h = 0.5 * n
    cdef double dx = wx - ux
    cdef double dy = wy - uy
    cdef double dw = sqrt(dx * dx + dy * dy)
    cdef double puw_c = t * _pw(dx * dx + dy * dy, h) + c
    cdef double cs, sn
    with nogil:
        for k in range(nrays):
            hi = first_excl[k] - 1
            if hi < 1:
                continue
            cs = cos_t[k]
            sn = sin_t[k]
            # relay regions only meet rays pointing towards w, beyond |w|
            if cs * dx + sn * dy <= 0.0 or radii[hi] <= dw:
                continue
            if not _relay_at(ux, uy, wx, wy, puw_c, cs, sn, radii[hi], t, h, c):
                continue
            lo = 1
            while lo < hi:
                mid = (lo + hi) // 2
                if _relay_at(ux, uy, wx, wy, puw_c, cs, sn, radii[mid], t, h, c):
                    hi = mid
                else:
                    lo = mid + 1
            first_excl[k] = hi
            changed += 1
    return changed
