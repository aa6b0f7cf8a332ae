# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stencil kernels for the n = 1 nilmanifold lattice.

Arrays are C-contiguous ``(Nx, Ny, Nt)``.  ``sx = Nt / (2 Nx)`` is the t-index
shift per x-index applied when y wraps; ``sy = Nt / (2 Ny)`` the shift per
y-index applied when x wraps.  Forward frame differences are

    gx = D_x^+ u + 2y D_t^+ u,    gy = D_y^+ u - 2x D_t^+ u

and ``adjoint_frame`` returns ``-(D_X^T gx + D_Y^T gy)``, so that the
sub-Laplacian is ``kappa * adjoint_frame(forward_frame(u))``.
"""
from libc.math cimport INFINITY
from libc.stdlib cimport malloc, free


cdef inline Py_ssize_t tmod(Py_ssize_t k, Py_ssize_t nt) noexcept nogil:
    k = k % nt
    if k < 0:
        k += nt
    return k


cdef inline void _rotated(const double* src, double* dst, Py_ssize_t Nt,
                          Py_ssize_t shift) noexcept nogil:
    # dst[k] = src[(k + shift) mod Nt], with dst[Nt] = dst[0] as a guard
    cdef Py_ssize_t k, head = Nt - shift
    for k in range(head):
        dst[k] = src[k + shift]
    for k in range(head, Nt):
        dst[k] = src[k - head]
    dst[Nt] = dst[0]


cdef inline void _forward_row(const double* c, const double* xr, const double* yr,
                              double* px, double* py, Py_ssize_t Nt, double inv_hx,
                              double inv_hy, double inv_ht, double cx,
                              double cy) noexcept nogil:
    cdef Py_ssize_t k, last = Nt - 1
    cdef double dtu
    for k in range(last):
        dtu = (c[k + 1] - c[k]) * inv_ht
        px[k] = (xr[k] - c[k]) * inv_hx + cy * dtu
        py[k] = (yr[k] - c[k]) * inv_hy - cx * dtu
    dtu = (c[0] - c[last]) * inv_ht
    px[last] = (xr[last] - c[last]) * inv_hx + cy * dtu
    py[last] = (yr[last] - c[last]) * inv_hy - cx * dtu


cdef double _forward(const double* u, double* gx, double* gy,
                     Py_ssize_t Nx, Py_ssize_t Ny, Py_ssize_t Nt,
                     double hx, double hy, double ht,
                     Py_ssize_t sx, Py_ssize_t sy, double* scratch,
                     double* vol) noexcept nogil:
    # returns sum |D u|^2; vol (if not NULL) receives sum u^4
    cdef Py_ssize_t i, j, k, row
    cdef double* xbuf = scratch
    cdef double* ybuf = scratch + (Nt + 1)
    cdef double* acc = scratch + 3 * (Nt + 1)
    cdef double* acc4 = scratch + 4 * (Nt + 1)
    cdef const double* c
    cdef const double* xr
    cdef const double* yr
    cdef double* px
    cdef double* py
    cdef double inv_hx = 1.0 / hx, inv_hy = 1.0 / hy, inv_ht = 1.0 / ht
    cdef double s = 0.0, v = 0.0, c2
    for k in range(Nt):
        acc[k] = 0.0
        acc4[k] = 0.0
    for i in range(Nx):
        for j in range(Ny):
            row = (i * Ny + j) * Nt
            c = u + row
            if i + 1 < Nx:
                xr = c + Ny * Nt
            else:
                _rotated(u + j * Nt, xbuf, Nt, tmod(j * sy, Nt))
                xr = xbuf
            if j + 1 < Ny:
                yr = c + Nt
            else:
                _rotated(u + i * Ny * Nt, ybuf, Nt, tmod(-i * sx, Nt))
                yr = ybuf
            px = gx + row
            py = gy + row
            _forward_row(c, xr, yr, px, py, Nt, inv_hx, inv_hy, inv_ht,
                         2.0 * i * hx, 2.0 * j * hy)
            # separate sweeps keep each loop simple enough to vectorize
            for k in range(Nt):
                acc[k] += px[k] * px[k] + py[k] * py[k]
            for k in range(Nt):
                c2 = c[k] * c[k]
                acc4[k] += c2 * c2
    for k in range(Nt):
        s += acc[k]
        v += acc4[k]
    if vol != NULL:
        vol[0] = v
    return s


cdef inline void _adjoint_row(const double* a, const double* b, const double* xr,
                              const double* yr, double* po, Py_ssize_t Nt,
                              double inv_hx, double inv_hy, double inv_ht,
                              double cx, double cy, double scale) noexcept nogil:
    cdef Py_ssize_t k, last = Nt - 1
    po[0] = scale * (((a[0] - xr[0]) * inv_hx + cy * (a[0] - a[last]) * inv_ht)
                     + ((b[0] - yr[0]) * inv_hy - cx * (b[0] - b[last]) * inv_ht))
    for k in range(1, Nt):
        po[k] = scale * (((a[k] - xr[k]) * inv_hx + cy * (a[k] - a[k - 1]) * inv_ht)
                         + ((b[k] - yr[k]) * inv_hy - cx * (b[k] - b[k - 1]) * inv_ht))


cdef void _adjoint(const double* gx, const double* gy, double* out,
                   Py_ssize_t Nx, Py_ssize_t Ny, Py_ssize_t Nt,
                   double hx, double hy, double ht,
                   Py_ssize_t sx, Py_ssize_t sy, double scale,
                   double* scratch) noexcept nogil:
    cdef Py_ssize_t i, j, row
    cdef double* xbuf = scratch
    cdef double* ybuf = scratch + (Nt + 1)
    cdef const double* xr
    cdef const double* yr
    cdef double inv_hx = 1.0 / hx, inv_hy = 1.0 / hy, inv_ht = 1.0 / ht
    for i in range(Nx):
        for j in range(Ny):
            row = (i * Ny + j) * Nt
            if i > 0:
                xr = gx + row - Ny * Nt
            else:
                _rotated(gx + ((Nx - 1) * Ny + j) * Nt, xbuf, Nt, tmod(-j * sy, Nt))
                xr = xbuf
            if j > 0:
                yr = gy + row - Nt
            else:
                _rotated(gy + (i * Ny + Ny - 1) * Nt, ybuf, Nt, tmod(i * sx, Nt))
                yr = ybuf
            _adjoint_row(gx + row, gy + row, xr, yr, out + row, Nt, inv_hx, inv_hy,
                         inv_ht, 2.0 * i * hx, 2.0 * j * hy, scale)


cdef double* _scratch(Py_ssize_t nt) except NULL:
    cdef double* p = <double*> malloc(5 * (nt + 1) * sizeof(double))
    if p == NULL:
        raise MemoryError()
    return p


def forward_frame(const double[:, :, ::1] u, double[:, :, ::1] gx,
                  double[:, :, ::1] gy, double hx, double hy, double ht,
                  Py_ssize_t sx, Py_ssize_t sy):
    """Fill ``gx, gy`` with forward frame differences; return sum of squares."""
    cdef double s
    cdef double* tmp = _scratch(u.shape[2])
    with nogil:
        s = _forward(&u[0, 0, 0], &gx[0, 0, 0], &gy[0, 0, 0], u.shape[0], u.shape[1],
                     u.shape[2], hx, hy, ht, sx, sy, tmp, NULL)
    free(tmp)
    return s


def adjoint_frame(const double[:, :, ::1] gx, const double[:, :, ::1] gy,
                  double[:, :, ::1] out, double hx, double hy, double ht,
                  Py_ssize_t sx, Py_ssize_t sy):
    cdef double* tmp = _scratch(gx.shape[2])
    with nogil:
        _adjoint(&gx[0, 0, 0], &gy[0, 0, 0], &out[0, 0, 0], gx.shape[0], gx.shape[1],
                 gx.shape[2], hx, hy, ht, sx, sy, 1.0, tmp)
    free(tmp)


def sublaplacian(const double[:, :, ::1] u, double[:, :, ::1] out,
                 double[:, :, ::1] gx, double[:, :, ::1] gy, double hx,
                 double hy, double ht, Py_ssize_t sx, Py_ssize_t sy,
                 double kappa):
    """``out = kappa * Lap(u)``; returns ``kappa * sum |D u|^2`` (unweighted)."""
    cdef double s
    cdef double* tmp = _scratch(u.shape[2])
    with nogil:
        s = _forward(&u[0, 0, 0], &gx[0, 0, 0], &gy[0, 0, 0], u.shape[0], u.shape[1],
                     u.shape[2], hx, hy, ht, sx, sy, tmp, NULL)
        _adjoint(&gx[0, 0, 0], &gy[0, 0, 0], &out[0, 0, 0], u.shape[0], u.shape[1],
                 u.shape[2], hx, hy, ht, sx, sy, kappa, tmp)
    free(tmp)
    return kappa * s


cdef void _rhs(const double* u, double* rhs, double* lap, double* gx, double* gy,
               Py_ssize_t Nx, Py_ssize_t Ny, Py_ssize_t Nt,
               double hx, double hy, double ht, Py_ssize_t sx, Py_ssize_t sy,
               double kappa, double w, bint diag, double* scratch,
               double* stats) noexcept nogil:
    # stats <- (E, V, Q1, Q2, umin, umax); the last four only when diag is set
    cdef Py_ssize_t n = Nx * Ny * Nt, m, lane
    cdef double s, v, r, val, inv_u2, R, E, V
    # four independent lanes keep the reductions off one dependency chain
    cdef double q1[4]
    cdef double q2[4]
    cdef double lo[4]
    cdef double hi[4]
    s = _forward(u, gx, gy, Nx, Ny, Nt, hx, hy, ht, sx, sy, scratch, &v)
    _adjoint(gx, gy, lap, Nx, Ny, Nt, hx, hy, ht, sx, sy, kappa, scratch)
    E = kappa * s * w
    V = v * w
    r = 4.0 * E / V
    if diag:
        for lane in range(4):
            q1[lane] = 0.0
            q2[lane] = 0.0
            lo[lane] = INFINITY
            hi[lane] = -INFINITY
        for m in range(n):
            lane = m & 3
            val = u[m]
            inv_u2 = 1.0 / (val * val)
            rhs[m] = 2.0 * lap[m] * inv_u2 + 0.5 * r * val
            R = -4.0 * lap[m] * inv_u2 / val
            q1[lane] += (R - r) * (R - r) * (val * val) * (val * val)
            q2[lane] += lap[m] * lap[m] * inv_u2
            if val < lo[lane]:
                lo[lane] = val
            if val > hi[lane]:
                hi[lane] = val
        stats[2] = ((q1[0] + q1[1]) + (q1[2] + q1[3])) * w
        stats[3] = ((q2[0] + q2[1]) + (q2[2] + q2[3])) * w
        stats[4] = min(min(lo[0], lo[1]), min(lo[2], lo[3]))
        stats[5] = max(max(hi[0], hi[1]), max(hi[2], hi[3]))
    else:
        for m in range(n):
            val = u[m]
            rhs[m] = 2.0 * lap[m] / (val * val) + 0.5 * r * val
    stats[0] = E
    stats[1] = V


cdef inline double _axpy(const double* u, const double* k, double a, double* out,
                         double* acc, double c, bint first, Py_ssize_t n) noexcept nogil:
    # out = u + a k and acc (+)= c k; returns min(out)
    cdef Py_ssize_t m
    cdef double lo = INFINITY, val
    for m in range(n):
        val = u[m] + a * k[m]
        out[m] = val
        if val < lo:
            lo = val
    if first:
        for m in range(n):
            acc[m] = k[m]
    else:
        for m in range(n):
            acc[m] += c * k[m]
    return lo


def flow_eval(const double[:, :, ::1] u, double[:, :, ::1] rhs,
              double[:, :, ::1] lap, double[:, :, ::1] gx,
              double[:, :, ::1] gy, double hx, double hy, double ht,
              Py_ssize_t sx, Py_ssize_t sy, double kappa, double w,
              bint diag):
    """Right-hand side of the n = 1 flow with zero base curvature.

    ``rhs = 2 Lap(u)/u^2 + r u/2`` where ``r = 4 E / V``.  Returns
    ``(E, V, Q1, Q2, umin, umax)`` with ``E = int |grad u|^2``,
    ``V = int u^4``, ``Q1 = int (R - r)^2 u^4`` and ``Q2 = int Lap(u)^2 / u^2``
    (the last four only when ``diag`` is set; NaN otherwise).
    """
    cdef double stats[6]
    cdef double* tmp = _scratch(u.shape[2])
    with nogil:
        _rhs(&u[0, 0, 0], &rhs[0, 0, 0], &lap[0, 0, 0], &gx[0, 0, 0], &gy[0, 0, 0],
             u.shape[0], u.shape[1], u.shape[2], hx, hy, ht, sx, sy, kappa, w, diag,
             tmp, stats)
    free(tmp)
    if not diag:
        nan = float("nan")
        return stats[0], stats[1], nan, nan, nan, nan
    return stats[0], stats[1], stats[2], stats[3], stats[4], stats[5]


def rk4_step(const double[:, :, ::1] u, double[:, :, ::1] out,
             double[:, :, :, ::1] work, double hx, double hy, double ht,
             Py_ssize_t sx, Py_ssize_t sy, double kappa, double w, double dt):
    """One classical Runge-Kutta step of the n = 1 flow, ``out <- u(t + dt)``.

    ``work`` holds at least 5 scratch fields; ``out`` doubles as the stage
    accumulator, so the result is ``u + dt/6 (((k1 + 2 k2) + 2 k3) + k4)``.
    Returns the stage-one diagnostics ``(E, V, Q1, Q2, umin, umax)`` of ``u``
    followed by the minimum over all intermediate stages and the output
    (non-positive means the step must be rejected; ``out`` is then unspecified).
    """
    cdef Py_ssize_t Nx = u.shape[0], Ny = u.shape[1], Nt = u.shape[2]
    cdef Py_ssize_t n = Nx * Ny * Nt, m
    if work.shape[0] < 5 or work.shape[1] != Nx or work.shape[2] != Ny or work.shape[3] != Nt:
        raise ValueError("work must have shape (>=5, Nx, Ny, Nt)")
    cdef const double* pu = &u[0, 0, 0]
    cdef double* po = &out[0, 0, 0]
    cdef double* k = &work[0, 0, 0, 0]
    cdef double* st = &work[1, 0, 0, 0]
    cdef double* lap = &work[2, 0, 0, 0]
    cdef double* gx = &work[3, 0, 0, 0]
    cdef double* gy = &work[4, 0, 0, 0]
    cdef double stats[6]
    cdef double other[6]
    cdef double lo, val, sixth = dt / 6.0
    cdef double* tmp = _scratch(Nt)
    with nogil:
        _rhs(pu, k, lap, gx, gy, Nx, Ny, Nt, hx, hy, ht, sx, sy, kappa, w, True, tmp, stats)
        lo = _axpy(pu, k, 0.5 * dt, st, po, 1.0, True, n)
        if lo > 0.0:
            _rhs(st, k, lap, gx, gy, Nx, Ny, Nt, hx, hy, ht, sx, sy, kappa, w, False, tmp, other)
            lo = min(lo, _axpy(pu, k, 0.5 * dt, st, po, 2.0, False, n))
        if lo > 0.0:
            _rhs(st, k, lap, gx, gy, Nx, Ny, Nt, hx, hy, ht, sx, sy, kappa, w, False, tmp, other)
            lo = min(lo, _axpy(pu, k, dt, st, po, 2.0, False, n))
        if lo > 0.0:
            _rhs(st, k, lap, gx, gy, Nx, Ny, Nt, hx, hy, ht, sx, sy, kappa, w, False, tmp, other)
            for m in range(n):
                po[m] = pu[m] + sixth * (po[m] + k[m])
            for m in range(n):
                val = po[m]
                if val < lo:
                    lo = val
    free(tmp)
    return stats[0], stats[1], stats[2], stats[3], stats[4], stats[5], lo
