# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs

cnp.import_array()


cdef void _lap2(const double[:, ::1] f, double[:, ::1] out, double c0, double c1) noexcept nogil:
    cdef Py_ssize_t n0 = f.shape[0], n1 = f.shape[1], i, j, ip, im, jp, jm
    cdef double v
    for i in range(n0):
        ip = i + 1 if i + 1 < n0 else 0
        im = i - 1 if i > 0 else n0 - 1
        for j in range(n1):
            jp = j + 1 if j + 1 < n1 else 0
            jm = j - 1 if j > 0 else n1 - 1
            v = f[i, j]
            out[i, j] = c0 * (f[ip, j] + f[im, j] - 2.0 * v) + c1 * (f[i, jp] + f[i, jm] - 2.0 * v)


cdef void _lap4(const double[:, :, :, ::1] f, double[:, :, :, ::1] out,
                double cx, double cz) noexcept nogil:
    cdef Py_ssize_t m = f.shape[0], n = f.shape[2]
    cdef Py_ssize_t a, b, i, j, ap, am, bp, bm, ip, im, jp, jm
    cdef double v, s
    for a in range(m):
        ap = a + 1 if a + 1 < m else 0
        am = a - 1 if a > 0 else m - 1
        for b in range(m):
            bp = b + 1 if b + 1 < m else 0
            bm = b - 1 if b > 0 else m - 1
            for i in range(n):
                ip = i + 1 if i + 1 < n else 0
                im = i - 1 if i > 0 else n - 1
                for j in range(n):
                    jp = j + 1 if j + 1 < n else 0
                    jm = j - 1 if j > 0 else n - 1
                    v = f[a, b, i, j]
                    s = cx * (f[ap, b, i, j] + f[am, b, i, j] + f[a, bp, i, j] + f[a, bm, i, j] - 4.0 * v)
                    s += cz * (f[a, b, ip, j] + f[a, b, im, j] + f[a, b, i, jp] + f[a, b, i, jm] - 4.0 * v)
                    out[a, b, i, j] = s


def laplacian(f, spacings):
    f = np.ascontiguousarray(f, dtype=np.float64)
    out = np.empty_like(f)
    if f.ndim == 2:
        _lap2(f, out, 1.0 / spacings[0] ** 2, 1.0 / spacings[1] ** 2)
    elif f.ndim == 4 and spacings[0] == spacings[1] and spacings[2] == spacings[3]:
        _lap4(f, out, 1.0 / spacings[0] ** 2, 1.0 / spacings[2] ** 2)
    else:
        from ._kernels_py import laplacian as lap
        return lap(f, spacings)
    return out


def exp_pair(psi, mu_p, mu_m, double alpha, double cap):
    cdef const double[::1] p = np.ascontiguousarray(psi, dtype=np.float64).ravel()
    cdef const double[::1] mp = np.ascontiguousarray(mu_p, dtype=np.float64).ravel()
    cdef const double[::1] mm = np.ascontiguousarray(mu_m, dtype=np.float64).ravel()
    cdef Py_ssize_t n = p.shape[0], i
    ep_arr = np.empty(n)
    em_arr = np.empty(n)
    cdef double[::1] ep = ep_arr, em = em_arr
    cdef double t, e
    cdef int bad = 0
    with nogil:
        for i in range(n):
            t = alpha * p[i]
            if fabs(t) > cap:
                bad = 1
                break
            # two exponentials keep the map odd-symmetric to the last bit
            ep[i] = exp(t) * mp[i]
            em[i] = exp(-t) * mm[i]
    if bad:
        raise OverflowError(f"|alpha*psi| exceeds cap {cap}")
    return ep_arr.reshape(np.shape(psi)), em_arr.reshape(np.shape(psi))


def cosh_force(phi, double c, double coef, double cap):
    cdef const double[::1] p = np.ascontiguousarray(phi, dtype=np.float64).ravel()
    cdef Py_ssize_t n = p.shape[0], i
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef double t, e
    cdef int bad = 0
    with nogil:
        for i in range(n):
            t = c * p[i]
            if fabs(t) > cap:
                bad = 1
                break
            out[i] = coef * c * (exp(t) - exp(-t))
    if bad:
        raise OverflowError(f"|charge*phi| exceeds cap {cap}")
    return out_arr.reshape(np.shape(phi))
