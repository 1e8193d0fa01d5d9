# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled combining kernel; mirrors _ref.combine_terms.

Single fused pass per slot: build the superposed uplink field once,
then walk each client's serving links accumulating the four receive
components.  Summation order (clients outer, links inner, antennas
innermost) matches the shapes, not the numpy einsum order, so results
agree with the reference to rounding, not bitwise.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def combine_terms(cnp.complex128_t[:, :, :, ::1] h,
                  cnp.complex128_t[:, :, :, ::1] h_hat,
                  cnp.complex128_t[:, :, ::1] z,
                  cnp.complex128_t[:, ::1] x,
                  double[:, ::1] mask,
                  double[::1] inv_c,
                  double alpha,
                  int n_eff):
    cdef Py_ssize_t nb = h.shape[0]
    cdef Py_ssize_t nc = h.shape[1]
    cdef Py_ssize_t nl = h.shape[2]
    cdef Py_ssize_t nm = h.shape[3]

    sig_arr = np.empty(nb, dtype=np.complex128)
    it1_arr = np.empty(nb, dtype=np.complex128)
    it2_arr = np.empty(nb, dtype=np.complex128)
    noi_arr = np.empty(nb, dtype=np.complex128)
    field_arr = np.empty((nl, nm), dtype=np.complex128)

    cdef cnp.complex128_t[::1] sig = sig_arr
    cdef cnp.complex128_t[::1] it1 = it1_arr
    cdef cnp.complex128_t[::1] it2 = it2_arr
    cdef cnp.complex128_t[::1] noi = noi_arr
    cdef cnp.complex128_t[:, ::1] field = field_arr

    cdef Py_ssize_t b, n, l, m
    cdef double complex xv, hv, ev, sv, acc_sig, acc_i1, acc_i2, acc_noi
    cdef double complex u, e, w
    cdef double q, ic
    cdef double scale = alpha / n_eff

    for b in range(nb):
        for l in range(nl):
            for m in range(nm):
                field[l, m] = 0.0
        for n in range(nc):
            xv = x[b, n]
            if xv.real == 0.0 and xv.imag == 0.0:
                continue
            for l in range(nl):
                for m in range(nm):
                    field[l, m] = field[l, m] + xv * h[b, n, l, m]

        acc_sig = 0.0
        acc_i1 = 0.0
        acc_i2 = 0.0
        acc_noi = 0.0
        for n in range(nc):
            q = 0.0
            u = 0.0
            e = 0.0
            w = 0.0
            for l in range(nl):
                if mask[n, l] == 0.0:
                    continue
                for m in range(nm):
                    hv = h[b, n, l, m]
                    ev = h_hat[b, n, l, m] - hv
                    sv = field[l, m]
                    q += hv.real * hv.real + hv.imag * hv.imag
                    u += hv.conjugate() * sv
                    e += ev.conjugate() * sv
                    w += (hv + ev).conjugate() * z[b, l, m]
            ic = inv_c[n]
            xv = x[b, n]
            acc_sig += q * ic * xv
            acc_i1 += (u - q * xv) * ic
            acc_i2 += e * ic
            acc_noi += w * ic
        sig[b] = scale * acc_sig
        it1[b] = scale * acc_i1
        it2[b] = scale * acc_i2
        noi[b] = acc_noi / n_eff

    return sig_arr, it1_arr, it2_arr, noi_arr
