# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled evaluation kernels: multilinear interpolation, analytic set
membership (postfix program) and the Monte Carlo product reduction."""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()

DEF MAXD = 16
DEF MAXK = 8
DEF MAXSTACK = 32

MODE_GRID = 0
MODE_SHAPE = 1


cdef struct CField:
    int mode
    int d
    const double* vals
    cnp.npy_intp dims[MAXD]
    cnp.npy_intp strides[MAXD]
    double lo[MAXD]
    double h[MAXD]
    int ncodes
    const int* codes
    const double* params


cdef double eval_grid(const CField* f, const double* p) noexcept nogil:
    cdef double u
    cdef double frac[MAXD]
    cdef long i0[MAXD]
    cdef int a, corner, d = f.d
    cdef int ncorners = 1 << d
    cdef double w, acc = 0.0
    cdef long idx
    cdef cnp.npy_intp flat
    cdef bint ok
    for a in range(d):
        u = (p[a] - f.lo[a]) / f.h[a] - 0.5
        i0[a] = <long>floor(u)
        frac[a] = u - i0[a]
    for corner in range(ncorners):
        w = 1.0
        flat = 0
        ok = True
        for a in range(d):
            if corner & (1 << a):
                idx = i0[a] + 1
                w *= frac[a]
            else:
                idx = i0[a]
                w *= 1.0 - frac[a]
            if idx < 0 or idx >= f.dims[a]:
                ok = False
                break
            flat += idx * f.strides[a]
        if ok and w != 0.0:
            acc += w * f.vals[flat]
    return acc


cdef bint eval_shape(const CField* f, const double* p) noexcept nogil:
    cdef bint stack[MAXSTACK]
    cdef int sp = 0
    cdef int ic, a, j, op, arity, ax
    cdef int pi = 0
    cdef int d = f.d
    cdef double rr, diff, along, ri, ro, w
    cdef bint v
    for ic in range(f.ncodes):
        op = f.codes[2 * ic]
        arity = f.codes[2 * ic + 1]
        if op == 1:  # ball: center[d], radius
            rr = 0.0
            for a in range(d):
                diff = p[a] - f.params[pi + a]
                rr += diff * diff
            ri = f.params[pi + d]
            v = rr <= ri * ri
            pi += d + 1
            stack[sp] = v
            sp += 1
        elif op == 2:  # annulus: center[d], r_inner, r_outer
            rr = 0.0
            for a in range(d):
                diff = p[a] - f.params[pi + a]
                rr += diff * diff
            ri = f.params[pi + d]
            ro = f.params[pi + d + 1]
            v = (rr >= ri * ri) and (rr <= ro * ro)
            pi += d + 2
            stack[sp] = v
            sp += 1
        elif op == 3:  # slab: axis, center[d], thickness, lateral
            ax = <int>f.params[pi]
            v = True
            for a in range(d):
                diff = p[a] - f.params[pi + 1 + a]
                if diff < 0:
                    diff = -diff
                if a == ax:
                    if diff > 0.5 * f.params[pi + 1 + d]:
                        v = False
                else:
                    if diff > 0.5 * f.params[pi + 2 + d]:
                        v = False
            pi += d + 3
            stack[sp] = v
            sp += 1
        elif op == 4:  # cube: corner[d], side
            v = True
            for a in range(d):
                diff = p[a] - f.params[pi + a]
                if diff < 0 or diff > f.params[pi + d]:
                    v = False
            pi += d + 1
            stack[sp] = v
            sp += 1
        elif op == 5:  # cap: direction[d], r_inner, r_outer, half_width
            rr = 0.0
            along = 0.0
            for a in range(d):
                rr += p[a] * p[a]
                along += p[a] * f.params[pi + a]
            ri = f.params[pi + d]
            ro = f.params[pi + d + 1]
            w = f.params[pi + d + 2]
            v = (rr >= ri * ri) and (rr <= ro * ro) and (along > 0) and (rr - along * along <= w * w)
            pi += d + 3
            stack[sp] = v
            sp += 1
        elif op == 10:  # union(arity)
            v = False
            for j in range(arity):
                sp -= 1
                v = v or stack[sp]
            stack[sp] = v
            sp += 1
        elif op == 11:  # intersection(arity)
            v = True
            for j in range(arity):
                sp -= 1
                v = v and stack[sp]
            stack[sp] = v
            sp += 1
        else:  # 12: difference
            sp -= 2
            stack[sp] = stack[sp] and not stack[sp + 1]
            sp += 1
    return stack[0]


cdef double eval_one(const CField* f, const double* p) noexcept nogil:
    if f.mode == 1:
        return 1.0 if eval_shape(f, p) else 0.0
    return eval_grid(f, p)


cdef int fill_field(CField* cf, field, keep) except -1:
    cdef cnp.ndarray arr
    cdef int a
    cf.mode = field.mode
    cf.d = field.d
    if field.mode == 1:
        arr = np.ascontiguousarray(field.codes, dtype=np.int32)
        keep.append(arr)
        cf.codes = <const int*>cnp.PyArray_DATA(arr)
        cf.ncodes = arr.shape[0]
        arr = np.ascontiguousarray(field.params, dtype=np.float64)
        keep.append(arr)
        cf.params = <const double*>cnp.PyArray_DATA(arr)
        cf.vals = NULL
    else:
        arr = np.ascontiguousarray(field.values, dtype=np.float64)
        keep.append(arr)
        cf.vals = <const double*>cnp.PyArray_DATA(arr)
        for a in range(cf.d):
            cf.dims[a] = arr.shape[a]
            cf.strides[a] = arr.strides[a] // 8
            cf.lo[a] = field.lo[a]
            cf.h[a] = field.h[a]
        cf.codes = NULL
        cf.params = NULL
        cf.ncodes = 0
    return 0


def eval_points(field, double[:, ::1] pts):
    cdef CField cf
    keep = []
    fill_field(&cf, field, keep)
    cdef Py_ssize_t m = pts.shape[0]
    cdef int d = pts.shape[1]
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(m):
            out[i] = eval_one(&cf, &pts[i, 0])
    return out_arr


def rotation2_reduce(
    fields,
    double[:, ::1] x,
    double[:, ::1] cos_a,
    double[:, ::1] sin_a,
    unsigned char[:, ::1] refl,
    double[:, ::1] vertices,
    int n_batches,
):
    """d = 2 rotation path: offsets built inline from angle samples.

    A sample with trig values (c, s) and reflection flag acts on vertex
    (a, b) as (c a - s b', s a + c b') with b' = -b under reflection.
    """
    cdef Py_ssize_t cpts = x.shape[0]
    cdef int n = <int>cos_a.shape[1]
    cdef int k = <int>vertices.shape[0]
    cdef int bs = n // n_batches
    cdef CField cf[MAXK]
    keep = []
    cdef int fi
    for fi in range(k):
        fill_field(&cf[fi], fields[fi], keep)
    sums_arr = np.zeros((cpts, n_batches), dtype=np.float64)
    sumsq_arr = np.zeros((cpts, n_batches), dtype=np.float64)
    cdef double[:, ::1] sums = sums_arr
    cdef double[:, ::1] sumsq = sumsq_arr
    cdef double p[2]
    cdef double prod, v, acc, acc2, cc, ss, a, b
    cdef Py_ssize_t ci
    cdef int bnum, si, s_idx
    with nogil:
        for ci in range(cpts):
            for bnum in range(n_batches):
                acc = 0.0
                acc2 = 0.0
                for si in range(bs):
                    s_idx = bnum * bs + si
                    cc = cos_a[ci, s_idx]
                    ss = sin_a[ci, s_idx]
                    prod = 1.0
                    for fi in range(k):
                        a = vertices[fi, 0]
                        b = vertices[fi, 1]
                        if refl[ci, s_idx]:
                            b = -b
                        p[0] = x[ci, 0] - (cc * a - ss * b)
                        p[1] = x[ci, 1] - (ss * a + cc * b)
                        v = eval_one(&cf[fi], p)
                        prod *= v
                        if prod == 0.0:
                            break
                    acc += prod
                    acc2 += prod * prod
                sums[ci, bnum] = acc
                sumsq[ci, bnum] = acc2
    return sums_arr, sumsq_arr


def product_reduce(fields, double[:, ::1] x, double[:, :, :, ::1] offsets, int n_batches):
    cdef Py_ssize_t c = offsets.shape[0]
    cdef int n = <int>offsets.shape[1]
    cdef int k = <int>offsets.shape[2]
    cdef int d = <int>offsets.shape[3]
    cdef int bs = n // n_batches
    cdef CField cf[MAXK]
    keep = []
    cdef int fi
    for fi in range(k):
        fill_field(&cf[fi], fields[fi], keep)
    sums_arr = np.zeros((c, n_batches), dtype=np.float64)
    sumsq_arr = np.zeros((c, n_batches), dtype=np.float64)
    cdef double[:, ::1] sums = sums_arr
    cdef double[:, ::1] sumsq = sumsq_arr
    cdef double p[MAXD]
    cdef double prod, v, acc, acc2
    cdef Py_ssize_t ci
    cdef int b, si, s_idx, a
    with nogil:
        for ci in range(c):
            for b in range(n_batches):
                acc = 0.0
                acc2 = 0.0
                for si in range(bs):
                    s_idx = b * bs + si
                    prod = 1.0
                    for fi in range(k):
                        for a in range(d):
                            p[a] = x[ci, a] - offsets[ci, s_idx, fi, a]
                        v = eval_one(&cf[fi], p)
                        prod *= v
                        if prod == 0.0:
                            break
                    acc += prod
                    acc2 += prod * prod
                sums[ci, b] = acc
                sumsq[ci, b] = acc2
    return sums_arr, sumsq_arr
