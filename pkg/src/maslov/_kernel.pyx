# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sweep kernel.

C translation of the hot loop in ``_kernel_py``: RK4 frame steps on
precomputed coefficient slices, periodic Gram-Schmidt renormalization, and
per-step observation (determinant, adjugate surrogate, Jacobi eigenpairs,
greedy branch matching). Mirrors the pure-python kernel operation for
operation; behavioral changes must land in both.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport NAN, fabs, hypot, isfinite, sqrt

cnp.import_array()

BACKEND_NAME = "compiled"

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_AMBIGUOUS = 2
STATUS_DEGENERATE = 3

cdef double MIN_OVERLAP = 1.0 / sqrt(2.0)
cdef int JACOBI_SWEEP_LIMIT = 60


cdef inline void matmul(const double* a, const double* b, double* out, int n) noexcept nogil:
    cdef int i, j, k
    cdef double acc
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += a[i * n + k] * b[k * n + j]
            out[i * n + j] = acc


cdef inline double frob2(const double* a, int nn) noexcept nogil:
    cdef int i
    cdef double s = 0.0
    for i in range(nn):
        s += a[i] * a[i]
    return s


cdef double lu_det(const double* a, double* work, int n) noexcept nogil:
    """Determinant by partially pivoted LU on a scratch copy; 0 on breakdown."""
    cdef int i, j, k, piv
    cdef double best, det, factor
    for i in range(n * n):
        work[i] = a[i]
    det = 1.0
    for k in range(n):
        piv = k
        best = fabs(work[k * n + k])
        for i in range(k + 1, n):
            if fabs(work[i * n + k]) > best:
                best = fabs(work[i * n + k])
                piv = i
        if work[piv * n + k] == 0.0:
            return 0.0
        if piv != k:
            for j in range(n):
                best = work[k * n + j]
                work[k * n + j] = work[piv * n + j]
                work[piv * n + j] = best
            det = -det
        det *= work[k * n + k]
        for i in range(k + 1, n):
            factor = work[i * n + k] / work[k * n + k]
            for j in range(k + 1, n):
                work[i * n + j] -= factor * work[k * n + j]
    return det


cdef double det3(const double* a) noexcept nogil:
    return (
        a[0] * (a[4] * a[8] - a[5] * a[7])
        - a[1] * (a[3] * a[8] - a[5] * a[6])
        + a[2] * (a[3] * a[7] - a[4] * a[6])
    )


cdef double adjugate(const double* a, double* adj, double* minor, double* work, int n) noexcept nogil:
    """Fill adj with the adjugate of a; returns det(a). Valid on singular a."""
    cdef int i, j, r, c, ri, ci
    cdef double m, det
    if n == 1:
        adj[0] = 1.0
        return a[0]
    if n == 2:
        adj[0] = a[3]
        adj[1] = -a[1]
        adj[2] = -a[2]
        adj[3] = a[0]
        return a[0] * a[3] - a[1] * a[2]
    for i in range(n):
        for j in range(n):
            ri = 0
            for r in range(n):
                if r == i:
                    continue
                ci = 0
                for c in range(n):
                    if c == j:
                        continue
                    minor[ri * (n - 1) + ci] = a[r * n + c]
                    ci += 1
                ri += 1
            if n == 3:
                m = minor[0] * minor[3] - minor[1] * minor[2]
            elif n == 4:
                m = det3(minor)
            else:
                m = lu_det(minor, work, n - 1)
            if (i + j) % 2 == 0:
                adj[j * n + i] = m
            else:
                adj[j * n + i] = -m
    if n == 3:
        det = det3(a)
    else:
        det = lu_det(a, work, n)
    return det


cdef int jacobi(double* w, double* v, double* vals, int n, double* col_buf) noexcept nogil:
    """Cyclic Jacobi on symmetric w (destroyed); eigenvectors into v columns.

    Values come out ascending with the matching column order, like the
    python-side solver.
    """
    cdef int i, j, p, q, sweep, best
    cdef double norm, off2, tol, apq, theta, t, c, s, tmp
    for i in range(n):
        for j in range(n):
            v[i * n + j] = 1.0 if i == j else 0.0
    if n == 1:
        vals[0] = w[0]
        return 0
    norm = sqrt(frob2(w, n * n))
    if norm == 0.0:
        for i in range(n):
            vals[i] = 0.0
        return 0
    tol = 1e-14 * norm
    for sweep in range(JACOBI_SWEEP_LIMIT):
        off2 = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off2 += w[p * n + q] * w[p * n + q] + w[q * n + p] * w[q * n + p]
        if sqrt(off2) < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = w[p * n + q]
                if fabs(apq) < 1e-300 or fabs(apq) < 1e-18 * norm:
                    continue
                theta = 0.5 * (w[q * n + q] - w[p * n + p]) / apq
                if fabs(theta) > 1e100:
                    t = 0.5 / theta
                else:
                    if theta > 0.0:
                        t = 1.0 / (theta + hypot(theta, 1.0))
                    elif theta < 0.0:
                        t = -1.0 / (-theta + hypot(theta, 1.0))
                    else:
                        t = 1.0
                c = 1.0 / hypot(t, 1.0)
                s = t * c
                for i in range(n):
                    tmp = c * w[i * n + p] - s * w[i * n + q]
                    w[i * n + q] = s * w[i * n + p] + c * w[i * n + q]
                    w[i * n + p] = tmp
                for i in range(n):
                    tmp = c * w[p * n + i] - s * w[q * n + i]
                    w[q * n + i] = s * w[p * n + i] + c * w[q * n + i]
                    w[p * n + i] = tmp
                w[p * n + q] = 0.0
                w[q * n + p] = 0.0
                for i in range(n):
                    tmp = c * v[i * n + p] - s * v[i * n + q]
                    v[i * n + q] = s * v[i * n + p] + c * v[i * n + q]
                    v[i * n + p] = tmp
    for i in range(n):
        vals[i] = w[i * n + i]
    # selection sort ascending, swapping eigenvector columns along
    for i in range(n - 1):
        best = i
        for j in range(i + 1, n):
            if vals[j] < vals[best]:
                best = j
        if best != i:
            tmp = vals[i]
            vals[i] = vals[best]
            vals[best] = tmp
            for j in range(n):
                tmp = v[j * n + i]
                v[j * n + i] = v[j * n + best]
                v[j * n + best] = tmp
    return 0


cdef int mgs2(double* f, int rows, int cols) noexcept nogil:
    """Modified Gram-Schmidt with a second pass; 1 on rank deficiency."""
    cdef int i, j, r, it
    cdef double scale, dot, nrm
    scale = sqrt(frob2(f, rows * cols))
    if scale == 0.0:
        return 1
    for j in range(cols):
        for it in range(2):
            for i in range(j):
                dot = 0.0
                for r in range(rows):
                    dot += f[r * cols + i] * f[r * cols + j]
                for r in range(rows):
                    f[r * cols + j] -= dot * f[r * cols + i]
        nrm = 0.0
        for r in range(rows):
            nrm += f[r * cols + j] * f[r * cols + j]
        nrm = sqrt(nrm)
        if nrm <= 1e-13 * scale:
            return 1
        for r in range(rows):
            f[r * cols + j] /= nrm
    return 0


cdef void rk4_step(
    double* x,
    double* y,
    const double* c0,
    const double* c1,
    const double* c2,
    double h,
    double* kx,
    double* ky,
    double* xa,
    double* ya,
    double* tmp,
    int n,
) noexcept nogil:
    """Classical RK4 for X' = Y, Y' = C(x) X; accumulates into x, y."""
    cdef int i, nn = n * n
    cdef double h2 = 0.5 * h, h6 = h / 6.0
    # k1
    matmul(c0, x, ky, n)
    for i in range(nn):
        kx[i] = y[i]
        xa[i] = x[i] + h6 * kx[i]
        ya[i] = y[i] + h6 * ky[i]
    # k2: state x + h/2 k1x, y + h/2 k1y
    for i in range(nn):
        tmp[i] = x[i] + h2 * kx[i]
    for i in range(nn):
        kx[i] = y[i] + h2 * ky[i]
    matmul(c1, tmp, ky, n)
    for i in range(nn):
        xa[i] += 2.0 * h6 * kx[i]
        ya[i] += 2.0 * h6 * ky[i]
    # k3
    for i in range(nn):
        tmp[i] = x[i] + h2 * kx[i]
    for i in range(nn):
        kx[i] = y[i] + h2 * ky[i]
    matmul(c1, tmp, ky, n)
    for i in range(nn):
        xa[i] += 2.0 * h6 * kx[i]
        ya[i] += 2.0 * h6 * ky[i]
    # k4
    for i in range(nn):
        tmp[i] = x[i] + h * kx[i]
    for i in range(nn):
        kx[i] = y[i] + h * ky[i]
    matmul(c2, tmp, ky, n)
    for i in range(nn):
        x[i] = xa[i] + h6 * kx[i]
        y[i] = ya[i] + h6 * ky[i]


def run_sweep_chunk(
    double[:, :, ::1] c_half,
    double h,
    long step_offset,
    long renorm_every,
    object x0,
    object y0,
    object w0,
    double det_guard_rel,
):
    """Advance (len(c_half) - 1) // 2 steps; see the python kernel docstring."""
    cdef int n = c_half.shape[1]
    cdef int nn = n * n
    cdef long m = (c_half.shape[0] - 1) // 2
    cdef long i, istep
    cdef int j, r, col, row, bi, bj
    cdef int status = STATUS_OK
    cdef long status_step = m

    x_arr = np.ascontiguousarray(x0, dtype=np.float64).copy()
    y_arr = np.ascontiguousarray(y0, dtype=np.float64).copy()
    w_arr = np.ascontiguousarray(w0, dtype=np.float64).copy()

    out_x = np.empty((m, n, n))
    out_y = np.empty((m, n, n))
    out_det = np.empty(m)
    out_nu = np.empty((m, n))
    out_w = np.empty((m, n, n))
    out_mu = np.empty((m, n))
    out_smin = np.empty(m)

    cdef double[:, ::1] x = x_arr
    cdef double[:, ::1] y = y_arr
    cdef double[:, ::1] wprev = w_arr
    cdef double[:, :, ::1] vx = out_x
    cdef double[:, :, ::1] vy = out_y
    cdef double[::1] vdet = out_det
    cdef double[:, ::1] vnu = out_nu
    cdef double[:, :, ::1] vw = out_w
    cdef double[:, ::1] vmu = out_mu
    cdef double[::1] vsmin = out_smin

    # one scratch allocation for everything the loop touches
    scratch = np.empty(16 * nn + 8 * n + 4 * (2 * n) * n)
    cdef double[::1] sc = scratch
    cdef double* kx = &sc[0]
    cdef double* ky = &sc[nn]
    cdef double* xa = &sc[2 * nn]
    cdef double* ya = &sc[3 * nn]
    cdef double* tmp = &sc[4 * nn]
    cdef double* adj = &sc[5 * nn]
    cdef double* msym = &sc[6 * nn]
    cdef double* evec = &sc[7 * nn]
    cdef double* gram = &sc[8 * nn]
    cdef double* gvec = &sc[9 * nn]
    cdef double* overlap = &sc[10 * nn]
    cdef double* wnew = &sc[11 * nn]
    cdef double* minor = &sc[12 * nn]
    cdef double* work = &sc[13 * nn]
    cdef double* mraw = &sc[14 * nn]
    cdef double* stack = &sc[16 * nn]  # 2n x n
    cdef double* vals = &sc[16 * nn + 2 * nn]
    cdef double* gvals = &sc[16 * nn + 2 * nn + n]

    cdef double resid_max = 0.0
    cdef double asym_max = 0.0
    cdef double d, colscale, col2, mscale, asym, resid, best, ov, sgn
    cdef double worst, raw
    cdef bint finite_ok

    for istep in range(m):
        rk4_step(
            &x[0, 0], &y[0, 0],
            &c_half[2 * istep, 0, 0], &c_half[2 * istep + 1, 0, 0], &c_half[2 * istep + 2, 0, 0],
            h, kx, ky, xa, ya, tmp, n,
        )
        finite_ok = True
        for j in range(nn):
            if not (isfinite(x[j // n, j % n]) and isfinite(y[j // n, j % n])):
                finite_ok = False
                break
        if not finite_ok:
            status = STATUS_NONFINITE
            status_step = istep
            break

        if (step_offset + istep + 1) % renorm_every == 0:
            for r in range(n):
                for col in range(n):
                    stack[r * n + col] = x[r, col]
                    stack[(n + r) * n + col] = y[r, col]
            if mgs2(stack, 2 * n, n) != 0:
                status = STATUS_DEGENERATE
                status_step = istep
                break
            for r in range(n):
                for col in range(n):
                    x[r, col] = stack[r * n + col]
                    y[r, col] = stack[(n + r) * n + col]

        # observation: m = Y adj(X), symmetrize, eigensolve, match
        d = adjugate(&x[0, 0], adj, minor, work, n)
        matmul(&y[0, 0], adj, mraw, n)
        mscale = 1e-300
        for j in range(nn):
            if fabs(mraw[j]) > mscale:
                mscale = fabs(mraw[j])
        asym = 0.0
        for row in range(n):
            for col in range(n):
                raw = fabs(mraw[row * n + col] - mraw[col * n + row])
                if raw > asym:
                    asym = raw
                msym[row * n + col] = 0.5 * (mraw[row * n + col] + mraw[col * n + row])
        asym /= mscale
        if asym > asym_max:
            asym_max = asym

        jacobi(msym, evec, vals, n, tmp)

        # greedy best-remaining assignment on |w_prev^T evec|
        for row in range(n):
            for col in range(n):
                ov = 0.0
                for r in range(n):
                    ov += wprev[r, row] * evec[r * n + col]
                overlap[row * n + col] = ov
        worst = 1.0
        ambiguous = False
        for j in range(n):
            kx[j] = 0.0  # reuse: row assigned flag
            ky[j] = 0.0  # reuse: column used flag
        for r in range(n):
            best = -1.0
            bi = 0
            bj = 0
            for row in range(n):
                if kx[row] != 0.0:
                    continue
                for col in range(n):
                    if ky[col] != 0.0:
                        continue
                    if fabs(overlap[row * n + col]) > best:
                        best = fabs(overlap[row * n + col])
                        bi = row
                        bj = col
            kx[bi] = 1.0
            ky[bj] = 1.0
            if best < worst:
                worst = best
            sgn = 1.0 if overlap[bi * n + bj] >= 0.0 else -1.0
            for row in range(n):
                wnew[row * n + bi] = sgn * evec[row * n + bj]
            xa[bi] = vals[bj]  # reuse xa as permuted eigenvalues
        if worst < MIN_OVERLAP:
            status = STATUS_AMBIGUOUS
            status_step = istep
            break
        for row in range(n):
            for col in range(n):
                wprev[row, col] = wnew[row * n + col]

        # column scale of the stacked frame
        colscale = 0.0
        for col in range(n):
            col2 = 0.0
            for row in range(n):
                col2 += x[row, col] * x[row, col] + y[row, col] * y[row, col]
            if col2 > colscale:
                colscale = col2
        colscale = sqrt(colscale)

        # sigma_min(X) via the Gram matrix
        for row in range(n):
            for col in range(n):
                ov = 0.0
                for r in range(n):
                    ov += x[r, row] * x[r, col]
                gram[row * n + col] = ov
        jacobi(gram, gvec, gvals, n, tmp)
        raw = gvals[0] if gvals[0] > 0.0 else 0.0
        vsmin[istep] = sqrt(raw) / (colscale if colscale > 1e-300 else 1e-300)

        # mu = nu / det above the guard; the guard scale is the frame column
        # scale to the n-th power (the X block itself collapses at crossings)
        raw = 1.0
        for j in range(n):
            raw *= colscale
        if raw < 1e-300:
            raw = 1e-300
        for j in range(n):
            vnu[istep, j] = xa[j]
            if fabs(d) > det_guard_rel * raw:
                vmu[istep, j] = xa[j] / d
            else:
                vmu[istep, j] = NAN

        # Lagrangian residual max |X^T Y - Y^T X| / colscale^2
        resid = 0.0
        for row in range(n):
            for col in range(n):
                ov = 0.0
                for r in range(n):
                    ov += x[r, row] * y[r, col] - y[r, row] * x[r, col]
                if fabs(ov) > resid:
                    resid = fabs(ov)
        resid /= (colscale * colscale) if colscale > 1e-150 else 1e-300
        if resid > resid_max:
            resid_max = resid

        vdet[istep] = d
        for row in range(n):
            for col in range(n):
                vx[istep, row, col] = x[row, col]
                vy[istep, row, col] = y[row, col]
                vw[istep, row, col] = wprev[row, col]

    return {
        "x_blocks": out_x,
        "y_blocks": out_y,
        "det": out_det,
        "nu": out_nu,
        "w": out_w,
        "mu": out_mu,
        "smin": out_smin,
        "resid_max": resid_max,
        "asym_max": asym_max,
        "status": status,
        "status_step": status_step,
    }
