# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel for the finite part of the decoherence integral.

Same integrand, series thresholds and initial panelling as ``_dcore_py``;
subdivision is depth-first on an explicit stack with a tolerance share
proportional to panel width.
"""

from libc.math cimport sin, cos, fabs, pow, ceil, M_PI
from libc.stdlib cimport malloc, realloc, free

from .numerics import QuadratureBudgetExceeded

cdef double XGK[8]
cdef double WGK[8]
cdef double WG[4]

_xgk = (0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
        0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
        0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
        0.207784955007898467600689403773245, 0.0)
_wgk = (0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
        0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
        0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
        0.204432940075298892414161999234649, 0.209482141084727828012999174891714)
_wg = (0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
       0.381830050505118944950369775488975, 0.417959183673469387755102040816327)
for _i in range(8):
    XGK[_i] = _xgk[_i]
    WGK[_i] = _wgk[_i]
for _i in range(4):
    WG[_i] = _wg[_i]

cdef double EPS = 2.220446049250313e-16


cdef inline double _integrand(double k, double u) noexcept nogil:
    cdef double k2 = k * k, s, x, x2, q
    if k < 0.2:
        s = (((k2 / 3991680.0 - 1.0 / 45360.0) * k2 + 1.0 / 840.0) * k2 - 1.0 / 30.0) * k2 + 1.0 / 3.0
    else:
        s = (sin(k) - k * cos(k)) / (k2 * k)
    x = u * k
    x2 = x * x
    if x < 0.1:
        q = (((x2 / 39916800.0 - 1.0 / 362880.0) * x2 + 1.0 / 5040.0) * x2 - 1.0 / 120.0) * x2 + 1.0 / 6.0
    else:
        q = (1.0 - sin(x) / x) / x2
    return s * s * (u * u) * k * q


cdef void _gk15(double a, double b, double u, double* val, double* err) noexcept nogil:
    cdef double half = 0.5 * (b - a), mid = 0.5 * (a + b)
    cdef double fv[15]
    cdef double rk = 0.0, rg = 0.0, mean, resasc = 0.0, resabs = 0.0, e, sc
    cdef int j
    for j in range(7):
        fv[j] = _integrand(mid - half * XGK[j], u)
        fv[14 - j] = _integrand(mid + half * XGK[j], u)
    fv[7] = _integrand(mid, u)
    for j in range(7):
        rk += WGK[j] * (fv[j] + fv[14 - j])
        resabs += WGK[j] * (fabs(fv[j]) + fabs(fv[14 - j]))
    rk += WGK[7] * fv[7]
    resabs += WGK[7] * fabs(fv[7])
    # Gauss nodes are the odd Kronrod nodes: indices 1, 3, 5 and the centre
    rg = WG[0] * (fv[1] + fv[13]) + WG[1] * (fv[3] + fv[11]) + WG[2] * (fv[5] + fv[9]) + WG[3] * fv[7]
    mean = 0.5 * rk
    for j in range(15):
        resasc += (WGK[j] if j < 8 else WGK[14 - j]) * fabs(fv[j] - mean)
    e = fabs(rk - rg)
    if resasc > 0.0:
        sc = 200.0 * e / resasc
        if sc < 1.0:
            e = resasc * pow(sc, 1.5)
        else:
            e = resasc
    if e < 50.0 * EPS * resabs:
        e = 50.0 * EPS * resabs
    val[0] = rk * half
    err[0] = e * fabs(half)


def finite_part(double u, double cutoff, double abs_tol, double rel_tol, long budget):
    """Integral over ``[0, cutoff]`` as ``(value, error, panel_count)``."""
    cdef double width = M_PI / (u + 2.0)
    cdef long n0 = <long> ceil(cutoff / width)
    if n0 < 1:
        n0 = 1
    if n0 > budget:
        raise QuadratureBudgetExceeded(float("nan"), float("inf"), 0)
    cdef double h = cutoff / n0, span = cutoff
    cdef long cap = 2 * n0 + 64, top = 0, i, accepted = 0
    cdef double* sa = <double*> malloc(cap * sizeof(double))
    cdef double* sb = <double*> malloc(cap * sizeof(double))
    cdef double* sv = <double*> malloc(cap * sizeof(double))
    cdef double* se = <double*> malloc(cap * sizeof(double))
    cdef double est = 0.0, total = 0.0, toterr = 0.0, tol, a, b, m, v1, e1, v2, e2
    cdef bint over = False
    if not sa or not sb or not sv or not se:
        free(sa); free(sb); free(sv); free(se)
        raise MemoryError()
    try:
        with nogil:
            for i in range(n0):
                sa[top] = i * h
                sb[top] = cutoff if i == n0 - 1 else (i + 1) * h
                _gk15(sa[top], sb[top], u, &sv[top], &se[top])
                est += sv[top]
                top += 1
            tol = abs_tol
            if rel_tol * fabs(est) > tol:
                tol = rel_tol * fabs(est)
            while top > 0:
                top -= 1
                a = sa[top]; b = sb[top]
                if se[top] <= 0.5 * tol * (b - a) / span or (b - a) < 1e-13 * span:
                    total += sv[top]
                    toterr += se[top]
                    accepted += 1
                    continue
                if accepted + top + 2 > budget:
                    total += sv[top]
                    toterr += se[top]
                    accepted += 1
                    over = True
                    continue
                if top + 2 > cap:
                    with gil:
                        cap *= 2
                        sa = <double*> realloc(sa, cap * sizeof(double))
                        sb = <double*> realloc(sb, cap * sizeof(double))
                        sv = <double*> realloc(sv, cap * sizeof(double))
                        se = <double*> realloc(se, cap * sizeof(double))
                        if not sa or not sb or not sv or not se:
                            raise MemoryError()
                m = 0.5 * (a + b)
                _gk15(a, m, u, &v1, &e1)
                _gk15(m, b, u, &v2, &e2)
                sa[top] = a; sb[top] = m; sv[top] = v1; se[top] = e1
                top += 1
                sa[top] = m; sb[top] = b; sv[top] = v2; se[top] = e2
                top += 1
    finally:
        free(sa); free(sb); free(sv); free(se)
    tol = abs_tol
    if rel_tol * fabs(total) > tol:
        tol = rel_tol * fabs(total)
    if over or toterr > tol:
        raise QuadratureBudgetExceeded(total, toterr, accepted)
    return total, toterr, accepted


def integrand(double k, double u):
    return _integrand(k, u)
