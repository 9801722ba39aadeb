"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Both sides work on (re, im) doubles with the same operation order, so the two
backends agree bit for bit.
"""

import math

import numpy as np


def pair_project(psi, sign):
    """Apply (1 + sign * SWAP) / 2 to axes 1 and 3 of a 5-axis tensor ``(a, d, b, d, c)``."""
    psi = np.asarray(psi, dtype=np.complex128)
    if psi.shape[1] != psi.shape[3]:
        raise ValueError("swapped legs must have equal dimension")
    return 0.5 * (psi + sign * np.swapaxes(psi, 1, 3))


def _conc4(r):
    re = (r[0] * r[6] - r[1] * r[7]) - (r[2] * r[4] - r[3] * r[5])
    im = (r[0] * r[7] + r[1] * r[6]) - (r[2] * r[5] + r[3] * r[4])
    # abs(complex) is libm hypot, the function the compiled kernel calls
    return 2.0 * abs(complex(re, im))


def concurrence_rows(amps):
    r = np.ascontiguousarray(amps, dtype=np.complex128).view(np.float64).T
    re = (r[0] * r[6] - r[1] * r[7]) - (r[2] * r[4] - r[3] * r[5])
    im = (r[0] * r[7] + r[1] * r[6]) - (r[2] * r[5] + r[3] * r[4])
    return 2.0 * np.hypot(re, im)


def givens_descent(amps, moves, step):
    # Mirrors the compiled loop operation by operation; amps is updated in place.
    m = amps.shape[0]
    rows = amps.view(np.float64).tolist()
    if m < 2:
        return (_conc4(rows[0]) if m else 0.0), step
    vals = [_conc4(r) for r in rows]
    total = 0.0
    for v in vals:
        total = total + v
    half_pi = math.pi / 2
    for u0, u1, u2, u3 in np.asarray(moves, dtype=np.float64).tolist():
        i = int(u0 * m)
        k = int(u1 * (m - 1))
        if k >= i:
            k += 1
        th = step * (2.0 * u2 - 1.0)
        ph = 2.0 * math.pi * u3
        c = math.cos(th)
        s = math.sin(th)
        er = s * math.cos(ph)
        ei = s * math.sin(ph)
        x = rows[i]
        y = rows[k]
        ni = [0.0] * 8
        nk = [0.0] * 8
        for q in (0, 2, 4, 6):
            xr, xi, yr, yi = x[q], x[q + 1], y[q], y[q + 1]
            ni[q] = c * xr - (er * yr - ei * yi)
            ni[q + 1] = c * xi - (er * yi + ei * yr)
            nk[q] = (er * xr + ei * xi) + c * yr
            nk[q + 1] = (er * xi - ei * xr) + c * yi
        ci = _conc4(ni)
        ck = _conc4(nk)
        new = total - vals[i] - vals[k] + ci + ck
        if new < total:
            rows[i] = ni
            rows[k] = nk
            vals[i] = ci
            vals[k] = ck
            total = new
            step = min(step * 1.5, half_pi)
        else:
            step = max(step * 0.95, 1e-7)
    amps.view(np.float64)[...] = rows
    return total, step
