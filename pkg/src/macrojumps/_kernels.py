"""Compiled inner loops for the jump-time search."""
import numpy as np
from numba import njit


@njit(cache=True)
def _norm2(v):
    s = 0.0
    for i in range(v.size):
        s += v[i].real * v[i].real + v[i].imag * v[i].imag
    return s


@njit(cache=True)
def _matvec(m, v, out):
    d = v.size
    for i in range(d):
        acc = 0j
        for j in range(d):
            acc += m[i, j] * v[j]
        out[i] = acc


@njit(cache=True)
def seek_crossing(levels, steps, psi, r, t, t_end):
    """Advance ``psi`` under the cached propagators while ``|psi|^2 > r``.

    ``levels[k] = exp(-i H steps[k])`` with ``steps`` halving from the largest.
    Returns the state and time just before the crossing (within
    ``steps[-1]``), and whether a crossing lies before ``t_end``.
    """
    cur = psi.copy()
    tmp = np.empty_like(cur)
    n_levels = steps.size
    for k in range(n_levels):
        while t + steps[k] <= t_end:
            _matvec(levels[k], cur, tmp)
            if _norm2(tmp) > r:
                cur[:] = tmp
                t += steps[k]
                if k > 0:
                    break
            else:
                break
    last = n_levels - 1
    crossed = False
    if t + steps[last] <= t_end:
        _matvec(levels[last], cur, tmp)
        crossed = _norm2(tmp) <= r
    return cur, t, crossed


@njit(cache=True)
def advance(levels, steps, h, psi, duration):
    """``exp(-i H duration) psi`` by binary decomposition plus a 2nd-order remainder."""
    cur = psi.copy()
    tmp = np.empty_like(cur)
    left = duration
    for k in range(steps.size):
        while left >= steps[k]:
            _matvec(levels[k], cur, tmp)
            cur[:] = tmp
            left -= steps[k]
    if left > 0.0:
        hv = np.empty_like(cur)
        _matvec(h, cur, hv)
        _matvec(h, hv, tmp)
        for i in range(cur.size):
            cur[i] = cur[i] - 1j * left * hv[i] - 0.5 * left * left * tmp[i]
    return cur
