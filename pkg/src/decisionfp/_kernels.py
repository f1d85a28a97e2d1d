"""Compiled inner loops for long first-passage runs."""
import math

import numba
import numpy as np


@numba.njit(cache=True)
def _interp_cells(y, lo, h, table):
    s = (y - lo) / h - 0.5
    n = table.shape[0]
    if s <= 0.0:
        return table[0]
    if s >= n - 1:
        return table[n - 1]
    i = int(s)
    f = s - i
    return table[i] * (1.0 - f) + table[i + 1] * f


@numba.njit(cache=True, nogil=True)
def passage_times_tabulated(rng, n, y0, lo, h, table, beta, dt, n_steps, level, direction, wall, bridge):
    times = np.full(n, np.nan)
    sq = beta * math.sqrt(dt)
    var = beta * beta * dt
    for i in range(n):
        y = y0
        for k in range(1, n_steps + 1):
            yn = y + _interp_cells(y, lo, h, table) * dt + sq * rng.standard_normal()
            if direction > 0:
                while yn < wall:
                    yn = 2.0 * wall - yn
            else:
                while yn > wall:
                    yn = 2.0 * wall - yn
            if direction * (yn - level) >= 0.0:
                times[i] = k * dt
                break
            if bridge and var > 0.0:
                a = direction * (level - y)
                b = direction * (level - yn)
                if rng.random() < math.exp(-2.0 * a * b / var):
                    times[i] = k * dt
                    break
            y = yn
    return times
