"""Compiled inner loop of the two-coordinate SVM dual solver."""
import numpy as np
from numba import njit

TAU = 1e-12


@njit(cache=True)
def smo_solve(Q, y, C, tol, max_iter, alpha, G):
    """Minimise 0.5 a'Qa - sum(a) s.t. 0 <= a <= C, y'a = 0 in place.

    Q[i, j] = y_i y_j K[i, j]; ``G`` must equal Q @ alpha - 1 on entry.
    Working pairs use maximal-violation / second-order selection.
    Returns (iterations, final violation).
    """
    n = y.shape[0]
    it = 0
    gap = np.inf
    while it < max_iter:
        gmax = -np.inf
        i = -1
        for t in range(n):
            if y[t] > 0:
                if alpha[t] < C and -G[t] >= gmax:
                    gmax = -G[t]
                    i = t
            else:
                if alpha[t] > 0 and G[t] >= gmax:
                    gmax = G[t]
                    i = t
        gmax2 = -np.inf
        j = -1
        obj_min = np.inf
        for t in range(n):
            if y[t] > 0:
                if alpha[t] > 0:
                    if G[t] >= gmax2:
                        gmax2 = G[t]
                    if i >= 0:
                        diff = gmax + G[t]
                        if diff > 0:
                            quad = Q[i, i] + Q[t, t] - 2.0 * y[i] * Q[i, t]
                            if quad <= 0:
                                quad = TAU
                            obj = -(diff * diff) / quad
                            if obj <= obj_min:
                                obj_min = obj
                                j = t
            else:
                if alpha[t] < C:
                    if -G[t] >= gmax2:
                        gmax2 = -G[t]
                    if i >= 0:
                        diff = gmax - G[t]
                        if diff > 0:
                            quad = Q[i, i] + Q[t, t] + 2.0 * y[i] * Q[i, t]
                            if quad <= 0:
                                quad = TAU
                            obj = -(diff * diff) / quad
                            if obj <= obj_min:
                                obj_min = obj
                                j = t
        gap = gmax + gmax2
        if gap < tol or j < 0:
            break

        ai_old = alpha[i]
        aj_old = alpha[j]
        if y[i] != y[j]:
            quad = Q[i, i] + Q[j, j] + 2.0 * Q[i, j]
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            s = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if s > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = s - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = s
            if s > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = s - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = s
        dai = alpha[i] - ai_old
        daj = alpha[j] - aj_old
        for t in range(n):
            G[t] += Q[i, t] * dai + Q[j, t] * daj
        it += 1
    return it, gap
