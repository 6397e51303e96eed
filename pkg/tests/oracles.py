"""Slow, independent reference implementations used as test oracles.

Nothing here imports the code under test.
"""
import math

import numpy as np


# --- LBP -------------------------------------------------------------------

def reflect_index(i, n):
    """Index into a length-n axis with mirror reflection (edge not repeated)."""
    if n == 1:
        return 0
    period = 2 * (n - 1)
    i = i % period
    return i if i < n else period - i


def pixel(band, y, x):
    h, w = len(band), len(band[0])
    return float(band[reflect_index(y, h)][reflect_index(x, w)])


def circle_offsets(P, r, sampling):
    out = []
    for p in range(P):
        theta = 2 * math.pi * p / P
        dx = round(r * math.cos(theta), 12)
        dy = round(r * math.sin(theta), 12)
        if sampling == "grid":
            dx, dy = float(round(dx)), float(round(dy))
        out.append((dy, dx))
    return out


def naive_code(band, x, y, P=8, r=1, sampling="grid"):
    center = pixel(band, y, x)
    code = 0
    for p, (dy, dx) in enumerate(circle_offsets(P, r, sampling)):
        y0, x0 = math.floor(dy), math.floor(dx)
        fy, fx = dy - y0, dx - x0
        if fy == 0 and fx == 0:
            v = pixel(band, y + y0, x + x0)
        else:
            top = (1 - fx) * pixel(band, y + y0, x + x0) + fx * pixel(band, y + y0, x + x0 + 1)
            bottom = (1 - fx) * pixel(band, y + y0 + 1, x + x0) + fx * pixel(band, y + y0 + 1, x + x0 + 1)
            v = (1 - fy) * top + fy * bottom
        if v > center:
            code += 2 ** p
    return code


def transitions(code, P):
    bits = [(code >> p) & 1 for p in range(P)]
    return sum(bits[p] != bits[(p + 1) % P] for p in range(P))


def naive_uniform_map(P):
    uniform = [c for c in range(2 ** P) if transitions(c, P) <= 2]
    lookup = {c: i for i, c in enumerate(uniform)}
    return [lookup.get(c, len(uniform)) for c in range(2 ** P)], len(uniform) + 1


def naive_histograms(band, P=8, r=1, window=7, mapping="uniform_u2", sampling="grid"):
    band = [list(map(float, row)) for row in band]
    h, w = len(band), len(band[0])
    if mapping == "uniform_u2":
        table, nb = naive_uniform_map(P)
    else:
        table, nb = list(range(2 ** P)), 2 ** P
    codes = [[table[naive_code(band, x, y, P, r, sampling)] for x in range(w)] for y in range(h)]
    half = window // 2
    out = np.zeros((h * w, nb))
    for y in range(h):
        for x in range(w):
            counts = [0] * nb
            for oy in range(-half, half + 1):
                for ox in range(-half, half + 1):
                    counts[codes[reflect_index(y + oy, h)][reflect_index(x + ox, w)]] += 1
            out[y * w + x] = [c / float(window * window) for c in counts]
    return out


# --- simplex QP ------------------------------------------------------------

def project_simplex(v):
    """Euclidean projection onto {p >= 0, sum p = 1} by sorting."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def simplex_qp(e, gamma):
    """argmin_{p in simplex} e.p + gamma ||p||^2 (gamma > 0)."""
    return project_simplex(-np.asarray(e, dtype=float) / (2.0 * gamma))


def qp_objective(e, gamma, p):
    return float(np.dot(e, p) + gamma * np.dot(p, p))


def gamma_by_hand(e, k):
    s = np.sort(e)
    return k / 2.0 * s[k] - 0.5 * s[:k].sum()


# --- solvers ---------------------------------------------------------------

def dense_reduced_laplacian(P):
    """P^T (I - P Lambda^-1 P^T) P on anchors with nonzero mass."""
    P = np.asarray(P, dtype=float)
    lam = P.sum(axis=0)
    keep = lam > 0
    S = P[:, keep] @ np.diag(1.0 / lam[keep]) @ P[:, keep].T
    L = np.eye(P.shape[0]) - S
    return P.T @ L @ P


def gradient_descent_anchor(Pl, Y, L_A, alpha, tol=1e-10, max_iter=2_000_000):
    """Minimize ||Pl F - Y||^2 + alpha Tr(F^T L_A F) by plain gradient descent.

    Starts from zero, so iterates stay in the range of the Hessian and the
    limit is the minimum-norm minimizer when the objective is flat along
    some directions. The step uses the largest and smallest nonzero
    eigenvalues.
    """
    H = Pl.T @ Pl + alpha * L_A
    eig = np.linalg.eigvalsh(H)
    positive = eig[eig > 1e-12 * eig[-1]]
    step = 1.0 / (eig[-1] + positive[0])
    F = np.zeros((Pl.shape[1], Y.shape[1]))
    B = Pl.T @ Y
    for it in range(max_iter):
        g = 2.0 * (H @ F - B)
        if np.linalg.norm(g) < tol:
            return F, it
        F = F - step * g
    raise RuntimeError("gradient descent did not converge")
