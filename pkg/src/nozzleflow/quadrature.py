"""Composite Gauss-Legendre rules used by the inlet and far-field integrals."""
import numpy as np

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(8)


def panels(breaks, n_panels=64, graded=False):
    """Nodes and weights of a composite 8-point rule.

    ``breaks`` splits the interval into pieces (e.g. at jumps); each piece
    gets ``n_panels`` panels.  With ``graded`` the panels cluster
    geometrically toward both ends of every piece.
    """
    xs, ws = [], []
    breaks = np.asarray(breaks, float)
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi <= lo:
            continue
        if graded:
            k = np.arange(n_panels // 2 + 1)
            half = 0.5 * (hi - lo)
            left = lo + half * 2.0 ** (-(n_panels // 2 - k).astype(float)) * (k > 0)
            edges = np.unique(np.concatenate([left, hi - (left - lo)[::-1]]))
        else:
            edges = np.linspace(lo, hi, n_panels + 1)
        a, b = edges[:-1, None], edges[1:, None]
        xs.append((0.5 * (b - a) * _NODES + 0.5 * (a + b)).ravel())
        ws.append((0.5 * (b - a) * _WEIGHTS).ravel())
    return np.concatenate(xs), np.concatenate(ws)


def integrate(f, breaks, n_panels=64, graded=False):
    x, w = panels(breaks, n_panels, graded)
    return float(np.dot(w, f(x)))


def cumulative(f, edges):
    """Integral of f from edges[0] to every edge, 8-point rule per cell."""
    edges = np.asarray(edges, float)
    a, b = edges[:-1, None], edges[1:, None]
    x = 0.5 * (b - a) * _NODES + 0.5 * (a + b)
    cell = (0.5 * (b - a)[:, 0]) * (f(x.ravel()).reshape(x.shape) @ _WEIGHTS)
    return np.concatenate([[0.0], np.cumsum(cell)])


def rule_on(lo, hi, n_panels=8):
    """Vectorized rule on per-row intervals [lo_k, hi_k]; returns (x, w) of shape (K, n)."""
    lo = np.asarray(lo, float)[:, None]
    hi = np.asarray(hi, float)[:, None]
    t = np.linspace(0.0, 1.0, n_panels + 1)
    a = (lo + (hi - lo) * t[:-1])[..., None]
    b = (lo + (hi - lo) * t[1:])[..., None]
    x = 0.5 * (b - a) * _NODES + 0.5 * (a + b)
    w = 0.5 * (b - a) * _WEIGHTS
    K = lo.shape[0]
    return x.reshape(K, -1), np.broadcast_to(w, x.shape).reshape(K, -1)
