"""Shared numerical helpers for the test suite."""


def hjb_inner(v, p, t, x, s, a, hx=1e-4, hs=1e-4):
    """Finite-difference value of the bracket maximised over the amount ``a``."""
    vx = (v(t, x + hx, s) - v(t, x - hx, s)) / (2 * hx)
    vxx = (v(t, x + hx, s) - 2 * v(t, x, s) + v(t, x - hx, s)) / hx**2
    vxs = (v(t, x + hx, s + hs) - v(t, x + hx, s - hs) - v(t, x - hx, s + hs) + v(t, x - hx, s - hs)) / (4 * hx * hs)
    s2b = s ** (2 * p.beta)
    return a * (p.mu - p.r) * vx + 0.5 * a**2 * p.sigma**2 * s2b * vxx + a * p.sigma**2 * s2b * s * vxs
