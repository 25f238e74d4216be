"""Pure numpy versions of the hot loops.  Used when the compiled extension
is unavailable, and as the reference the extension is tested against."""
import numpy as np


def laplacian(f, spacings):
    out = np.zeros_like(f)
    for ax, h in enumerate(spacings):
        out += (np.roll(f, 1, axis=ax) + np.roll(f, -1, axis=ax) - 2.0 * f) / (h * h)
    return out


def exp_pair(psi, mu_p, mu_m, alpha, cap):
    """Return (e^{a psi} mu_p, e^{-a psi} mu_m); raise OverflowError past the cap."""
    t = alpha * psi
    if t.size and np.max(np.abs(t)) > cap:
        raise OverflowError(f"|alpha*psi| exceeds cap {cap}")
    return np.exp(t) * mu_p, np.exp(-t) * mu_m


def cosh_force(phi, c, coef, cap):
    """coef * c * sinh(c phi) * 2, i.e. derivative of coef*(e^{c phi}+e^{-c phi})."""
    t = c * phi
    if t.size and np.max(np.abs(t)) > cap:
        raise OverflowError(f"|charge*phi| exceeds cap {cap}")
    return coef * c * (np.exp(t) - np.exp(-t))
