"""Vectorized scalar root finding used by the implicit parameterizations."""
from __future__ import annotations

import numpy as np
from scipy.optimize import elementwise as ew


class ConvergenceError(RuntimeError):
    """A numerical solve failed; carries the best residual seen."""

    def __init__(self, msg, residual=np.nan):
        super().__init__(f"{msg} (best residual {residual:.3e})")
        self.residual = float(residual)


def monotone_root(f, target, guess=0.0, args=(), xmin=None, xmax=None, maxiter=None):
    """Solve f(x, *args) = target elementwise for monotone continuous f.

    A bracket is grown geometrically from ``guess`` and then refined with
    Chandrupatla's method.  Shapes of target, guess and args broadcast.
    """
    target = np.asarray(target, dtype=float)
    shape = np.broadcast_shapes(target.shape, np.shape(guess), *(np.shape(a) for a in args))
    target = np.broadcast_to(target, shape)
    args = tuple(np.broadcast_to(np.asarray(a, dtype=float), shape) for a in args)
    guess = np.broadcast_to(np.asarray(guess, dtype=float), shape).copy()
    if xmin is not None:
        guess = np.maximum(guess, xmin + 1e-3)
    if xmax is not None:
        guess = np.minimum(guess, xmax - 1e-3)

    def g(x, tgt, *a):
        return f(x, *a) - tgt

    br = ew.bracket_root(g, guess - 0.5, guess + 0.5, xmin=xmin, xmax=xmax, args=(target,) + args)
    if not np.all(br.success):
        bad = ~br.success
        res = np.nanmin(np.abs(np.concatenate([np.atleast_1d(br.f_bracket[0][bad]), np.atleast_1d(br.f_bracket[1][bad])])))
        raise ConvergenceError(f"could not bracket {int(bad.sum())} root(s)", res)
    kw = {} if maxiter is None else {"maxiter": maxiter}
    res = ew.find_root(g, (br.bracket[0], br.bracket[1]), args=(target,) + args, **kw)
    if not np.all(res.success):
        bad = ~res.success
        raise ConvergenceError(f"root refinement failed for {int(bad.sum())} point(s)", np.nanmax(np.abs(res.f_x[bad])))
    return res.x
