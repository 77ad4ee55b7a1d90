"""Central finite-difference checking of analytic gradients.

Inputs must be float64; the analytic gradient of f (a scalar-valued
function of the given tensors) is compared element-by-element against
(f(x+h) - f(x-h)) / 2h. For large tensors a random subset of elements per
tensor is probed. The reported error is |analytic - numeric| relative to
max(|analytic|, |numeric|, 1e-3), so near-zero entries are judged on an
absolute scale where rounding noise cannot dominate.
"""

from __future__ import annotations

import numpy as np

REL_FLOOR = 1e-3


def max_grad_error(f, inputs, h=1e-5, max_elements=None, rng=None):
    """Largest relative disagreement between analytic and numeric gradients.

    f: callable taking no arguments and returning a scalar Tensor built from
    `inputs`; each input with requires_grad is checked. max_elements limits
    the probed entries per tensor (all entries when None).
    """
    for t in inputs:
        if t.dtype != np.float64:
            raise ValueError("gradient checks require float64 inputs")
    if rng is None:
        rng = np.random.default_rng(0)

    for t in inputs:
        t.zero_grad()
    out = f()
    out.backward()
    analytic = [np.array(t.grad, copy=True) if t.requires_grad else None for t in inputs]

    worst = 0.0
    for t, ana in zip(inputs, analytic):
        if ana is None:
            continue
        flat = t.data.reshape(-1)
        n = flat.size
        if max_elements is not None and n > max_elements:
            idx = rng.choice(n, size=max_elements, replace=False)
        else:
            idx = np.arange(n)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = float(f().data)
            flat[i] = orig - h
            fm = float(f().data)
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * h)
            a = ana.reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), REL_FLOOR)
            worst = max(worst, err)
    return worst


def assert_gradients_close(f, inputs, tol=1e-4, h=1e-5, max_elements=None, rng=None):
    err = max_grad_error(f, inputs, h=h, max_elements=max_elements, rng=rng)
    if err > tol:
        raise AssertionError(f"gradient check failed: max relative error {err:.3e} > {tol:.1e}")
    return err
