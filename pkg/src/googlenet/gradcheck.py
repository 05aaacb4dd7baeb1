"""Finite-difference verification of the tape gradients.

``grad_check`` compares the analytic gradient of a scalar-valued function
against central differences, coordinate by coordinate, and reports the
worst relative error with denominator max(|analytic|, |numeric|, 1e-8).
Run it in fp64: central differences at eps ~ 1e-4 leave ~1e-8 of truncation
error, far below fp64 roundoff amplification for these ops.

Non-smooth coordinates (relu kinks) can be masked out with ``exclude``;
``relu_kink_mask`` builds that mask for inputs feeding a relu directly.
"""

import numpy as np

from .autograd import Tape, Var


def relu_kink_mask(x, tol=1e-6):
    """Coordinates sitting on (or numerically at) the relu kink."""
    return np.abs(x) <= tol


def grad_check(fn, inputs, eps=1e-4, exclude=None):
    """Max relative error between tape and finite-difference gradients.

    fn(tape, *vars) must return a scalar Var.  ``inputs`` is a list of
    arrays (use fp64); ``exclude`` optionally gives one boolean mask per
    input marking coordinates to skip.
    """
    work = [np.array(a, dtype=np.float64) for a in inputs]

    tape = Tape()
    variables = [Var(a) for a in work]
    loss = fn(tape, *variables)
    tape.backward(loss)
    analytic = [
        v.grad if v.grad is not None else np.zeros_like(v.data) for v in variables
    ]

    def evaluate():
        out = fn(Tape(), *[Var(a) for a in work])
        val = float(out.data)
        if not np.isfinite(val):
            raise FloatingPointError(f"non-finite loss value {val} during grad_check")
        return val

    worst = 0.0
    for which, a in enumerate(work):
        flat = a.reshape(-1)
        skip = None if exclude is None else exclude[which]
        skip = None if skip is None else np.asarray(skip).reshape(-1)
        for j in range(flat.size):
            if skip is not None and skip[j]:
                continue
            orig = flat[j]
            flat[j] = orig + eps
            f_plus = evaluate()
            flat[j] = orig - eps
            f_minus = evaluate()
            flat[j] = orig
            numeric = (f_plus - f_minus) / (2 * eps)
            an = float(analytic[which].reshape(-1)[j])
            if not np.isfinite(numeric) or not np.isfinite(an):
                raise FloatingPointError("non-finite gradient during grad_check")
            err = abs(an - numeric) / max(abs(an), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
