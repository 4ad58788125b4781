"""Discretized Laplace interval probabilities, shared by the rate models.

All entry points integrate a Laplace density over the unit interval
[x - 0.5, x + 0.5]. The three-case form below never evaluates exp on a
positive argument, so it is overflow-free and keeps full precision in
both tails.
"""

from __future__ import annotations

import numpy as np


def interval_prob(x, mu, b):
    """P[x - 0.5 <= X < x + 0.5] for X ~ Laplace(mu, b). Arrays broadcast."""
    p, _, _, _, _ = interval_prob_parts(x, mu, b)
    return p


def interval_prob_parts(x, mu, b):
    """Interval probability plus the pieces its derivatives need.

    Returns (p, pdf_lo, pdf_hi, t_lo, t_hi) where t = (bound - mu) / b and
    pdf_* is the Laplace density evaluated at the corresponding bound.
    """
    x = np.asarray(x, dtype=np.float64)
    t_lo = (x - 0.5 - mu) / b
    t_hi = (x + 0.5 - mu) / b
    e_lo = np.exp(-np.abs(t_lo))
    e_hi = np.exp(-np.abs(t_hi))
    right = t_lo >= 0.0
    left = t_hi <= 0.0
    p = np.where(
        right,
        0.5 * (e_lo - e_hi),
        np.where(left, 0.5 * (e_hi - e_lo), 1.0 - 0.5 * (e_hi + e_lo)),
    )
    pdf_lo = e_lo / (2.0 * b)
    pdf_hi = e_hi / (2.0 * b)
    return p, pdf_lo, pdf_hi, t_lo, t_hi


def cdf(x, mu, b):
    """Laplace cumulative distribution function."""
    t = (np.asarray(x, dtype=np.float64) - mu) / b
    return np.where(t < 0.0, 0.5 * np.exp(-np.abs(t)), 1.0 - 0.5 * np.exp(-np.abs(t)))
