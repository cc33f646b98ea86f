"""Dormand-Prince 5(4) stepper with PI step control.

The stepper integrates ``dy/ds = f(s, y)`` for complex vectors ``y`` on an
increasing interval and lands exactly on requested checkpoints, so callers can
sample the solution on a grid without interpolation.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import IntegratorError

logger = logging.getLogger(__name__)

RHS = Callable[[float, np.ndarray], np.ndarray]

# Butcher tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
# PI exponents (alpha, beta) for a fifth-order error estimate
ALPHA = 0.7 / 5
BETA = 0.4 / 5

MIN_STEP_FRACTION = 1e-9
DEFAULT_MAX_STEPS = 10_000_000


@dataclass
class StepStats:
    """Per-run step diagnostics.

    Attributes:
        accepted: Number of accepted steps
        rejected: Number of rejected attempts
        evaluations: Right-hand-side evaluations
        max_error_ratio: Largest accepted error norm (always <= 1)
        max_local_error: Largest componentwise local error estimate of an accepted step
        last_step: Size of the last accepted step
    """

    accepted: int = 0
    rejected: int = 0
    evaluations: int = 0
    max_error_ratio: float = 0.0
    max_local_error: float = 0.0
    last_step: float = 0.0


@dataclass(frozen=True)
class Solution:
    """Final state plus the states at every checkpoint (in increasing order)."""

    y: np.ndarray
    checkpoints: np.ndarray
    values: np.ndarray
    stats: StepStats


def _prepare_checkpoints(checkpoints: Iterable[float], s0: float, s1: float) -> np.ndarray:
    cps = np.array(sorted(float(c) for c in checkpoints), dtype=float)
    slack = 1e-12 * max(1.0, abs(s0), abs(s1))
    if cps.size and (cps[0] < s0 - slack or cps[-1] > s1 + slack):
        raise ValueError(f"checkpoints must lie in [{s0}, {s1}]")
    return np.clip(cps, s0, s1)


def integrate(f: RHS, s0: float, s1: float, y0: np.ndarray, *,
              rtol: float, atol: float,
              initial_step: float = 1e-3,
              max_step: float = math.inf,
              min_step: Optional[float] = None,
              checkpoints: Iterable[float] = (),
              max_steps: int = DEFAULT_MAX_STEPS) -> Solution:
    """Integrate ``dy/ds = f(s, y)`` from ``s0`` to ``s1 >= s0``.

    Args:
        f: Right-hand side returning an array shaped like ``y``
        s0: Start of the interval
        s1: End of the interval
        y0: Initial value
        rtol: Relative tolerance
        atol: Absolute tolerance
        initial_step: First trial step
        max_step: Upper bound on the step
        min_step: Step underflow threshold, ``1e-9 * (s1 - s0)`` when omitted
        checkpoints: Positions in ``[s0, s1]`` where the solution is recorded
        max_steps: Budget of attempted steps

    Returns:
        A :class:`Solution`

    Raises:
        IntegratorError: If the step falls below ``min_step`` or the budget is exhausted
    """
    if s1 < s0:
        raise ValueError(f"integration interval must be increasing, got [{s0}, {s1}]")
    y = np.array(y0, dtype=complex)
    shape = y.shape
    y = y.reshape(-1)
    cps = _prepare_checkpoints(checkpoints, s0, s1)
    values = np.empty((cps.size, y.size), dtype=complex)
    stats = StepStats()

    idx = 0
    while idx < cps.size and cps[idx] <= s0:
        values[idx] = y
        idx += 1

    span = s1 - s0
    if span == 0.0:
        return Solution(y.reshape(shape), cps, values.reshape((cps.size,) + shape), stats)

    floor = MIN_STEP_FRACTION * span if min_step is None else min_step

    def rhs(s: float, vec: np.ndarray) -> np.ndarray:
        stats.evaluations += 1
        return np.asarray(f(s, vec.reshape(shape)), dtype=complex).reshape(-1)

    s = s0
    h = min(initial_step, max_step, span)
    k = np.empty((7, y.size), dtype=complex)
    k[0] = rhs(s, y)
    err_prev = 1e-4
    rejected_last = False
    attempts = 0

    while s < s1:
        attempts += 1
        if attempts > max_steps:
            raise IntegratorError("step budget exhausted", s, h, floor)
        target = cps[idx] if idx < cps.size else s1
        hit = h >= target - s
        h_try = target - s if hit else h

        for i in range(1, 7):
            dy = np.tensordot(_A[i], k[:i], axes=1)
            k[i] = rhs(s + _C[i] * h_try, y + h_try * dy)
        y_new = y + h_try * np.tensordot(_A[6], k[:6], axes=1)
        err_vec = h_try * np.tensordot(_E, k, axes=1)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale))

        if err <= 1.0:
            s = target if hit else s + h_try
            y = y_new
            k[0] = k[6]
            stats.accepted += 1
            stats.last_step = h_try
            stats.max_error_ratio = max(stats.max_error_ratio, err)
            stats.max_local_error = max(stats.max_local_error, float(np.max(np.abs(err_vec))))
            while idx < cps.size and cps[idx] <= s:
                values[idx] = y
                idx += 1

            if err == 0.0:
                factor = MAX_FACTOR
            else:
                factor = SAFETY * err ** -ALPHA * err_prev ** BETA
                factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
            if rejected_last:
                factor = min(factor, 1.0)
            err_prev = max(err, 1e-4)
            rejected_last = False
            # 区切り点に合わせて短くしたステップでは提案幅を縮めない
            if hit and h_try < h:
                h = min(h, max_step)
            else:
                h = min(h_try * factor, max_step)
            if h < floor and s < s1:
                raise IntegratorError("step size underflow", s, h, floor)
        else:
            stats.rejected += 1
            rejected_last = True
            factor = max(MIN_FACTOR, SAFETY * err ** -0.2)
            h = h_try * factor
            if h < floor:
                raise IntegratorError("step size underflow", s, h, floor)

    logger.debug("dopri5 [%g, %g]: %d accepted, %d rejected, %d evaluations",
                 s0, s1, stats.accepted, stats.rejected, stats.evaluations)
    return Solution(y.reshape(shape), cps, values.reshape((cps.size,) + shape), stats)
