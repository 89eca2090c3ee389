"""Interior-point (log-free barrier) search for the payload length that
minimizes the analytic exchange failure rate, subject to payload >= 0.

The error rate is strictly increasing in payload, so the constrained
minimum sits on the boundary; the barrier weight is therefore driven to
zero on a geometric schedule and the iterates approach zero payload from
inside the feasible region.  The report includes the neighbouring integer
payloads and their analytic error rates, which is what a frame designer
actually picks from.

Two gradient forms are provided:

- `penalized_fer_gradient`: the exact derivative of
  ``penalized_fer(x) = FER(x) + eps/x`` with the full frame exponent
  8*(payload+8) + L_ack.  This is the default ("true") gradient.
- `barrier_gradient`: the printed shorthand, identical except that the
  exponent of (1-p) is the bare payload.  Available through
  ``verbatim_gradient=True`` and evaluated exactly as written.

`barrier_objective` keeps the printed success-plus-barrier form
``(1-p)^(L_data+L_ack) + eps/payload`` for reference and testing; the
descent itself uses the error-rate orientation above, which is the form
whose interior minimum exists.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

from .analytics import ack_length_term, data_length, fer_analytic
from .errors import DomainError, RangeError

DEFAULT_TOLERANCE = 1e-6
DEFAULT_MAX_ITERATIONS = 10_000
DEFAULT_SHRINK = 0.5


def _check_domain(payload: float, p_ber: float, allow_zero: bool = False) -> None:
    if payload < 0 or (payload == 0 and not allow_zero):
        raise DomainError(f"payload={payload} outside the barrier domain")
    if not 0.0 <= p_ber < 1.0:
        raise DomainError(f"p_ber={p_ber} must lie in [0,1)")


def barrier_objective(payload: float, p_ber: float, epsilon: float) -> float:
    """Printed barrier form: (1-p)^(L_data+L_ack) + epsilon/payload."""
    _check_domain(payload, p_ber)
    exponent = data_length(payload) + ack_length_term(p_ber)
    return (1.0 - p_ber) ** exponent + epsilon / payload


def barrier_gradient(payload: float, p_ber: float, epsilon: float) -> float:
    """Printed gradient form: -8 ln(1-p)(1-p)^payload - epsilon/payload^2."""
    _check_domain(payload, p_ber)
    return (-8.0 * math.log(1.0 - p_ber) * (1.0 - p_ber) ** payload
            - epsilon / payload ** 2)


def epsilon_schedule(payload: float, p_ber: float) -> float:
    """Barrier weight -8 payload^2 [ln(1-p)(1-p)^payload]."""
    _check_domain(payload, p_ber, allow_zero=True)
    return -8.0 * payload ** 2 * (math.log(1.0 - p_ber) * (1.0 - p_ber) ** payload)


def epsilon_schedule_exact(payload: float, p_ber: float) -> float:
    """Full-exponent variant of `epsilon_schedule`.

    Uses the frame exponent 8*(payload+8) + L_ack, so the starting point is
    stationary for the exact gradient.  Seeding the exact-gradient descent
    with the bare-payload schedule can overshoot the balance curve's peak at
    larger error rates, leaving the inner problem with no stationary point.
    """
    _check_domain(payload, p_ber, allow_zero=True)
    exponent = data_length(payload) + ack_length_term(p_ber)
    return -8.0 * payload ** 2 * (math.log(1.0 - p_ber) * (1.0 - p_ber) ** exponent)


def penalized_fer(payload: float, p_ber: float, epsilon: float) -> float:
    """Error-rate orientation of the barrier objective: FER + epsilon/payload."""
    _check_domain(payload, p_ber)
    return fer_analytic(payload, p_ber) + epsilon / payload


def penalized_fer_gradient(payload: float, p_ber: float, epsilon: float) -> float:
    """Exact derivative of `penalized_fer` in payload.

    Same shape as `barrier_gradient`; the (1-p) power carries the full
    frame exponent instead of the bare payload.
    """
    _check_domain(payload, p_ber)
    exponent = data_length(payload) + ack_length_term(p_ber)
    return (-8.0 * math.log(1.0 - p_ber) * (1.0 - p_ber) ** exponent
            - epsilon / payload ** 2)


def _verbatim_potential(payload: float, p_ber: float, epsilon: float) -> float:
    """Antiderivative of the printed gradient, used for its line search."""
    return -8.0 * (1.0 - p_ber) ** payload + epsilon / payload


@dataclass
class TracePoint:
    iteration: int
    payload: float
    epsilon: float
    objective: float


@dataclass
class IntegerCandidate:
    payload: int
    fer: float


@dataclass
class OptimizeResult:
    payload_opt: float
    fer_opt: float
    converged: bool
    iterations: int
    trace: list[TracePoint] = field(default_factory=list)
    candidates: list[IntegerCandidate] = field(default_factory=list)
    diagnostic: Optional[str] = None

    @property
    def best_integer(self) -> IntegerCandidate:
        return min(self.candidates, key=lambda c: c.fer)


def optimize_payload(p_ber: float, payload_0: float = 15.0,
                     tolerance: float = DEFAULT_TOLERANCE,
                     max_iterations: int = DEFAULT_MAX_ITERATIONS,
                     shrink: float = DEFAULT_SHRINK,
                     verbatim_gradient: bool = False) -> OptimizeResult:
    """Minimize the analytic FER over payload >= 0 by barrier descent.

    The weight starts at the scheduled value for the starting point and is
    multiplied by `shrink` before each inner solve; iteration stops when
    successive outer iterates move less than `tolerance`.  Exceeding
    `max_iterations` total descent steps returns the best iterate with a
    diagnostic instead of raising.
    """
    if not 0.0 < p_ber < 1.0:
        raise RangeError(f"p_ber={p_ber} must lie strictly inside (0,1)")
    if payload_0 <= 0:
        raise DomainError(f"payload_0={payload_0} must be positive")

    if verbatim_gradient:
        objective, gradient, schedule = (_verbatim_potential, barrier_gradient,
                                         epsilon_schedule)
    else:
        objective, gradient, schedule = (penalized_fer, penalized_fer_gradient,
                                         epsilon_schedule_exact)

    x = float(payload_0)
    eps = schedule(x, p_ber)
    trace = [TracePoint(0, x, eps, objective(x, p_ber, eps))]
    steps = 0
    converged = False
    outer = 0

    while steps < max_iterations:
        outer += 1
        eps *= shrink
        x_new, steps = _descend(objective, gradient, x, p_ber, eps,
                                steps, max_iterations)
        trace.append(TracePoint(outer, x_new, eps, objective(x_new, p_ber, eps)))
        if abs(x_new - x) < tolerance:
            x = x_new
            converged = True
            break
        x = x_new

    candidates = _integer_candidates(x, p_ber)
    return OptimizeResult(
        payload_opt=x,
        fer_opt=fer_analytic(x, p_ber),
        converged=converged,
        iterations=steps,
        trace=trace,
        candidates=candidates,
        diagnostic=None if converged else
        f"stopped after {steps} descent steps without meeting tolerance={tolerance}",
    )


def _descend(objective, gradient, x: float, p_ber: float, eps: float,
             steps: int, max_iterations: int,
             inner_cap: int = 200) -> tuple[float, int]:
    """Backtracking gradient descent to the inner minimum for fixed eps."""
    for _ in range(inner_cap):
        if steps >= max_iterations:
            break
        g = gradient(x, p_ber, eps)
        steps += 1
        if g == 0.0:
            break
        # first candidate moves a quarter of the way to the boundary at most
        alpha = 0.25 * x / abs(g)
        fx = objective(x, p_ber, eps)
        moved = False
        for _ in range(60):
            candidate = x - alpha * g
            if candidate > 0 and objective(candidate, p_ber, eps) < fx:
                if abs(candidate - x) < 1e-12 * max(1.0, x):
                    x = candidate
                    break
                x = candidate
                moved = True
                break
            alpha *= 0.5
        if not moved:
            break
    return x, steps


def _integer_candidates(x: float, p_ber: float) -> list[IntegerCandidate]:
    lo = max(0, math.floor(x))
    hi = math.ceil(x)
    payloads = sorted({lo, hi})
    return [IntegerCandidate(p, fer_analytic(p, p_ber)) for p in payloads]


def grid_search_fer(p_ber: float, payloads=range(1, 31)) -> IntegerCandidate:
    """Exhaustive oracle: the integer payload with the lowest analytic FER."""
    best = min(payloads, key=lambda p: fer_analytic(p, p_ber))
    return IntegerCandidate(best, fer_analytic(best, p_ber))
