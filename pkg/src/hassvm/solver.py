"""Limited-memory quasi-Newton minimizer with a strong Wolfe line search.

The target objectives are convex but only piecewise smooth (hinge kinks),
so the solver runs on subgradients: accepted steps must still decrease the
objective, the curvature pair (s, y) is only stored when it keeps the
implicit Hessian positive definite, and a failed line search clears the
memory and retries once along the steepest descent direction before
giving up with the best iterate seen.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import HassvmError


class NonDescentDirectionError(HassvmError):
    """The supplied search direction does not point downhill."""


@dataclass(frozen=True)
class SolveOptions:
    memory: int = 10
    max_iterations: int = 2000
    gradient_tolerance: float = 1e-5       # inf-norm, relative to max(1, ||x||_inf)
    objective_tolerance: float = 1e-9      # relative decrease, sustained 5 iterations
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_line_search_steps: int = 40

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ValueError("require 0 < wolfe_c1 < wolfe_c2 < 1")
        if self.max_iterations < 1 or self.max_line_search_steps < 1:
            raise ValueError("iteration limits must be positive")


@dataclass(frozen=True, eq=False)
class SolveResult:
    point: np.ndarray
    value: float
    gradient_norm: float
    iterations: int
    status: str  # converged-gradient | converged-objective | max-iterations | line-search-failure


@dataclass(frozen=True, eq=False)
class LineSearchResult:
    step: float | None
    value: float
    gradient: np.ndarray
    evaluations: int
    wolfe_satisfied: bool

    @property
    def success(self) -> bool:
        return self.step is not None


_SUSTAIN = 5  # consecutive small decreases before declaring objective convergence


def _inf_norm(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def _interpolate(lo: float, hi: float) -> float:
    """Safeguarded trial inside (lo, hi); plain bisection keeps it robust
    on piecewise-linear objectives where polynomial fits mislead."""
    return 0.5 * (lo + hi)


def line_search(f, point, direction, initial_step: float, opts: SolveOptions,
                value0: float | None = None, gradient0=None) -> LineSearchResult:
    """Find a step along `direction` satisfying the strong Wolfe conditions.

    Bracketing phase expands the step until the sufficient-decrease
    condition fails or the slope turns non-negative, then a zoom phase
    narrows in. The evaluation budget is opts.max_line_search_steps; on
    exhaustion the best decreasing step found so far is returned (with
    wolfe_satisfied False), or step None when not even a decrease exists.
    """
    point = np.asarray(point, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    evals = 0
    if value0 is None or gradient0 is None:
        value0, gradient0 = f(point)
        evals += 1
    slope0 = float(np.dot(gradient0, direction))
    if slope0 >= 0.0:
        raise NonDescentDirectionError(
            f"directional derivative is {slope0:.3e} (needs to be negative)"
        )
    c1, c2 = opts.wolfe_c1, opts.wolfe_c2
    budget = opts.max_line_search_steps

    def phi(alpha: float):
        value, gradient = f(point + alpha * direction)
        slope = float(np.dot(gradient, direction))
        return value, gradient, slope

    best = None  # (alpha, value, gradient) with value < value0

    def note(alpha, value, gradient):
        nonlocal best
        if value < value0 and (best is None or value < best[1]):
            best = (alpha, value, gradient)

    def fallback() -> LineSearchResult:
        if best is None:
            return LineSearchResult(None, value0, np.asarray(gradient0),
                                    evals, False)
        return LineSearchResult(best[0], best[1], best[2], evals, False)

    def zoom(a_lo, f_lo, a_hi) -> LineSearchResult:
        nonlocal evals
        # Invariant: a_lo satisfies sufficient decrease and has the lowest
        # value seen; the interval between a_lo and a_hi brackets a Wolfe point.
        while evals < budget:
            alpha = _interpolate(a_lo, a_hi)
            if alpha <= 0.0 or not np.isfinite(alpha):
                break
            value, gradient, slope = phi(alpha)
            evals += 1
            note(alpha, value, gradient)
            if value > value0 + c1 * alpha * slope0 or value >= f_lo:
                a_hi = alpha
            else:
                if abs(slope) <= -c2 * slope0:
                    return LineSearchResult(alpha, value, gradient, evals, True)
                if slope * (a_hi - a_lo) >= 0.0:
                    a_hi = a_lo
                a_lo, f_lo = alpha, value
            if abs(a_hi - a_lo) < 1e-16 * max(1.0, abs(a_lo)):
                break
        return fallback()

    alpha_prev = 0.0
    value_prev = value0
    alpha = float(initial_step)
    if not np.isfinite(alpha) or alpha <= 0.0:
        alpha = 1.0
    first = True
    while evals < budget:
        value, gradient, slope = phi(alpha)
        evals += 1
        note(alpha, value, gradient)
        if value > value0 + c1 * alpha * slope0 or (not first and value >= value_prev):
            return zoom(alpha_prev, value_prev, alpha)
        if abs(slope) <= -c2 * slope0:
            return LineSearchResult(alpha, value, gradient, evals, True)
        if slope >= 0.0:
            return zoom(alpha, value, alpha_prev)
        alpha_prev, value_prev = alpha, value
        alpha *= 2.0
        first = False
        if not np.isfinite(alpha):
            break
    return fallback()


def _two_loop(gradient: np.ndarray, pairs) -> np.ndarray:
    """Implicit product of the inverse-Hessian estimate with the gradient."""
    q = gradient.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * float(np.dot(s, q))
        alphas.append(a)
        q -= a * y
    s, y, _ = pairs[-1]
    gamma = float(np.dot(s, y)) / float(np.dot(y, y))
    q *= gamma
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * float(np.dot(y, q))
        q += (a - b) * s
    return -q


def minimize(f, x0, opts: SolveOptions | None = None) -> SolveResult:
    """Minimize f (returning (value, gradient)) starting from x0.

    Deterministic given (f, x0, opts); returns the best iterate observed.
    Raises ValueError when f is non-finite at x0.
    """
    opts = opts or SolveOptions()
    x = np.array(x0, dtype=np.float64, copy=True)
    value, gradient = f(x)
    gradient = np.asarray(gradient, dtype=np.float64)
    if not np.isfinite(value) or not np.all(np.isfinite(gradient)):
        raise ValueError("objective is not finite at the starting point")

    best_x = x.copy()
    best_value = value
    best_gnorm = _inf_norm(gradient)
    pairs: deque = deque(maxlen=opts.memory)
    small_decreases = 0
    status = "max-iterations"
    iterations = 0

    def attempt(direction, initial_step) -> LineSearchResult:
        try:
            return line_search(f, x, direction, initial_step, opts, value,
                               gradient)
        except NonDescentDirectionError:
            return LineSearchResult(None, value, gradient, 0, False)

    for iteration in range(1, opts.max_iterations + 1):
        if _inf_norm(gradient) <= opts.gradient_tolerance * max(1.0, _inf_norm(x)):
            status = "converged-gradient"
            break
        iterations = iteration

        if pairs:
            direction = _two_loop(gradient, pairs)
            initial_step = 1.0
            if float(np.dot(gradient, direction)) >= 0.0:
                # Stale curvature information; fall back to steepest descent.
                pairs.clear()
        if not pairs:
            direction = -gradient
            initial_step = 1.0 / float(np.linalg.norm(gradient))

        ls = attempt(direction, initial_step)
        if not ls.success and pairs:
            # First failure: clear the memory, try once along the gradient.
            pairs.clear()
            direction = -gradient
            ls = attempt(direction, 1.0 / float(np.linalg.norm(gradient)))
        if not ls.success:
            status = "line-search-failure"
            break

        step = ls.step * direction
        new_x = x + step
        new_value = ls.value
        new_gradient = np.asarray(ls.gradient, dtype=np.float64)

        y = new_gradient - gradient
        sy = float(np.dot(step, y))
        if sy > 1e-10 * float(np.linalg.norm(step)) * float(np.linalg.norm(y)):
            pairs.append((step, y, 1.0 / sy))

        decrease = value - new_value
        if decrease <= opts.objective_tolerance * max(1.0, abs(value)):
            small_decreases += 1
        else:
            small_decreases = 0

        x, value, gradient = new_x, new_value, new_gradient
        if value < best_value:
            best_x = x.copy()
            best_value = value
            best_gnorm = _inf_norm(gradient)

        if small_decreases >= _SUSTAIN:
            status = "converged-objective"
            break

    return SolveResult(point=best_x, value=best_value, gradient_norm=best_gnorm,
                       iterations=iterations, status=status)
