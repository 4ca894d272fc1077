"""Privacy parameters of the sampling-and-threshold protocol.

The protocol is (epsilon, delta)-differentially private with no added noise
when ``4 <= theta <= sqrt(n)`` and ``1 <= gamma <= sqrt(n) / (theta + 1)``::

    epsilon = L * ln(1 + 1 / (sqrt(n) / (gamma * theta) - 1))
    delta   = (theta - 2) / ((theta - 3) * theta!)

This module evaluates those bounds and inverts them: pick ``theta`` for a
target delta (through the Lambert W function, or the ``ceil(log10 n + 6)``
rule), then ``gamma`` for a target epsilon.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from fractions import Fraction

from .errors import ParameterError, PopulationTooSmall

logger = logging.getLogger(__name__)

_LAMBERT_TOL = 1e-15
_LAMBERT_MAXITER = 100


def _check_ranges(n, theta, gamma):
    root_n = math.sqrt(n)
    if theta < 4:
        raise ParameterError(f"theta >= 4 violated: theta={theta}")
    if theta > root_n:
        raise ParameterError(f"theta <= sqrt(n) violated: theta={theta}, sqrt(n)={root_n:.6g}")
    if gamma < 1:
        raise PopulationTooSmall(f"gamma >= 1 violated: gamma={gamma:.6g} (population too small)")
    if gamma > root_n / (theta + 1):
        raise ParameterError(
            f"gamma <= sqrt(n)/(theta+1) violated: gamma={gamma:.6g}, bound={root_n / (theta + 1):.6g}"
        )


def epsilon_from(n: int, L: int, theta: int, gamma: float, strict: bool = True) -> float:
    """Epsilon of one protocol execution.

    With ``strict=False`` only ``gamma * theta < sqrt(n)`` is enforced, which
    is all the formula itself needs.
    """
    if n < 1 or L < 1:
        raise ParameterError(f"n and L must be positive, got n={n}, L={L}")
    if strict:
        _check_ranges(n, theta, gamma)
    gt = gamma * theta
    root_n = math.sqrt(n)
    if not 0 < gt < root_n:
        raise ParameterError(f"0 < gamma*theta < sqrt(n) violated: gamma*theta={gt:.6g}, sqrt(n)={root_n:.6g}")
    # 1 / (sqrt(n)/(g*t) - 1) == g*t / (sqrt(n) - g*t)
    return L * math.log1p(gt / (root_n - gt))


def delta_from(theta: int) -> float:
    """Delta of one protocol execution, evaluated in exact rationals."""
    if theta < 4:
        raise ParameterError(f"theta >= 4 violated: theta={theta}")
    return float(Fraction(theta - 2, (theta - 3) * math.factorial(theta)))


def lambert_w(x: float) -> float:
    """Principal branch of the Lambert W function for ``x >= 0``.

    Halley iteration started from ``log1p(x)`` below ``e`` and from the
    asymptote ``ln x - ln ln x`` above it. A step that would cross the branch
    point at -1 is halved.
    """
    if not x >= 0 or math.isinf(x):
        raise ParameterError(f"lambert_w supports finite x >= 0 only, got {x}")
    if x == 0:
        return 0.0
    if x < math.e:
        w = math.log1p(x)
    else:
        lx = math.log(x)
        w = lx - math.log(lx)
    for _ in range(_LAMBERT_MAXITER):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        while w - step <= -1.0:
            step *= 0.5
        w -= step
        if abs(step) <= _LAMBERT_TOL * (1.0 + abs(w)):
            return w
    raise ArithmeticError(f"lambert_w did not converge for x={x}")


def lambert_theta(delta_target: float) -> int:
    """The uncapped Lambert-W threshold ``ceil(exp(W(C) + 1) - 1/2)``.

    ``C = ln(8 / (7 sqrt(2 pi) delta)) / e``. For ``C <= 0`` the term is at
    most ``ceil(e - 1/2) = 3``; 3 is returned.
    """
    if not 0 < delta_target < 1:
        raise ParameterError(f"0 < delta < 1 violated: delta={delta_target}")
    c = math.log(8.0 / (7.0 * math.sqrt(2.0 * math.pi) * delta_target)) / math.e
    if c <= 0:
        return 3
    return math.ceil(math.exp(lambert_w(c) + 1.0) - 0.5)


def _select_theta(delta_target: float) -> tuple[int, int]:
    theta = max(10, lambert_theta(delta_target))
    bumps = 0
    while delta_from(theta) > delta_target:
        theta += 1
        bumps += 1
    if bumps:
        logger.info("lambert theta for delta=%g raised by %d to %d", delta_target, bumps, theta)
    return theta, bumps


def select_theta(delta_target: float) -> int:
    """Smallest safe threshold from the Lambert-W rule, floored at 10.

    If the closed form under-delivers, theta is increased (never decreased)
    until ``delta_from(theta) <= delta_target``.
    """
    return _select_theta(delta_target)[0]


def theta_log_rule(n: int) -> int:
    """``ceil(log10(n) + 6)``; gives delta <= 1/(300 n) for ``n >= 10**4``."""
    if n < 10**4:
        raise ParameterError(f"n >= 10**4 violated for the log10 threshold rule: n={n}")
    return math.ceil(math.log10(n) + 6)


def select_gamma(n: int, L: int, epsilon: float, theta: int) -> float:
    """Batch scale that spends exactly ``epsilon``.

    ``gamma = (e^(eps/L) - 1) sqrt(n) / (theta e^(eps/L))``.
    """
    if epsilon <= 0:
        raise ParameterError(f"epsilon > 0 violated: epsilon={epsilon}")
    if L < 1 or n < 1:
        raise ParameterError(f"n and L must be positive, got n={n}, L={L}")
    bound = L * math.log(theta + 1)
    if epsilon > bound:
        raise ParameterError(f"epsilon <= L*ln(theta+1) violated: epsilon={epsilon}, bound={bound:.6g}")
    gamma = -math.expm1(-epsilon / L) * math.sqrt(n) / theta
    if gamma < 1:
        raise PopulationTooSmall(
            f"gamma >= 1 violated: gamma={gamma:.6g} for n={n}, L={L}, epsilon={epsilon}, theta={theta}"
            " (population too small)"
        )
    return gamma


def batch_size(gamma: float, n: int) -> int:
    """``m = floor(gamma * sqrt(n))``, at least 1."""
    return max(1, math.floor(gamma * math.sqrt(n)))


INV_300N = "inv300n"
INV_N_SQUARED = "invn2"
_MODE_ALIASES = {
    "inv300n": INV_300N,
    "inv_300n": INV_300N,
    "invn2": INV_N_SQUARED,
    "inv_n_squared": INV_N_SQUARED,
}


def parse_delta_mode(mode) -> str | float:
    """Normalize a delta mode.

    Accepts ``"inv300n"``, ``"invn2"`` (alias ``"inv_n_squared"``), a float,
    or the string ``"explicit=<delta>"``. Returns the canonical name or the
    explicit delta as a float.
    """
    if isinstance(mode, (int, float)) and not isinstance(mode, bool):
        delta = float(mode)
    elif isinstance(mode, str):
        key = mode.strip().lower()
        if key in _MODE_ALIASES:
            return _MODE_ALIASES[key]
        if key.startswith("explicit="):
            try:
                delta = float(key.split("=", 1)[1])
            except ValueError:
                raise ParameterError(f"cannot parse explicit delta in {mode!r}") from None
        else:
            raise ParameterError(f"unknown delta mode {mode!r}; use inv300n, invn2 or explicit=<delta>")
    else:
        raise ParameterError(f"unknown delta mode {mode!r}")
    if not 0 < delta < 1:
        raise ParameterError(f"0 < delta < 1 violated: delta={delta}")
    return delta


def delta_target(n: int, mode) -> float:
    mode = parse_delta_mode(mode)
    if mode == INV_300N:
        return 1.0 / (300 * n)
    if mode == INV_N_SQUARED:
        return 1.0 / n**2
    return mode


@dataclass(frozen=True)
class PrivacyParams:
    """A validated parameter set together with its realized guarantee.

    ``epsilon`` and ``delta`` are what the formulas give for ``gamma`` and
    ``theta``. ``m`` is the integer batch actually drawn, so the executed
    protocol spends at most ``epsilon``.
    """

    n: int
    max_length: int
    theta: int
    gamma: float
    m: int
    epsilon: float
    delta: float
    delta_target: float | None = None
    theta_rule: str = "given"

    def __post_init__(self):
        _check_ranges(self.n, self.theta, self.gamma)
        if not 1 <= self.m <= self.n:
            raise ParameterError(f"1 <= m <= n violated: m={self.m}, n={self.n}")
        eps = epsilon_from(self.n, self.max_length, self.theta, self.gamma)
        if not math.isclose(eps, self.epsilon, rel_tol=1e-9):
            raise ParameterError(f"epsilon={self.epsilon} inconsistent with formula value {eps}")
        dlt = delta_from(self.theta)
        if not math.isclose(dlt, self.delta, rel_tol=1e-9):
            raise ParameterError(f"delta={self.delta} inconsistent with formula value {dlt}")

    @classmethod
    def from_theta_gamma(cls, n: int, max_length: int, theta: int, gamma: float, **kw) -> "PrivacyParams":
        return cls(
            n=n,
            max_length=max_length,
            theta=theta,
            gamma=gamma,
            m=batch_size(gamma, n),
            epsilon=epsilon_from(n, max_length, theta, gamma),
            delta=delta_from(theta),
            **kw,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def table_row(self) -> str:
        """One markdown table row: n, L, theta, gamma (2 decimals), m."""
        return f"| n={self.n} | L={self.max_length} | theta={self.theta} | gamma={self.gamma:.2f} | m={self.m} |"


def choose_parameters(n: int, L: int, epsilon: float, delta_mode) -> PrivacyParams:
    """Pick ``theta`` and ``gamma`` so one execution is (epsilon, delta)-DP.

    ``delta_mode`` is ``"inv300n"`` (log10 rule), ``"invn2"`` (Lambert rule
    at delta = 1/n^2) or an explicit delta (Lambert rule).
    """
    mode = parse_delta_mode(delta_mode)
    target = delta_target(n, mode)
    if mode == INV_300N:
        theta = theta_log_rule(n)
        rule = "log10"
        while delta_from(theta) > target:
            theta += 1
            rule = "log10+"
    else:
        theta, bumps = _select_theta(target)
        rule = "lambert" if not bumps else f"lambert+{bumps}"
    gamma = select_gamma(n, L, epsilon, theta)
    return PrivacyParams.from_theta_gamma(n, L, theta, gamma, delta_target=target, theta_rule=rule)
