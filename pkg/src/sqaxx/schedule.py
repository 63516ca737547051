"""Annealing schedules Gamma(t), K(t) and their convergence-condition checks.

Asymptotic form, for ``t >= t_switch`` and ``x = c3 t + c4``::

    Gamma(t) = (b M / beta) * atanh(x ** -g(t))
    K(t)     = (M / beta)   * atanh(x ** -h(t))

With the degree factor b included, ``c1 = (g/2) log x`` and ``d2 = (h/2) log x``
hold exactly. Before ``t_switch`` the parameters ramp linearly from
``(gamma0, 0)`` to their asymptotic values at the switch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .model import AnnealParams, IsingProblem
from .trotter import reduced_params, sign_margin


class ScheduleError(ValueError):
    """Schedule evaluated outside its domain."""


class Constant:
    """Exponent function that does not change with time."""

    def __init__(self, value: float):
        self.value = float(value)

    def __call__(self, t):
        return self.value + 0.0 * np.asarray(t, dtype=float) if np.ndim(t) else self.value

    def d1(self, t):
        return 0.0 * np.asarray(t, dtype=float) if np.ndim(t) else 0.0

    def d2(self, t):
        return self.d1(t)

    def to_json(self):
        return self.value

    def __repr__(self):
        return f"Constant({self.value!r})"


class Tabulated:
    """Tabulated exponent function, interpolated by a C2 cubic spline in ``log1p(t)``.

    Beyond the last sample the value is held constant; the spline is clamped to
    zero slope there so the first derivative stays continuous.
    """

    def __init__(self, times: Sequence[float], values: Sequence[float]):
        t = np.asarray(times, dtype=float)
        v = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 4:
            raise ScheduleError("a tabulated schedule needs at least 4 (t, value) samples")
        if np.any(np.diff(t) <= 0) or t[0] < 0:
            raise ScheduleError("tabulated times must be non-negative and strictly increasing")
        self.times, self.values = t, v
        self._s = np.log1p(t)
        self._spline = CubicSpline(self._s, v, bc_type=("natural", (1, 0.0)))

    def _eval(self, t, nu):
        t = np.asarray(t, dtype=float)
        s = np.clip(np.log1p(t), self._s[0], self._s[-1])
        out = self._spline(s, nu)
        if nu:
            out = np.where(np.log1p(t) > self._s[-1], 0.0, out)
        return out

    def __call__(self, t):
        out = self._eval(t, 0)
        return float(out) if np.ndim(out) == 0 else out

    def d1(self, t):
        out = self._eval(t, 1) / (1.0 + np.asarray(t, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    def d2(self, t):
        tt = np.asarray(t, dtype=float)
        out = (self._eval(tt, 2) - self._eval(tt, 1)) / (1.0 + tt) ** 2
        return float(out) if np.ndim(out) == 0 else out

    def to_json(self):
        return {"t": self.times.tolist(), "values": self.values.tolist()}


class Analytic:
    """Exponent function given by callables for the value and its two derivatives."""

    def __init__(self, f: Callable, d1: Callable, d2: Callable, label: str = "analytic"):
        self._f, self._d1, self._d2, self.label = f, d1, d2, label

    def __call__(self, t):
        return self._f(t)

    def d1(self, t):
        return self._d1(t)

    def d2(self, t):
        return self._d2(t)

    def to_json(self):
        raise TypeError(f"analytic schedule function {self.label!r} cannot be serialized")


class InverseLog:
    """``base + amplitude / log(c3 t + c4)``: approaches ``base`` with slowly decaying derivatives."""

    def __init__(self, base: float, amplitude: float, c3: float = 1.0, c4: float = 2.0):
        if not (c3 > 0 and c4 > 1):
            raise ScheduleError("InverseLog needs c3 > 0 and c4 > 1")
        self.base, self.amplitude, self.c3, self.c4 = float(base), float(amplitude), float(c3), float(c4)

    def _xl(self, t):
        x = self.c3 * np.asarray(t, dtype=float) + self.c4
        return x, np.log(x)

    @staticmethod
    def _out(v):
        return float(v) if np.ndim(v) == 0 else v

    def __call__(self, t):
        _, lx = self._xl(t)
        return self._out(self.base + self.amplitude / lx)

    def d1(self, t):
        x, lx = self._xl(t)
        return self._out(-self.amplitude * self.c3 / (x * lx**2))

    def d2(self, t):
        x, lx = self._xl(t)
        return self._out(self.amplitude * self.c3**2 * (lx + 2.0) / (x**2 * lx**3))

    def to_json(self):
        return {"inverse_log": {"base": self.base, "amplitude": self.amplitude, "c3": self.c3, "c4": self.c4}}


def as_function(spec):
    """Turn a number, a table ``{"t": [...], "values": [...]}``, an ``{"inverse_log": {...}}``
    descriptor or a function object into an exponent function."""
    if spec is None:
        return None
    if isinstance(spec, (Constant, Tabulated, Analytic, InverseLog)):
        return spec
    if isinstance(spec, dict):
        if "inverse_log" in spec:
            return InverseLog(**spec["inverse_log"])
        return Tabulated(spec["t"], spec["values"])
    return Constant(float(spec))


@dataclass(frozen=True)
class PropConstants:
    """Constants c', c'', d', d'' bounding the exponent derivatives (user hypotheses)."""

    c_prime: float = 1e-3
    c_dprime: float = 1e-3
    d_prime: float = 1e-3
    d_dprime: float = 1e-3


@dataclass(frozen=True)
class AnnealBase:
    """Fixed simulation constants a schedule is evaluated against."""

    beta: float
    trotter_slices: int
    degree: int

    @classmethod
    def for_problem(cls, problem: IsingProblem, beta: float, trotter_slices: int) -> "AnnealBase":
        return cls(float(beta), int(trotter_slices), problem.degree)


@dataclass(frozen=True)
class SchedulePolicy:
    """Asymptotic schedule plus initial ramp.

    ``h=None`` switches the catalyst off (K identically zero). ``t_switch=None``
    selects the smallest t at which the asymptotic Gamma drops to ``gamma0``.
    ``include_degree=False`` drops the factor b from Gamma(t) (literal form).
    """

    c3: float
    c4: float
    g: object
    h: object = None
    t_switch: Optional[float] = None
    gamma0: Optional[float] = None
    prop_constants: PropConstants = field(default_factory=PropConstants)
    include_degree: bool = True

    def __post_init__(self):
        if not self.c3 > 0:
            raise ScheduleError(f"c3 must be positive, got {self.c3}")
        if not self.c4 > 1:
            raise ScheduleError(f"c4 must exceed 1, got {self.c4}")
        object.__setattr__(self, "g", as_function(self.g))
        object.__setattr__(self, "h", as_function(self.h))
        if self.g is None:
            raise ScheduleError("g is required")
        if self.t_switch is not None and self.t_switch < 0:
            raise ScheduleError("t_switch must be >= 0")

    def x(self, t):
        return self.c3 * np.asarray(t, dtype=float) + self.c4 if np.ndim(t) else self.c3 * t + self.c4

    def _gamma_factor(self, base: AnnealBase) -> float:
        b = base.degree if self.include_degree else 1
        return b * base.trotter_slices / base.beta

    def switch_time(self, base: AnnealBase) -> float:
        if self.t_switch is not None:
            return float(self.t_switch)
        if self.gamma0 is None:
            return 0.0
        target = math.tanh(self.gamma0 / self._gamma_factor(base))

        def excess(t):
            return self.x(t) ** (-self.g(t)) - target

        if excess(0.0) <= 0:
            return 0.0
        hi = 1.0
        while excess(hi) > 0:
            hi *= 2.0
            if hi > 1e300:
                raise ScheduleError("asymptotic Gamma never drops to gamma0")
        lo = 0.0 if hi == 1.0 else hi / 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if excess(mid) > 0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-12 * hi:
                break
        return hi

    def asymptotic_params(self, base: AnnealBase, t: float) -> AnnealParams:
        x = self.x(t)
        eg = x ** (-self.g(t))
        if not (0.0 <= eg < 1.0):
            raise ScheduleError(f"(c3 t + c4)^(-g) = {eg} outside [0, 1) at t={t}")
        gamma = self._gamma_factor(base) * math.atanh(eg)
        if self.h is None:
            kappa = 0.0
        else:
            eh = x ** (-self.h(t))
            if not (0.0 <= eh < 1.0):
                raise ScheduleError(f"(c3 t + c4)^(-h) = {eh} outside [0, 1) at t={t}")
            kappa = base.trotter_slices / base.beta * math.atanh(eh)
        return AnnealParams(base.beta, base.trotter_slices, gamma, kappa)

    def params_at(self, base: AnnealBase, t: float) -> AnnealParams:
        if t < 0:
            raise ScheduleError(f"t must be >= 0, got {t}")
        ts = self.switch_time(base)
        if t >= ts:
            return self.asymptotic_params(base, t)
        end = self.asymptotic_params(base, ts)
        gamma0 = end.gamma if self.gamma0 is None else self.gamma0
        frac = t / ts
        return AnnealParams(base.beta, base.trotter_slices, gamma0 + (end.gamma - gamma0) * frac, end.kappa * frac)

    def to_json(self) -> dict:
        return {
            "c3": self.c3,
            "c4": self.c4,
            "g": self.g.to_json(),
            "h": None if self.h is None else self.h.to_json(),
            "t_switch": self.t_switch,
            "gamma0": self.gamma0,
            "prop_constants": asdict(self.prop_constants),
            "include_degree": self.include_degree,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SchedulePolicy":
        known = {"c3", "c4", "g", "h", "t_switch", "gamma0", "prop_constants", "include_degree"}
        unknown = set(data) - known
        if unknown:
            raise ScheduleError(f"unknown policy keys: {sorted(unknown)}")
        pc = data.get("prop_constants") or {}
        return cls(
            c3=float(data["c3"]),
            c4=float(data["c4"]),
            g=data["g"],
            h=data.get("h"),
            t_switch=data.get("t_switch"),
            gamma0=data.get("gamma0"),
            prop_constants=PropConstants(**pc),
            include_degree=bool(data.get("include_degree", True)),
        )


def standard_policy(n: int, c3: float = 1.0, c4: float = 2.0, **kwargs) -> SchedulePolicy:
    """The constant-exponent example g = 1/(2N), h = 2/N."""
    return SchedulePolicy(c3=c3, c4=c4, g=1.0 / (2 * n), h=2.0 / n, **kwargs)


@dataclass(frozen=True)
class FrozenSchedule:
    """Schedule that holds one parameter set forever (no time dependence)."""

    params: AnnealParams
    c3: float = 1.0
    c4: float = 2.0

    def switch_time(self, base) -> float:
        return 0.0

    def params_at(self, base, t: float) -> AnnealParams:
        return self.params


def params_at(policy, base: AnnealBase, t: float) -> AnnealParams:
    return policy.params_at(base, t)


def fd_step(policy, t: float) -> float:
    """Finite-difference step for schedule-time derivatives (logarithmic timescale)."""
    return max(1e-3 * (t + policy.c4 / policy.c3), 1e-6)


# ---------------------------------------------------------------------------
# convergence-condition validation


@dataclass
class ConditionResult:
    key: str
    description: str
    passed: bool
    witness_t: Optional[float] = None
    witness_value: Optional[float] = None
    bound: Optional[float] = None
    detail: str = ""

    def __post_init__(self):
        self.passed = bool(self.passed)
        for name in ("witness_t", "witness_value", "bound"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, float(v))

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class ValidationReport:
    n_spins: int
    conditions: list[ConditionResult]
    extra: list[ConditionResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions) and all(c.passed for c in self.extra)

    @property
    def failed(self) -> list[str]:
        return [c.key for c in self.conditions + self.extra if not c.passed]

    @property
    def failed_conditions(self) -> list[str]:
        """Failed keys among the nine convergence conditions only."""
        return [c.key for c in self.conditions if not c.passed]

    def condition(self, key: str) -> ConditionResult:
        for c in self.conditions + self.extra:
            if c.key == key:
                return c
        raise KeyError(key)

    def to_json(self) -> dict:
        return {
            "n_spins": self.n_spins,
            "passed": self.passed,
            "failed": self.failed,
            "conditions": [c.to_json() for c in self.conditions],
            "extra": [c.to_json() for c in self.extra],
        }


def _as_array(f, t):
    return np.broadcast_to(np.asarray(f(t), dtype=float), np.shape(t)).astype(float)


def _bound_check(key, desc, t, values, bound) -> ConditionResult:
    ratio = np.abs(values) / np.broadcast_to(bound, np.shape(values))
    worst = int(np.argmax(ratio))
    ok = bool(np.all(np.abs(values) <= np.broadcast_to(bound, np.shape(values)) * (1 + 1e-12)))
    return ConditionResult(key, desc, ok, float(t[worst]), float(values[worst]), float(np.broadcast_to(bound, np.shape(values))[worst]))


def _tends_to_zero(key, desc, t, values, zero_tol=1e-12, min_decay=0.05) -> ConditionResult:
    """Numeric certificate that ``values(t) -> 0``: negligible tail or a clear power-law decay."""
    a = np.abs(values)
    if np.all(a[-len(a) // 4 :] <= zero_tol):
        return ConditionResult(key, desc, True, float(t[-1]), float(values[-1]), detail="tail below tolerance")
    tail = slice(len(a) // 2, None)
    ta, aa = t[tail], a[tail]
    pos = aa > 0
    if pos.sum() < 3:
        return ConditionResult(key, desc, False, float(t[-1]), float(values[-1]), detail="not enough non-zero tail samples")
    slope = float(np.polyfit(np.log(ta[pos]), np.log(aa[pos]), 1)[0])
    ok = slope <= -min_decay and a[-1] <= a[len(a) // 2]
    return ConditionResult(key, desc, ok, float(t[-1]), float(values[-1]), detail=f"fitted decay exponent {slope:.4g}")


def validate(
    policy: SchedulePolicy,
    n_spins: int,
    *,
    t_max: float = 1e12,
    points_per_decade: int = 10,
    window_start: Optional[float] = None,
    limit_tol: float = 1e-9,
) -> ValidationReport:
    """Check the nine asymptotic conditions on g, h plus strict sign-freeness at the tail.

    Bound-type conditions are checked on the asymptotic window of a geometric
    time grid (default: the upper half of the grid in log-time); limits are
    certified by tail decay. The constants in ``policy.prop_constants`` are
    treated as hypotheses, so the report carries the witness values.
    """
    t_lo = max(policy.t_switch or 0.0, 1.0)
    decades = math.log10(t_max / t_lo)
    t = np.logspace(math.log10(t_lo), math.log10(t_max), max(int(round(decades * points_per_decade)) + 1, 8))
    if window_start is None:
        window_start = math.sqrt(t_lo * t_max)
    w = t[t >= window_start]
    x = policy.c3 * w + policy.c4
    xlog = x * np.log(x)
    pc = policy.prop_constants
    g, g1, g2 = _as_array(policy.g, w), _as_array(policy.g.d1, w), _as_array(policy.g.d2, w)
    conds: list[ConditionResult] = []

    if policy.h is None:
        conds.append(ConditionResult("h_2g_limit", "lim (h - 2g) != 0", True, detail="catalyst off (h -> infinity)"))
    else:
        lim = float(policy.h(t_max) - 2 * policy.g(t_max))
        conds.append(ConditionResult("h_2g_limit", "lim (h - 2g) != 0", abs(lim) > limit_tol, t_max, lim, limit_tol))

    g_max = 1.0 / (2 * n_spins)
    worst = int(np.argmax(g))
    ok48 = bool(np.all(g > 0) and np.all(g <= g_max * (1 + 1e-12)))
    if np.any(g <= 0):
        worst = int(np.argmin(g))
    conds.append(ConditionResult("g_range", "0 < g <= 1/(2N)", ok48, float(w[worst]), float(g[worst]), g_max))
    conds.append(_bound_check("g_d1_bound", "|g'| <= c'/(x log x)", w, g1, pc.c_prime / xlog))
    conds.append(_bound_check("g_d2_bound", "|g''| <= c''/(x log x)", w, g2, pc.c_dprime / xlog))

    if policy.h is None:
        for key, desc in (
            ("h_d1_bound", "|h'| <= d'"),
            ("h_d2_bound", "|h''| <= d''/(x log x)"),
            ("h_over_x_limit", "h/x -> 0"),
            ("h_d1_log_limit", "h' log x -> 0"),
            ("h_d2_log_limit", "h'' log x -> 0"),
        ):
            conds.append(ConditionResult(key, desc, True, detail="catalyst off"))
        extra = [ConditionResult("strict_sign_free", "h > 2g at the grid tail", True, detail="catalyst off")]
        return ValidationReport(n_spins, conds, extra)

    h, h1, h2 = _as_array(policy.h, w), _as_array(policy.h.d1, w), _as_array(policy.h.d2, w)
    conds.append(_bound_check("h_d1_bound", "|h'| <= d'", w, h1, np.full_like(w, pc.d_prime)))
    conds.append(_bound_check("h_d2_bound", "|h''| <= d''/(x log x)", w, h2, pc.d_dprime / xlog))
    conds.append(_tends_to_zero("h_over_x_limit", "h/x -> 0", w, h / x))
    conds.append(_tends_to_zero("h_d1_log_limit", "h' log x -> 0", w, h1 * np.log(x)))
    conds.append(_tends_to_zero("h_d2_log_limit", "h'' log x -> 0", w, h2 * np.log(x)))

    tail = w[-max(points_per_decade, 1) :]
    margin = _as_array(policy.h, tail) - 2 * _as_array(policy.g, tail)
    k = int(np.argmin(margin))
    extra = [
        ConditionResult(
            "strict_sign_free", "h > 2g at the grid tail", bool(np.all(margin > limit_tol)), float(tail[k]), float(margin[k]), limit_tol
        )
    ]
    return ValidationReport(n_spins, conds, extra)


@dataclass
class TrajectoryReport:
    all_ok: bool
    margin_min: Optional[float]
    worst_t: Optional[float]
    tanh_margin_min: float


def trajectory_sign_free(policy: SchedulePolicy, base: AnnealBase, t_grid) -> TrajectoryReport:
    """Check sign-freeness at every grid time.

    ``margin_min`` is the smallest exponent margin ``h - 2g`` over asymptotic-phase
    points (``None`` if there are none or the catalyst is off); ``tanh_margin_min``
    is the smallest ``tanh(a)^2 - tanh(b_K)`` over all points.
    """
    ts = policy.switch_time(base)
    exp_margins, tanh_margins = [], []
    first_bad = None
    for t in np.asarray(t_grid, dtype=float):
        p = policy.params_at(base, float(t))
        m = sign_margin(*reduced_params(p, base.degree))
        tanh_margins.append((m, float(t)))
        if m < 0 and first_bad is None:
            first_bad = float(t)
        if t >= ts and policy.h is not None:
            exp_margins.append((float(policy.h(t) - 2 * policy.g(t)), float(t)))
    tanh_min = min(tanh_margins)[0]
    if exp_margins:
        margin_min, worst_t = min(exp_margins)
    else:
        margin_min, worst_t = None, min(tanh_margins)[1]
    if first_bad is not None:
        worst_t = first_bad
    return TrajectoryReport(first_bad is None, margin_min, worst_t, tanh_min)
