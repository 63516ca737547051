"""Pairwise Suzuki-Trotter kernel and the effective couplings of the Trotterized model.

Each bond <ij> contributes, between neighbouring slices, the matrix element of
``exp(a (X_i + X_j) - b_K X_i X_j)`` with ``a = beta*Gamma/(b*M)`` and
``b_K = beta*K/M``. The element depends only on how many of the two spins flip
between slices (weights C0, C1, C2). When C2 > 0 the element is written as
``exp(alpha1 (u + v) + alpha2 u v + lam)`` with ``u, v`` the Trotter-bond
products of the two sites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import AnnealParams

LOG2 = math.log(2.0)


class NonStoquasticError(ValueError):
    """Parameters fall outside the region where all local Boltzmann factors are positive."""

    def __init__(self, margin: float, a: float, b_k: float):
        self.margin = margin
        self.a = a
        self.b_k = b_k
        super().__init__(
            f"non-stoquastic region: tanh^2(a) - tanh(b_K) = {margin:.6g} "
            f"(a={a:.6g}, b_K={b_k:.6g}); two-flip weight C2 is not positive"
        )


def _logcosh(x: float) -> float:
    x = abs(x)
    return x + math.log1p(math.exp(-2.0 * x)) - LOG2


def pair_kernel(a: float, b_k: float) -> tuple[float, float, float]:
    """Weights (C0, C1, C2) of the one-bond kernel for zero, one and two flips."""
    ch, sh = math.cosh(a), math.sinh(a)
    cb, sb = math.cosh(b_k), math.sinh(b_k)
    c0 = ch * ch * cb - sh * sh * sb
    c1 = ch * sh * (cb - sb)
    c2 = sh * sh * cb - ch * ch * sb
    return c0, c1, c2


def reduced_params(params: AnnealParams, degree: int) -> tuple[float, float]:
    """Return ``(a, b_K)`` for the given parameters and graph degree."""
    return params.beta * params.gamma / (degree * params.trotter_slices), params.beta * params.kappa / params.trotter_slices


def sign_margin(a: float, b_k: float) -> float:
    """``tanh(a)**2 - tanh(b_K)``; non-negative exactly when C2 >= 0."""
    return math.tanh(a) ** 2 - math.tanh(b_k)


def sign_free(params: AnnealParams, degree: int) -> bool:
    """True iff every local Boltzmann factor of the Trotterized kernel is non-negative."""
    return sign_margin(*reduced_params(params, degree)) >= 0.0


@dataclass(frozen=True)
class TrotterCoefficients:
    """Derived per-bond quantities of one Trotterized system.

    ``c1`` and ``d2`` are the half-log-coth variables (``d2`` is ``inf`` at K=0);
    ``lam`` is the fully absorbed per-bond log-prefactor; ``alpha3`` is the
    constant in the half-log-coth form, ``None`` when K=0.
    ``beta_over_m``, ``degree`` and ``trotter_slices`` are carried along so that
    energies can be evaluated from the coefficients alone (``None`` when the
    coefficients were built from bare ``(a, b_K)``).
    """

    a: float
    b_k: float
    c1: float
    d2: float
    c0_kernel: float
    c1_kernel: float
    c2_kernel: float
    alpha1: float
    alpha2: float
    lam: float
    alpha3: Optional[float]
    beta_over_m: Optional[float] = None
    degree: Optional[int] = None
    trotter_slices: Optional[int] = None

    @property
    def margin(self) -> float:
        return sign_margin(self.a, self.b_k)

    def bond_factor(self, u, v):
        """``exp(alpha1 (u+v) + alpha2 u v + lam)`` for Trotter-bond products u, v."""
        return np.exp(self.alpha1 * (np.add(u, v)) + self.alpha2 * np.multiply(u, v) + self.lam)


def _closed_forms(a: float, b_k: float) -> tuple[float, float, float]:
    # factor cosh^2(a) cosh(b_K) out of every C so no difference of large terms is taken
    tg, tk = math.tanh(a), math.tanh(b_k)
    tg2 = tg * tg
    log_pref = 2.0 * _logcosh(a) + _logcosh(b_k)
    log_c0 = log_pref + math.log1p(-tg2 * tk)
    log_c2 = log_pref + math.log(tg2 - tk)
    log_c1 = log_pref + math.log(tg) + math.log1p(-tk)
    alpha1 = 0.25 * (log_c0 - log_c2)
    alpha2 = 0.25 * math.log1p(-tk * (1.0 - tg2) ** 2 / ((1.0 - tk) ** 2 * tg2))
    lam = 0.25 * (log_c0 + log_c2 + 2.0 * log_c1)
    return alpha1, alpha2, lam


def _half_log_coth_forms(c1: float, d2: float) -> tuple[float, float, float]:
    """alpha1, alpha2, alpha3 evaluated from c1, d2 (real d2, K > 0)."""
    e4c1, e2d2 = math.exp(4.0 * c1), math.exp(2.0 * d2)
    cosh_sum = e2d2 + 1.0 / e2d2
    mid = cosh_sum - e4c1 - 1.0 / e4c1
    low = cosh_sum - 2.0
    alpha1 = 0.25 * math.log((e4c1 * e2d2 + 1.0 / (e4c1 * e2d2) - 2.0) / mid)
    alpha2 = 0.25 * math.log(mid / low)
    alpha3 = 0.25 * (math.log(mid) + math.log(low))
    return alpha1, alpha2, alpha3


def _agree(x: float, y: float, rel: float, abs_tol: float) -> bool:
    return math.isclose(x, y, rel_tol=rel, abs_tol=abs_tol)


def coefficients_from_reduced(
    a: float,
    b_k: float,
    *,
    beta_over_m: Optional[float] = None,
    degree: Optional[int] = None,
    trotter_slices: Optional[int] = None,
    check: bool = True,
) -> TrotterCoefficients:
    """Effective couplings for reduced parameters ``(a, b_K)``.

    Raises:
        NonStoquasticError: if ``tanh(a)^2 <= tanh(b_K)`` (C2 not strictly positive).
    """
    if a < 0 or b_k < 0:
        raise ValueError("a and b_K must be non-negative")
    margin = sign_margin(a, b_k)
    if margin <= 0.0 or a == 0.0:
        raise NonStoquasticError(margin, a, b_k)
    c0, c1k, c2 = pair_kernel(a, b_k)
    alpha1, alpha2, lam = _closed_forms(a, b_k)
    c1 = -0.5 * math.log(math.tanh(a))
    if b_k == 0.0:
        d2 = math.inf
        alpha3 = None
        alpha2 = 0.0
    else:
        d2 = -0.5 * math.log(math.tanh(b_k))
        alpha3 = None
        try:
            h1, h2, alpha3 = _half_log_coth_forms(c1, d2)
        except (OverflowError, ValueError):
            h1 = h2 = None
        if h1 is not None and not (math.isfinite(h1) and math.isfinite(h2)):
            # b_K so small that coth(b_K) overflows; only the C-form check applies
            h1 = h2 = None
    if check:
        # rounding in the raw C-forms grows like C0/C2 near the sign boundary
        abs_tol = 1e-14 * max(1.0, c0 / c2)
        raw = (0.25 * math.log(c0 / c2), 0.25 * math.log(c0 * c2 / (c1k * c1k)), 0.25 * math.log(c0 * c2 * c1k * c1k))
        for name, ours, other in zip(("alpha1", "alpha2", "lambda"), (alpha1, alpha2, lam), raw):
            if not _agree(ours, other, 1e-10, abs_tol):
                raise ArithmeticError(f"{name}: closed form {ours!r} disagrees with C-form {other!r}")
        if b_k > 0.0 and h1 is not None:
            for name, ours, other in (("alpha1", alpha1, h1), ("alpha2", alpha2, h2)):
                if not _agree(ours, other, 1e-10, abs_tol):
                    raise ArithmeticError(f"{name}: closed form {ours!r} disagrees with log-coth form {other!r}")
    return TrotterCoefficients(
        a=a,
        b_k=b_k,
        c1=c1,
        d2=d2,
        c0_kernel=c0,
        c1_kernel=c1k,
        c2_kernel=c2,
        alpha1=alpha1,
        alpha2=alpha2,
        lam=lam,
        alpha3=alpha3,
        beta_over_m=beta_over_m,
        degree=degree,
        trotter_slices=trotter_slices,
    )


def coefficients(params: AnnealParams, degree: int, *, check: bool = True) -> TrotterCoefficients:
    """Effective couplings alpha1, alpha2, lam (and alpha3) for ``params`` on a degree-``degree`` graph."""
    a, b_k = reduced_params(params, degree)
    return coefficients_from_reduced(
        a,
        b_k,
        beta_over_m=params.beta_over_m,
        degree=degree,
        trotter_slices=params.trotter_slices,
        check=check,
    )


def alpha3_prefactor_log(a: float, b_k: float) -> float:
    """Real part of the log of the kernel prefactor that accompanies alpha3.

    ``lam == alpha3 + alpha3_prefactor_log(a, b_K)`` for K > 0; the imaginary
    part (i pi/2 from the square root of ``sinh(-2 b_K)``) is dropped.
    """
    return math.log(0.5 * math.sinh(2.0 * a)) + 0.5 * math.log(0.5 * math.sinh(2.0 * b_k))


def verify_pair_identity(a: float, b_k: float) -> float:
    """Worst relative gap between kernel weights and the exponential bond factor.

    Compares C0/C1/C2 against ``exp(alpha1 (u+v) + alpha2 u v + lam)`` for all
    four ``(u, v)`` in ``{+1, -1}^2``.
    """
    co = coefficients_from_reduced(a, b_k)
    kernel = {0: co.c0_kernel, 1: co.c1_kernel, 2: co.c2_kernel}
    worst = 0.0
    for u in (1, -1):
        for v in (1, -1):
            flips = (u < 0) + (v < 0)
            lhs = kernel[flips]
            rhs = math.exp(co.alpha1 * (u + v) + co.alpha2 * u * v + co.lam)
            worst = max(worst, abs(lhs - rhs) / abs(lhs))
    return worst


@dataclass(frozen=True)
class CoefficientDerivatives:
    """First and second time derivatives of alpha1, alpha2, lam along a schedule."""

    t: float
    step: float
    alpha1_d1: float
    alpha1_d2: float
    alpha2_d1: float
    alpha2_d2: float
    lam_d1: float
    lam_d2: float
    halving_discrepancy: float

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.alpha1_d1, self.alpha1_d2, self.alpha2_d1, self.alpha2_d2, self.lam_d1, self.lam_d2)


def _central(f_minus, f0, f_plus, h):
    return (f_plus - f_minus) / (2.0 * h), (f_plus - 2.0 * f0 + f_minus) / (h * h)


def coefficient_derivatives(policy, problem, base, t: float) -> CoefficientDerivatives:
    """Finite-difference derivatives of (alpha1, alpha2, lam) at schedule time ``t``.

    ``base`` is an :class:`~sqaxx.schedule.AnnealBase`. Uses central differences
    with step ``fd_step(policy, t)``; the estimate at half the step is also
    computed and the worst relative disagreement between the two is reported.

    Raises:
        ValueError: if the stencil reaches back across the schedule switch time.
    """
    from .schedule import fd_step

    h = fd_step(policy, t)
    t_switch = policy.switch_time(base)
    if t - h < t_switch:
        raise ValueError(f"t={t} too close to the schedule switch at {t_switch} for step {h}")

    def values(tt):
        co = coefficients(policy.params_at(base, tt), problem.degree)
        return np.array([co.alpha1, co.alpha2, co.lam])

    f0 = values(t)
    full = _central(values(t - h), f0, values(t + h), h)
    half = _central(values(t - h / 2), f0, values(t + h / 2), h / 2)
    d1, d2 = full
    diffs = []
    for x, y in zip(np.concatenate(full), np.concatenate(half)):
        scale = max(abs(x), abs(y))
        diffs.append(0.0 if scale == 0.0 else abs(x - y) / scale)
    return CoefficientDerivatives(
        t=t,
        step=h,
        alpha1_d1=float(d1[0]),
        alpha1_d2=float(d2[0]),
        alpha2_d1=float(d1[1]),
        alpha2_d2=float(d2[1]),
        lam_d1=float(d1[2]),
        lam_d2=float(d2[2]),
        halving_discrepancy=max(diffs),
    )
