"""Domain types for the market: generators, uncertainty, cases, solutions.

All types are frozen dataclasses; every operation is pure.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import normal


class Family(enum.Enum):
    NORMAL = "normal"
    MOMENT_SET = "moment_set"


class Formulation(enum.Enum):
    NORMAL_MILP = "milp"
    NORMAL_MIQP = "normal_miqp"
    CHEBYSHEV = "chebyshev"
    EXACT_SOC = "exact_soc"


@dataclass(frozen=True)
class Generator:
    """One controllable producer: cost curve C0 + C1*p + C2*p^2, output box
    [p_min, p_max], and per-unit violation tolerance epsilon."""
    id: str
    zone: int
    c0: float
    c1: float
    c2: float
    p_min: float
    p_max: float
    epsilon: float
    must_run: bool = False

    def __post_init__(self):
        if not 0.0 <= self.p_min <= self.p_max:
            raise ValueError(f"generator {self.id}: need 0 <= p_min <= p_max, "
                             f"got p_min={self.p_min}, p_max={self.p_max}")
        for name in ("c0", "c1", "c2"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"generator {self.id}: {name} must be >= 0")
        if not 0.0 < self.epsilon <= 0.5:
            raise ValueError(f"generator {self.id}: epsilon must lie in (0, 0.5], "
                             f"got {self.epsilon}")

    @property
    def half_range(self) -> float:
        return 0.5 * (self.p_max - self.p_min)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.p_max + self.p_min)


@dataclass(frozen=True)
class UncertaintyModel:
    """First two moments of the wind forecast error omega (system-wide)."""
    mu: float
    sigma: float
    family: Family = Family.MOMENT_SET

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError(f"uncertainty: sigma must be positive, got {self.sigma}")

    def sigma_hat(self, epsilon: float) -> float:
        return normal.sigma_hat(self.mu, self.sigma, epsilon)

    def sigma_tilde(self, epsilon: float) -> float:
        return normal.sigma_tilde(self.mu, self.sigma, epsilon)


def sigma_hat(unc: UncertaintyModel, epsilon: float) -> float:
    return unc.sigma_hat(epsilon)


def sigma_tilde(unc: UncertaintyModel, epsilon: float) -> float:
    return unc.sigma_tilde(epsilon)


def adjust_epsilon_for_mu(epsilon_hat: float, unc: UncertaintyModel) -> float:
    return normal.adjust_epsilon_for_mu(epsilon_hat, unc.mu, unc.sigma)


@dataclass(frozen=True)
class SystemCase:
    """A single-instant clearing case: fleet, forecasts, uncertainty, formulation."""
    generators: tuple[Generator, ...]
    demand: float
    wind_forecast: float
    uncertainty: UncertaintyModel
    formulation: Formulation = Formulation.CHEBYSHEV

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if self.demand <= 0.0:
            raise ValueError(f"case: demand must be positive, got {self.demand}")
        if self.wind_forecast < 0.0:
            raise ValueError(f"case: wind_forecast must be non-negative, got {self.wind_forecast}")
        if len(self.generators) == 0:
            raise ValueError("case: at least one generator required")
        ids = [g.id for g in self.generators]
        if len(set(ids)) != len(ids):
            raise ValueError("case: generator ids must be unique")
        if sum(g.p_max for g in self.generators) < self.net_demand:
            raise ValueError(
                f"case: fleet capacity {sum(g.p_max for g in self.generators):.6g} MW "
                f"cannot cover net demand {self.net_demand:.6g} MW")

    @property
    def net_demand(self) -> float:
        return self.demand - self.wind_forecast

    def with_formulation(self, formulation: Formulation) -> "SystemCase":
        return replace(self, formulation=formulation)


@dataclass(frozen=True)
class MarketSolution:
    """Cleared quantities per generator, in fleet order."""
    generator_ids: tuple[str, ...]
    p: np.ndarray
    alpha: np.ndarray
    u: np.ndarray            # 0/1 ints
    y: np.ndarray            # exact-SOC auxiliaries; zeros elsewhere
    pi: np.ndarray
    x: np.ndarray            # = (p - mu*alpha)^2 substitution values
    z: np.ndarray            # = alpha^2
    objective: float
    formulation: Formulation

    def balance_residual(self, net_demand: float) -> float:
        return math.fsum(self.p.tolist()) - net_demand

    def participation_residual(self) -> float:
        return math.fsum(self.alpha.tolist()) - 1.0


def recourse_output(p: float, alpha: float, omega: float):
    """Second-stage output under realization omega: p - alpha*omega."""
    return p - alpha * omega


def expected_cost(gen: Generator, p: float, alpha: float, u: float,
                  unc: UncertaintyModel) -> float:
    """Expected operating cost under the affine recourse, using only (mu, sigma):
    C0*u + C1*(p - mu*alpha) + C2*(p^2 - 2*mu*alpha*p + alpha^2*(sigma^2 + mu^2))."""
    mu, s2 = unc.mu, unc.sigma ** 2
    return (gen.c0 * u
            + gen.c1 * (p - mu * alpha)
            + gen.c2 * (p * p - 2.0 * mu * alpha * p + alpha * alpha * (s2 + mu * mu)))


def reserve_margins(alpha: np.ndarray, sigma_hat_values: np.ndarray):
    """Symmetric up/down reserve carried by each unit: r = alpha * sigma_hat."""
    r = np.asarray(alpha, dtype=float) * np.asarray(sigma_hat_values, dtype=float)
    return r.copy(), r.copy()


def polish_dispatch(p: np.ndarray, alpha: np.ndarray, net_demand: float):
    """Project (p, alpha) exactly onto the balance and participation equalities.

    Participation is renormalized, then the residual demand is spread in
    proportion to alpha; afterwards sum(p) - net_demand and sum(alpha) - 1 are
    zero at machine precision, which the per-scenario balance check relies on.
    """
    alpha = np.asarray(alpha, dtype=float).copy()
    p = np.asarray(p, dtype=float).copy()
    alpha = np.maximum(alpha, 0.0)
    total = math.fsum(alpha.tolist())
    if total <= 0.0:
        raise ValueError("polish_dispatch: participation collapsed to zero")
    alpha /= total
    deficit = net_demand - math.fsum(p.tolist())
    p += alpha * deficit
    # one more pass tightens the fsum residual to the last ulp
    deficit = net_demand - math.fsum(p.tolist())
    if deficit != 0.0:
        j = int(np.argmax(alpha))
        p[j] += deficit
    return p, alpha
