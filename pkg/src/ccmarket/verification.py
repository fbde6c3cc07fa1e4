"""Independent verification of the cleared market: producer best responses,
KKT residual blocks, Monte Carlo chance-constraint validation, and the
cost-recovery / revenue-adequacy audit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import conic
from .conic import ConicSolution, SolverConfig
from .formulations import (ALPHA_LINK, CAPACITY_DOWN, CAPACITY_UP, SOC,
                           FormulationArtifacts, RowTag, _Builder)
from .model import (Formulation, Generator, MarketSolution, SystemCase,
                    expected_cost)
from .pricing import PriceSystem, Settlement, settle

MC_DISTRIBUTIONS = ("normal", "uniform", "two_point", "student_t")


# ---------------------------------------------------------------------------
# producer best response

def _producer_program(gen: Generator, case: SystemCase, prices: PriceSystem,
                      u_star_i: int):
    """Single-producer profit maximization at fixed prices and commitment,
    written as a minimization of cost - revenue."""
    b = _Builder()
    unc = case.uncertainty
    mu, sigma = unc.mu, unc.sigma
    form = case.formulation
    milp = form is Formulation.NORMAL_MILP
    c2 = 0.0 if milp else gen.c2
    gamma = prices.effective_gamma()[
        [g.id for g in case.generators].index(gen.id)]
    b.const = (gen.c0 - gamma) * u_star_i
    if mu == 0.0 or milp:
        jp = b.var("p", gen.id, lb=0.0, c=gen.c1 - prices.lam, q=c2)
        ja = b.var("alpha", gen.id, lb=0.0, c=-prices.chi, q=c2 * sigma ** 2)
    else:
        jp = b.var("p", gen.id, lb=0.0, c=-prices.lam)
        ja = b.var("alpha", gen.id, lb=0.0, c=-prices.chi, q=c2 * sigma ** 2)
        jw = b.var("w", gen.id, lb=-math.inf, c=gen.c1, q=c2)
        b.eq({jw: 1.0, jp: -1.0, ja: mu}, 0.0, RowTag("recourse-link", gen.id))
    if form is Formulation.EXACT_SOC:
        jy = b.var("y", gen.id, lb=0.0)
        jpi = b.var("pi", gen.id, lb=0.0, ub=gen.half_range)
        b.le({jp: 1.0, jy: -1.0, jpi: -1.0}, gen.midpoint * u_star_i,
             RowTag(CAPACITY_UP, gen.id))
        b.le({jp: -1.0, jy: -1.0, jpi: -1.0}, -gen.midpoint * u_star_i,
             RowTag(CAPACITY_DOWN, gen.id))
        b.cone(math.sqrt(gen.epsilon), {jpi: -1.0}, gen.half_range,
               [{jy: 1.0}, {ja: sigma}], [0.0, 0.0], RowTag(SOC, gen.id))
    else:
        m = unc.sigma_tilde(gen.epsilon) if form is Formulation.CHEBYSHEV \
            else unc.sigma_hat(gen.epsilon)
        b.le({jp: 1.0, ja: m}, gen.p_max * u_star_i, RowTag(CAPACITY_UP, gen.id))
        b.le({jp: -1.0, ja: m}, -gen.p_min * u_star_i, RowTag(CAPACITY_DOWN, gen.id))
    b.le({ja: 1.0}, float(u_star_i), RowTag(ALPHA_LINK, gen.id))
    return b.build()


def best_response(gen: Generator, case: SystemCase, prices: PriceSystem,
                  u_star_i: int, config: SolverConfig | None = None):
    """Maximal profit the producer can reach at the posted prices with its
    commitment held at u*.  Offline units have the empty allocation (the
    off-branch rule pins p = alpha = 0), worth exactly zero profit.
    Returns (profit, allocation dict)."""
    config = config or SolverConfig(tolerance=1e-9)
    if u_star_i == 0:
        return 0.0, {"p": 0.0, "alpha": 0.0, "y": 0.0, "pi": 0.0}
    prog = _producer_program(gen, case, prices, u_star_i)
    sol = conic.solve(prog, config)
    if not sol.optimal:
        raise RuntimeError(f"best_response: producer {gen.id} solve failed "
                           f"({sol.status.value})")
    alloc = {"p": float(sol.x[prog.column("p", gen.id)]),
             "alpha": float(sol.x[prog.column("alpha", gen.id)]),
             "y": float(sol.x[prog.column("y", gen.id)])
             if prog.has_column("y", gen.id) else 0.0,
             "pi": float(sol.x[prog.column("pi", gen.id)])
             if prog.has_column("pi", gen.id) else 0.0}
    return -sol.objective, alloc


@dataclass
class EquilibriumReport:
    generator_ids: tuple[str, ...]
    market_profit: np.ndarray
    best_response_profit: np.ndarray
    gap: np.ndarray               # best response - market, >= -tol always
    balance_residual: float
    participation_residual: float
    tolerance: float
    passed: bool

    @property
    def max_gap(self) -> float:
        return float(np.max(self.gap)) if len(self.gap) else 0.0


def verify_equilibrium(case: SystemCase, solution: MarketSolution,
                       prices: PriceSystem,
                       settlement: Settlement | None = None,
                       tolerance: float = 1e-5,
                       config: SolverConfig | None = None) -> EquilibriumReport:
    """Robust competitive equilibrium check: no producer can improve on its
    market allocation at the posted prices (given its commitment)."""
    settlement = settlement or settle(case, solution, prices)
    ng = len(case.generators)
    br = np.zeros(ng)
    for k, g in enumerate(case.generators):
        br[k], _ = best_response(g, case, prices, int(solution.u[k]), config)
    market = settlement.profit
    gap = br - market
    tol_vec = tolerance * (1.0 + np.abs(market))
    passed = bool(np.all(gap <= tol_vec) and np.all(gap >= -tol_vec))
    return EquilibriumReport(
        generator_ids=solution.generator_ids,
        market_profit=market, best_response_profit=br, gap=gap,
        balance_residual=abs(solution.balance_residual(case.net_demand)),
        participation_residual=abs(solution.participation_residual()),
        tolerance=tolerance, passed=passed)


# ---------------------------------------------------------------------------
# KKT residual blocks

@dataclass
class KktReport:
    stationarity: float
    primal: float
    complementarity: float
    details: dict[str, float] = field(default_factory=dict)

    @property
    def max_block(self) -> float:
        return max(self.stationarity, self.primal, self.complementarity)


def kkt_residuals(artifacts: FormulationArtifacts, aug_solution: ConicSolution,
                  prices: PriceSystem) -> KktReport:
    """Stationarity / primal feasibility / complementary slackness of the
    augmented pricing problem, rebuilt from the named duals and the raw
    (unpolished) primal iterate — not from solver internals.

    Residuals are normalized by (1 + magnitude of the participating terms) so
    the blocks are comparable across problem scales.
    """
    case = artifacts.case
    prog = artifacts.program
    gens = case.generators
    unc = case.uncertainty
    mu, sig = unc.mu, unc.sigma
    form = artifacts.formulation
    x = aug_solution.x
    gamma = prices.gamma_raw if prices.gamma_raw is not None else prices.gamma

    def col(sym, g, default=0.0):
        return x[prog.column(sym, g.id)] if prog.has_column(sym, g.id) else default

    stat = 0.0
    compl = 0.0
    details: dict[str, float] = {}
    for k, g in enumerate(gens):
        p = col("p", g)
        a = col("alpha", g)
        u = col("u", g)
        w = p - mu * a
        c2 = 0.0 if form is Formulation.NORMAL_MILP else g.c2
        if form is Formulation.EXACT_SOC:
            up, dn = prices.rho_up[k], prices.rho_dn[k]
            y = col("y", g)
            pi = col("pi", g)
            r_lam = g.c1 + 2 * c2 * w + up - dn - prices.eta_p[k] - prices.lam
            r_chi = (2 * c2 * sig ** 2 * a + 2 * prices.rho[k] * sig ** 2 * a
                     + prices.upsilon[k] - prices.eta_alpha[k]
                     - mu * (g.c1 + 2 * c2 * w) - prices.chi)
            r_gam = g.c0 + g.midpoint * (dn - up) - prices.upsilon[k] - gamma[k]
            r_y = 2 * prices.rho[k] * y - up - dn - prices.eta_y[k]
            r_pi = (prices.kappa0[k] * math.sqrt(g.epsilon) - up - dn
                    - prices.eta_pi_lo[k] + prices.eta_pi_up[k])
            scale_y = 1.0 + abs(up) + abs(dn)
            stat = max(stat, abs(r_y) / scale_y, abs(r_pi) / scale_y)
            slack_up = g.midpoint * u + y + pi - p
            slack_dn = p - g.midpoint * u + y + pi
            head = math.sqrt(g.epsilon) * (g.half_range - pi)
            tail = math.hypot(y, sig * a)
            compl = max(compl,
                        abs(up * slack_up) / (1 + abs(up) * (1 + abs(slack_up))) if False
                        else abs(up * slack_up) / (1 + g.p_max),
                        abs(dn * slack_dn) / (1 + g.p_max),
                        abs(prices.kappa0[k] * head - 0.0
                            + (-prices.kappa0[k] * tail if False else 0.0)))
            compl = max(compl, abs(prices.kappa0[k]) * max(0.0, head - tail)
                        / (1 + g.p_max))
        else:
            up, dn = prices.mu_up[k], prices.mu_dn[k]
            m = (unc.sigma_tilde(g.epsilon) if form is Formulation.CHEBYSHEV
                 else unc.sigma_hat(g.epsilon))
            r_lam = g.c1 + 2 * c2 * w + up - dn - prices.eta_p[k] - prices.lam
            r_chi = (2 * c2 * sig ** 2 * a + m * (up + dn)
                     + prices.upsilon[k] - prices.eta_alpha[k]
                     - mu * (g.c1 + 2 * c2 * w) - prices.chi)
            r_gam = g.c0 - up * g.p_max + dn * g.p_min - prices.upsilon[k] - gamma[k]
            slack_up = g.p_max * u - m * a - p
            slack_dn = p - g.p_min * u - m * a
            compl = max(compl,
                        abs(up * slack_up) / (1 + g.p_max),
                        abs(dn * slack_dn) / (1 + g.p_max))
        scale_l = 1.0 + abs(g.c1) + abs(2 * c2 * w) + abs(up) + abs(dn)
        scale_c = 1.0 + abs(prices.chi) + abs(up) + abs(dn)
        scale_g = 1.0 + abs(g.c0) + abs(gamma[k])
        stat = max(stat, abs(r_lam) / scale_l, abs(r_chi) / scale_c,
                   abs(r_gam) / scale_g)
        compl = max(compl,
                    abs(prices.upsilon[k] * (u - a)) / (1 + abs(prices.upsilon[k])),
                    abs(prices.eta_p[k] * p) / (1 + g.p_max),
                    abs(prices.eta_alpha[k] * a) / (1 + abs(prices.eta_alpha[k])))

    net = case.net_demand
    sum_p = math.fsum(col("p", g) for g in gens)
    sum_a = math.fsum(col("alpha", g) for g in gens)
    primal = max(abs(sum_p - net) / max(1.0, abs(net)), abs(sum_a - 1.0))
    for k, g in enumerate(gens):
        primal = max(primal, abs(col("u", g) - float(artifacts.u_star[k])))
    details["balance"] = abs(sum_p - net)
    details["participation"] = abs(sum_a - 1.0)
    return KktReport(stat, primal, compl, details)


# ---------------------------------------------------------------------------
# Monte Carlo validation

@dataclass
class McReport:
    sample_count: int
    seed: int
    distributions: tuple[str, ...]
    violation_frequency: dict[str, np.ndarray]     # per distribution, per generator
    joint_violation_frequency: dict[str, float]    # informational
    binomial_half_width: dict[str, np.ndarray]     # 3*SE at the nominal epsilon
    empirical_mean_cost: dict[str, float]
    empirical_cost_se: dict[str, float]
    analytic_expected_cost: float
    balance_residual: float            # identity form; exactly 0 after polish
    brute_balance_residual: float      # re-summed per scenario, fp noise only
    violations_ok: bool
    cost_ok: bool


def _draw(dist: str, rng: np.random.Generator, n: int, mu: float, sigma: float,
          q: float) -> np.ndarray:
    if dist == "normal":
        return mu + sigma * rng.standard_normal(n)
    if dist == "uniform":
        return mu + sigma * math.sqrt(3.0) * (2.0 * rng.random(n) - 1.0)
    if dist == "two_point":
        hi = mu + sigma * math.sqrt((1.0 - q) / q)
        lo = mu - sigma * math.sqrt(q / (1.0 - q))
        return np.where(rng.random(n) < q, hi, lo)
    if dist == "student_t":
        # df=5 rescaled to unit variance: Var[t_5] = 5/3
        return mu + sigma * math.sqrt(3.0 / 5.0) * rng.standard_t(5, n)
    raise ValueError(f"monte_carlo_validate: unknown distribution {dist!r}; "
                     f"supported: {MC_DISTRIBUTIONS}")


def monte_carlo_validate(case: SystemCase, solution: MarketSolution,
                         samples: int = 100_000, seed: int = 0,
                         distributions: tuple[str, ...] = MC_DISTRIBUTIONS,
                         ) -> McReport:
    """Empirical violation frequencies, per-scenario balance, and expected
    cost under moment-matched sampling.

    Draws use the counter-based Philox generator, one independent keyed
    stream per distribution, so reports are reproducible and independent of
    evaluation order.  The normal formulation is gated against normal draws
    only; the moment-set formulations are gated against every distribution.
    """
    if samples < 10_000:
        raise ValueError("monte_carlo_validate: need at least 1e4 samples")
    for d in distributions:
        if d not in MC_DISTRIBUTIONS:
            raise ValueError(f"monte_carlo_validate: unknown distribution {d!r}; "
                             f"supported: {MC_DISTRIBUTIONS}")
    gens = case.generators
    unc = case.uncertainty
    q = min(g.epsilon for g in gens)
    p, alpha, u = solution.p, solution.alpha, solution.u.astype(float)
    milp = solution.formulation is Formulation.NORMAL_MILP
    cost_gens = [replace(g, c2=0.0) if milp else g for g in gens]
    analytic = math.fsum(
        expected_cost(g, p[k], alpha[k], u[k], unc) for k, g in enumerate(cost_gens))
    pmax_u = np.array([g.p_max for g in gens]) * u
    pmin_u = np.array([g.p_min for g in gens]) * u
    tol = 1e-9 * np.maximum(1.0, np.array([g.p_max for g in gens]))

    gate_all = solution.formulation in (Formulation.CHEBYSHEV, Formulation.EXACT_SOC)
    freq: dict[str, np.ndarray] = {}
    joint: dict[str, float] = {}
    half: dict[str, np.ndarray] = {}
    mean_cost: dict[str, float] = {}
    cost_se: dict[str, float] = {}
    violations_ok = True
    cost_ok = True

    sum_p = math.fsum(p.tolist())
    sum_a = math.fsum(alpha.tolist())
    balance_residual = abs(sum_p - case.net_demand) + 0.0 * abs(1.0 - sum_a)
    balance_residual = max(abs(sum_p - case.net_demand), 0.0)
    # identity form: residual(omega) = (sum p - net) + omega*(1 - sum alpha)
    ident_terms = (sum_p - case.net_demand, 1.0 - sum_a)

    c0 = np.array([g.c0 for g in cost_gens])
    c1 = np.array([g.c1 for g in cost_gens])
    c2 = np.array([g.c2 for g in cost_gens])
    fixed_cost = float(c0 @ u)

    brute = 0.0
    for di, dist in enumerate(distributions):
        rng = np.random.Generator(np.random.Philox(key=seed + di))
        omega = _draw(dist, rng, samples, unc.mu, unc.sigma, q)
        disp = p[None, :] - omega[:, None] * alpha[None, :]
        viol_up = disp > pmax_u[None, :] + tol[None, :]
        viol_dn = disp < pmin_u[None, :] - tol[None, :]
        viol = viol_up | viol_dn
        f = viol.mean(axis=0)
        freq[dist] = f
        joint[dist] = float(viol.any(axis=1).mean())
        eps = np.array([g.epsilon for g in gens])
        hw = 3.0 * np.sqrt(eps * (1 - eps) / samples)
        half[dist] = hw
        gated = gate_all or dist == "normal"
        if gated and np.any(f > eps + hw):
            violations_ok = False
        costs = fixed_cost + disp @ c1 + (disp * disp) @ c2
        mc = float(np.mean(costs))
        se = float(np.std(costs, ddof=1) / math.sqrt(samples))
        mean_cost[dist] = mc
        cost_se[dist] = se
        if abs(mc - analytic) > 3.0 * max(se, 1e-12):
            cost_ok = False
        # identity-form per-scenario balance (exact zero when sums are exact)
        res = ident_terms[0] + omega * ident_terms[1]
        balance_residual = max(balance_residual, float(np.max(np.abs(res))))
        # brute recomputation on a prefix, term-by-term
        w_chk = omega[:200]
        for wv in w_chk:
            terms = [p[k] - alpha[k] * wv for k in range(len(gens))]
            terms += [case.wind_forecast, wv, -case.demand]
            brute = max(brute, abs(math.fsum(terms)))

    return McReport(
        sample_count=samples, seed=seed, distributions=tuple(distributions),
        violation_frequency=freq, joint_violation_frequency=joint,
        binomial_half_width=half,
        empirical_mean_cost=mean_cost, empirical_cost_se=cost_se,
        analytic_expected_cost=analytic,
        balance_residual=balance_residual,
        brute_balance_residual=brute,
        violations_ok=violations_ok, cost_ok=cost_ok)


# ---------------------------------------------------------------------------
# cost recovery / revenue adequacy audit

@dataclass
class AuditReport:
    cost_recovery_flags: list[str]
    deficit_flag: bool
    deficit: float
    guarantee_applicable: bool
    guarantee_holds: bool
    uplift_matches_flags: bool


def recovery_adequacy_audit(settlement: Settlement, case: SystemCase,
                            tol: float = 1e-6) -> AuditReport:
    """Flag producers with negative profit and any revenue deficit; when the
    convex-market hypotheses apply (all p_min = 0, or non-confiscatory
    pricing), those guarantees must hold."""
    scale = np.maximum(1.0, np.abs(settlement.cost))
    flags = [gid for gid, pi, s in
             zip(settlement.generator_ids, settlement.profit, scale)
             if pi < -tol * s]
    dscale = max(1.0, abs(settlement.consumer_charge))
    deficit_flag = settlement.deficit > tol * dscale
    applicable = all(g.p_min == 0.0 for g in case.generators) or \
        settlement.nonconfiscatory
    holds = not (flags or deficit_flag)
    uplift_ok = all((gid in flags) == (up > tol * s)
                    for gid, up, s in zip(settlement.generator_ids,
                                          settlement.uplift, scale))
    return AuditReport(flags, deficit_flag, settlement.deficit,
                       applicable, holds if applicable else holds, uplift_ok)
