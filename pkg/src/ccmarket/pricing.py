"""Prices from augmented-equivalent duals, closed-form identity checks,
settlement, and strong-duality profit identities.

Dual sign convention throughout: multipliers are nonnegative on <= rows with
Lagrangian term m'(Ax - b), upsilon >= 0 belongs to (alpha - u <= 0), and the
equality duals are reported with the market orientation (lambda is the
marginal cost of demand), which is the negative of the solver's convention.
The chi-stationarity identity therefore carries +upsilon and the gamma
identity -upsilon on every pricing path; the flipped upsilon signs that
appear in some published stationarity forms are surfaced in `notes`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .conic import ConicSolution
from .formulations import (ALPHA_LINK, BALANCE, CAPACITY_DOWN, CAPACITY_UP,
                           COMMITMENT_FIX, PARTICIPATION, SOC, X_LINK, Z_LINK,
                           FormulationArtifacts)
from .model import Formulation, MarketSolution, SystemCase, expected_cost

SIGN_NOTE = ("chi-stationarity is evaluated with +upsilon and the commitment "
             "identity with -upsilon (single Lagrangian convention); published "
             "forms with the opposite upsilon sign differ only by that "
             "convention")


@dataclass
class PriceSystem:
    """Energy, reserve, and commitment prices plus every named inequality dual
    in fleet order; bound duals ride along because the stationarity identities
    need them whenever a variable sits at a bound."""
    lam: float
    chi: float
    gamma: np.ndarray
    mu_up: np.ndarray
    mu_dn: np.ndarray
    upsilon: np.ndarray
    rho_up: np.ndarray
    rho_dn: np.ndarray
    rho: np.ndarray              # reliability-cone multiplier (quadratic form)
    kappa0: np.ndarray           # raw cone dual head (exact path)
    phi: np.ndarray
    psi: np.ndarray
    eta_p: np.ndarray            # dual of p >= 0
    eta_alpha: np.ndarray        # dual of alpha >= 0
    eta_y: np.ndarray            # dual of y >= 0
    eta_pi_lo: np.ndarray        # dual of pi >= 0
    eta_pi_up: np.ndarray        # dual of pi <= (p_max - p_min)/2
    formulation: Formulation
    nonconfiscatory: bool = False
    gamma_raw: np.ndarray | None = None
    notes: list[str] = field(default_factory=list)

    def validate(self, tol: float = 1e-8):
        for name in ("mu_up", "mu_dn", "upsilon", "rho_up", "rho_dn", "rho",
                     "eta_p", "eta_alpha"):
            arr = getattr(self, name)
            if np.any(arr < -tol):
                raise ValueError(f"prices: inequality dual {name} below -{tol}")
        if self.chi < -tol:
            raise ValueError("prices: chi must be nonnegative")

    def effective_gamma(self) -> np.ndarray:
        return self.gamma


def price_from_duals(artifacts: FormulationArtifacts,
                     solution: ConicSolution) -> PriceSystem:
    """Map the augmented solve's duals onto market prices by row tag."""
    if not solution.optimal:
        raise ValueError("price_from_duals: solution is not optimal")
    if artifacts.u_star is None:
        raise ValueError("price_from_duals: artifacts were not built in augmented mode")
    prog = artifacts.program
    case = artifacts.case
    gens = case.generators
    ng = len(gens)
    gidx = {g.id: k for k, g in enumerate(gens)}

    lam = chi = None
    gamma = np.zeros(ng)
    seen_fix = np.zeros(ng, dtype=bool)
    for i, tag in enumerate(prog.eq_tags):
        if tag.kind == BALANCE:
            lam = -solution.eq_duals[i]
        elif tag.kind == PARTICIPATION:
            chi = -solution.eq_duals[i]
        elif tag.kind == COMMITMENT_FIX:
            gamma[gidx[tag.gen]] = -solution.eq_duals[i]
            seen_fix[gidx[tag.gen]] = True
    if lam is None or chi is None or not seen_fix.all():
        raise ValueError("price_from_duals: balance/participation/commitment-fix "
                         "rows missing from the program")

    mu_up = np.zeros(ng)
    mu_dn = np.zeros(ng)
    upsilon = np.zeros(ng)
    for i, tag in enumerate(prog.ub_tags):
        if tag.kind == CAPACITY_UP:
            mu_up[gidx[tag.gen]] = solution.ub_duals[i]
        elif tag.kind == CAPACITY_DOWN:
            mu_dn[gidx[tag.gen]] = solution.ub_duals[i]
        elif tag.kind == ALPHA_LINK:
            upsilon[gidx[tag.gen]] = solution.ub_duals[i]

    rho = np.zeros(ng)
    kappa0 = np.zeros(ng)
    phi = np.zeros(ng)
    psi = np.zeros(ng)
    for cone, tag, kappa in zip(prog.cones, prog.cone_tags, solution.cone_duals):
        k = gidx[tag.gen]
        if tag.kind == SOC:
            kappa0[k] = kappa[0]
            g = gens[k]
            head = cone.scale * (cone.a_head @ solution.x + cone.b_head)
            rho[k] = kappa[0] / max(2.0 * head, 1e-12)
        elif tag.kind == X_LINK:
            phi[k] = 0.5 * (kappa[0] + kappa[2])
        elif tag.kind == Z_LINK:
            psi[k] = 0.5 * (kappa[0] + kappa[2])

    def bound_dual(arr, sym):
        out = np.zeros(ng)
        for k, g in enumerate(gens):
            if prog.has_column(sym, g.id):
                out[k] = arr[prog.column(sym, g.id)]
        return out

    exact = artifacts.formulation is Formulation.EXACT_SOC
    prices = PriceSystem(
        lam=lam, chi=chi, gamma=gamma,
        mu_up=np.zeros(ng) if exact else mu_up,
        mu_dn=np.zeros(ng) if exact else mu_dn,
        upsilon=upsilon,
        rho_up=mu_up if exact else np.zeros(ng),
        rho_dn=mu_dn if exact else np.zeros(ng),
        rho=rho, kappa0=kappa0, phi=phi, psi=psi,
        eta_p=bound_dual(solution.lb_bound_duals, "p"),
        eta_alpha=bound_dual(solution.lb_bound_duals, "alpha"),
        eta_y=bound_dual(solution.lb_bound_duals, "y"),
        eta_pi_lo=bound_dual(solution.lb_bound_duals, "pi"),
        eta_pi_up=bound_dual(solution.ub_bound_duals, "pi"),
        formulation=artifacts.formulation,
        notes=[SIGN_NOTE] + list(artifacts.notes),
    )
    return prices


def apply_nonconfiscatory(prices: PriceSystem) -> PriceSystem:
    """Clamp commitment prices at zero (no clawbacks), keeping the raw values."""
    return replace(prices, gamma=np.maximum(prices.gamma, 0.0),
                   gamma_raw=prices.gamma.copy(), nonconfiscatory=True)


@dataclass
class ClosedFormReport:
    lambda_residuals: np.ndarray
    chi_residuals: np.ndarray
    gamma_residuals: np.ndarray
    lambda_aggregate: float | None
    chi_aggregate: float | None
    max_residual: float
    notes: list[str] = field(default_factory=list)


def closed_form_check(case: SystemCase, solution: MarketSolution,
                      prices: PriceSystem) -> ClosedFormReport:
    """Evaluate the closed-form price expressions at the cleared point.

    Per-generator identities (bound duals included, so they hold for every
    unit including offline ones):
      energy      lam = C1 + 2*C2*(p - mu*alpha) + mu_up - mu_dn - eta_p
      reserve     chi = 2*C2*s^2*alpha [+ 2*rho*s^2*alpha] + margin*(mu_up+mu_dn)
                        + upsilon - eta_alpha - mu*(C1 + 2*C2*w)
      commitment  gamma = C0 - mu_up*Pmax + mu_dn*Pmin - upsilon          (linear)
                  gamma = C0 + (Pmax+Pmin)/2*(rho_dn - rho_up) - upsilon  (exact)
    Aggregates (energy and reserve price as explicit functions of the duals)
    are evaluated only when every unit has C2 > 0 and mu = 0, where the
    inversion through 1/(2*C2) is defined.
    """
    gens = case.generators
    ng = len(gens)
    unc = case.uncertainty
    mu, sig = unc.mu, unc.sigma
    form = prices.formulation
    gamma = prices.gamma_raw if prices.gamma_raw is not None else prices.gamma
    p, alpha, u = solution.p, solution.alpha, solution.u.astype(float)
    w = p - mu * alpha

    lam_res = np.zeros(ng)
    chi_res = np.zeros(ng)
    gam_res = np.zeros(ng)
    for k, g in enumerate(gens):
        c2 = 0.0 if form is Formulation.NORMAL_MILP else g.c2
        if form is Formulation.EXACT_SOC:
            up, dn = prices.rho_up[k], prices.rho_dn[k]
            margin = 0.0
        else:
            up, dn = prices.mu_up[k], prices.mu_dn[k]
            margin = (unc.sigma_tilde(g.epsilon) if form is Formulation.CHEBYSHEV
                      else unc.sigma_hat(g.epsilon))
        lam_res[k] = (g.c1 + 2.0 * c2 * w[k] + up - dn - prices.eta_p[k]
                      - prices.lam)
        if form is Formulation.EXACT_SOC:
            chi_val = (2.0 * c2 * sig ** 2 * alpha[k]
                       + 2.0 * prices.rho[k] * sig ** 2 * alpha[k]
                       + prices.upsilon[k] - prices.eta_alpha[k]
                       - mu * (g.c1 + 2.0 * c2 * w[k]))
            gam_res[k] = (g.c0 + g.midpoint * (dn - up) - prices.upsilon[k]
                          - gamma[k])
        else:
            chi_val = (2.0 * c2 * sig ** 2 * alpha[k]
                       + margin * (up + dn)
                       + prices.upsilon[k] - prices.eta_alpha[k]
                       - mu * (g.c1 + 2.0 * c2 * w[k]))
            gam_res[k] = (g.c0 - up * g.p_max + dn * g.p_min - prices.upsilon[k]
                          - gamma[k])
        chi_res[k] = chi_val - prices.chi

    notes = []
    lam_agg = chi_agg = None
    quadratic = form in (Formulation.NORMAL_MIQP, Formulation.CHEBYSHEV,
                         Formulation.EXACT_SOC)
    if quadratic and mu == 0.0 and all(g.c2 > 0 for g in gens):
        if form is Formulation.EXACT_SOC:
            num = case.net_demand - sum(
                (prices.rho_dn[k] - prices.rho_up[k] - g.c1 + prices.eta_p[k])
                / (2 * g.c2) for k, g in enumerate(gens))
            den = sum(1.0 / (2 * g.c2) for g in gens)
            lam_agg = abs(num / den - prices.lam)
            den_c = sum(1.0 / (2 * sig ** 2 * (g.c2 + prices.rho[k]))
                        for k, g in enumerate(gens))
            num_c = 1.0 + sum(
                (prices.upsilon[k] - prices.eta_alpha[k])
                / (2 * sig ** 2 * (g.c2 + prices.rho[k]))
                for k, g in enumerate(gens))
            chi_agg = abs(num_c / den_c - prices.chi)
        else:
            margins = np.array([
                unc.sigma_tilde(g.epsilon) if form is Formulation.CHEBYSHEV
                else unc.sigma_hat(g.epsilon) for g in gens])
            num = case.net_demand + sum(
                (g.c1 + prices.mu_up[k] - prices.mu_dn[k] - prices.eta_p[k])
                / (2 * g.c2) for k, g in enumerate(gens))
            den = sum(1.0 / (2 * g.c2) for g in gens)
            lam_agg = abs(num / den - prices.lam)
            num_c = 1.0 + sum(
                ((prices.mu_up[k] + prices.mu_dn[k]) * margins[k]
                 + prices.upsilon[k] - prices.eta_alpha[k]) / (2 * g.c2 * sig ** 2)
                for k, g in enumerate(gens))
            den_c = sum(1.0 / (2 * g.c2 * sig ** 2) for g in gens)
            chi_agg = abs(num_c / den_c - prices.chi)
    elif quadratic:
        notes.append("aggregate price forms skipped: require mu = 0 and C2 > 0 "
                     "for every unit")

    residuals = [np.max(np.abs(lam_res)), np.max(np.abs(chi_res)),
                 np.max(np.abs(gam_res))]
    if lam_agg is not None:
        residuals += [lam_agg, chi_agg]
    return ClosedFormReport(lam_res, chi_res, gam_res, lam_agg, chi_agg,
                            float(max(residuals)), notes)


@dataclass
class Settlement:
    generator_ids: tuple[str, ...]
    payment: np.ndarray          # Gamma_i = lam*p + chi*alpha + gamma*u
    cost: np.ndarray
    profit: np.ndarray
    uplift: np.ndarray
    energy_payment: np.ndarray
    reserve_payment: np.ndarray
    commitment_payment: np.ndarray
    consumer_charge: float       # lam * D
    wind_payment: float          # lam * W
    deficit: float               # Delta* = -min(0, sum Gamma + lam*W - lam*D)
    deficit_reduced: float       # -min(0, chi + sum gamma*u), equal by algebra
    identity_residual: float     # |sum Gamma + lam*W - lam*D - (chi + sum gamma u)|
    lam: float
    chi: float
    nonconfiscatory: bool

    def total_payment(self) -> float:
        return float(math.fsum(self.payment.tolist()))


def settle(case: SystemCase, solution: MarketSolution,
           prices: PriceSystem) -> Settlement:
    """Payments, profits, uplifts, and the market revenue deficit.

    The deficit is computed both from raw cash flows and from the reduced
    form -min(0, -chi - sum gamma u); the two agree because the cleared
    dispatch satisfies the balance and participation equalities exactly.
    """
    gens = case.generators
    ng = len(gens)
    lam, chi = prices.lam, prices.chi
    gamma = prices.gamma
    u = solution.u.astype(float)
    energy = lam * solution.p
    reserve = chi * solution.alpha
    commit = gamma * u
    payment = energy + reserve + commit
    milp = solution.formulation is Formulation.NORMAL_MILP
    cost = np.array([
        expected_cost(replace(g, c2=0.0) if milp else g,
                      solution.p[k], solution.alpha[k], u[k], case.uncertainty)
        for k, g in enumerate(gens)])
    profit = payment - cost
    uplift = np.maximum(0.0, -profit)

    total_pay = math.fsum(payment.tolist())
    consumer = lam * case.demand
    wind = lam * case.wind_forecast
    net_flow = total_pay + wind - consumer           # = chi + sum gamma u
    side_payments = chi + math.fsum(commit.tolist())
    deficit_raw = -min(0.0, net_flow)
    deficit_reduced = -min(0.0, side_payments)
    identity_residual = abs(net_flow - side_payments)
    scale = max(1.0, abs(consumer), abs(total_pay))
    if abs(deficit_raw - deficit_reduced) > 1e-6 * scale:
        raise AssertionError(
            f"settlement: raw deficit {deficit_raw} and reduced deficit "
            f"{deficit_reduced} disagree beyond tolerance")
    return Settlement(
        generator_ids=solution.generator_ids,
        payment=payment, cost=cost, profit=profit, uplift=uplift,
        energy_payment=energy, reserve_payment=reserve,
        commitment_payment=commit,
        consumer_charge=consumer, wind_payment=wind,
        deficit=deficit_raw, deficit_reduced=deficit_reduced,
        identity_residual=identity_residual,
        lam=lam, chi=chi, nonconfiscatory=prices.nonconfiscatory)


@dataclass
class ProfitIdentityReport:
    identity_profit: np.ndarray
    settled_profit: np.ndarray
    residuals: np.ndarray        # |settled - identity| per generator
    paper_form: np.ndarray       # the published truncated expressions, for reference

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if len(self.residuals) else 0.0


def strong_duality_profit(case: SystemCase, solution: MarketSolution,
                          prices: PriceSystem,
                          settlement: Settlement | None = None) -> ProfitIdentityReport:
    """Per-generator strong-duality profit identity.

    The identity is the producer problem's dual objective evaluated at the
    market duals; it reduces to the published truncated forms when C2 = 0
    (the paper's Corollary gives profit = 0 on the linear path).  The
    commitment price used is the raw (unclamped) one: clamping is a
    settlement adjustment, not a dual.
    """
    gens = case.generators
    ng = len(gens)
    unc = case.uncertainty
    settlement = settlement or settle(case, solution, prices)
    gamma = prices.gamma_raw if prices.gamma_raw is not None else prices.gamma
    if prices.nonconfiscatory and prices.gamma_raw is not None:
        settled = (settlement.profit
                   - (prices.gamma - prices.gamma_raw) * solution.u)
    else:
        settled = settlement.profit.copy()
    u = solution.u.astype(float)
    w = solution.p - unc.mu * solution.alpha
    ident = np.zeros(ng)
    paper = np.zeros(ng)
    for k, g in enumerate(gens):
        c2 = 0.0 if solution.formulation is Formulation.NORMAL_MILP else g.c2
        rent = c2 * (w[k] ** 2 + unc.sigma ** 2 * solution.alpha[k] ** 2)
        if solution.formulation is Formulation.EXACT_SOC:
            mid, half = g.midpoint, g.half_range
            ident[k] = ((gamma[k] - g.c0) * u[k]
                        + mid * (prices.rho_up[k] - prices.rho_dn[k]) * u[k]
                        + prices.upsilon[k] * u[k]
                        + math.sqrt(g.epsilon) * half * prices.kappa0[k]
                        + half * prices.eta_pi_up[k]
                        + rent)
            paper[k] = prices.rho[k] * g.epsilon * half ** 2 + gamma[k] * u[k]
        else:
            ident[k] = ((gamma[k] - g.c0) * u[k]
                        + prices.mu_up[k] * g.p_max * u[k]
                        - prices.mu_dn[k] * g.p_min * u[k]
                        + prices.upsilon[k] * u[k]
                        + rent)
            paper[k] = (g.c0 * u[k] + prices.upsilon[k] * u[k]
                        + prices.mu_dn[k] * g.p_min * u[k]
                        - prices.mu_up[k] * g.p_max * u[k])
    return ProfitIdentityReport(ident, settled, np.abs(settled - ident), paper)
