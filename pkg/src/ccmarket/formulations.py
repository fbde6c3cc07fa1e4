"""Translate a SystemCase into standard-form conic programs.

The container keeps a diagonal quadratic objective, dense equality and
inequality rows, second-order cones in the form ||tail|| <= scale*head,
variable bounds, an integrality mask, and a tag per row so duals can be read
back by their market role.
"""
from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import Formulation, Generator, SystemCase

# Row roles used for dual extraction.
CAPACITY_UP = "capacity-up"
CAPACITY_DOWN = "capacity-down"
ALPHA_LINK = "alpha-link"
BALANCE = "balance"
PARTICIPATION = "participation"
COMMITMENT_FIX = "commitment-fix"
SOC = "soc"
X_LINK = "x-link"
Z_LINK = "z-link"
RECOURSE_LINK = "recourse-link"


class InfeasibleCaseError(ValueError):
    """The case is infeasible by construction; message names the shortfall."""


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RowTag:
    kind: str
    gen: str | None = None

    def __str__(self):
        return self.kind if self.gen is None else f"{self.kind}:{self.gen}"


@dataclass(frozen=True)
class SecondOrderCone:
    """||A_tail x + b_tail|| <= scale * (a_head' x + b_head)."""
    scale: float
    a_head: np.ndarray
    b_head: float
    A_tail: np.ndarray
    b_tail: np.ndarray


@dataclass
class ConicProgram:
    n: int
    c: np.ndarray
    q: np.ndarray                 # objective = const + c'x + sum_j q_j x_j^2, q >= 0
    const: float
    A_eq: np.ndarray
    b_eq: np.ndarray
    eq_tags: list[RowTag]
    A_ub: np.ndarray
    b_ub: np.ndarray
    ub_tags: list[RowTag]
    cones: list[SecondOrderCone]
    cone_tags: list[RowTag]
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray       # bool mask, True = binary
    columns: dict[tuple[str, str], int]   # (symbol, generator id) -> column

    def column(self, symbol: str, gen: str) -> int:
        return self.columns[(symbol, gen)]

    def has_column(self, symbol: str, gen: str) -> bool:
        return (symbol, gen) in self.columns

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.const + self.c @ x + self.q @ (x * x))

    def audit(self):
        """Convexity audit: nonnegative curvature, cone heads provably
        nonnegative from the variable bounds, consistent shapes, and a
        bijective name map."""
        if np.any(self.q < 0):
            raise ValueError("audit: negative quadratic coefficient")
        idx = sorted(self.columns.values())
        if idx != list(range(self.n)):
            raise ValueError("audit: column map is not a bijection onto 0..n-1")
        for arr, rows in ((self.A_eq, self.b_eq), (self.A_ub, self.b_ub)):
            if arr.shape != (len(rows), self.n):
                raise ValueError("audit: inconsistent row dimensions")
        if len(self.eq_tags) != len(self.b_eq) or len(self.ub_tags) != len(self.b_ub):
            raise ValueError("audit: tag count mismatch")
        if len(self.cone_tags) != len(self.cones):
            raise ValueError("audit: cone tag count mismatch")
        for cone, tag in zip(self.cones, self.cone_tags):
            if cone.scale <= 0:
                raise ValueError(f"audit: cone {tag} has nonpositive scale")
            head_min = cone.b_head
            for j in np.nonzero(cone.a_head)[0]:
                a = cone.a_head[j]
                lo = a * self.lb[j] if a > 0 else a * self.ub[j]
                if not np.isfinite(lo):
                    raise ValueError(f"audit: cone {tag} head not boundable below")
                head_min += lo
            if head_min < -1e-9:
                raise ValueError(f"audit: cone {tag} head can reach {head_min:.3g} < 0")
        return True


@dataclass
class FormulationArtifacts:
    program: ConicProgram
    formulation: Formulation
    margins: np.ndarray           # sigma_hat or sigma_tilde per generator (zeros for exact)
    case: SystemCase
    notes: list[str] = field(default_factory=list)
    u_star: np.ndarray | None = None   # set in augmented mode

    def __post_init__(self):
        n_bal = sum(1 for t in self.program.eq_tags if t.kind == BALANCE)
        n_par = sum(1 for t in self.program.eq_tags if t.kind == PARTICIPATION)
        if n_bal != 1 or n_par != 1:
            raise ValueError("artifacts: need exactly one balance and one participation row")
        if self.u_star is not None:
            n_fix = sum(1 for t in self.program.eq_tags if t.kind == COMMITMENT_FIX)
            if n_fix != len(self.case.generators):
                raise ValueError("artifacts: one commitment-fix row per generator required")


class _Builder:
    """Accumulates columns and rows, then freezes a ConicProgram."""

    def __init__(self):
        self.columns: dict[tuple[str, str], int] = {}
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.c: list[float] = []
        self.q: list[float] = []
        self.integrality: list[bool] = []
        self.const = 0.0
        self.eq_rows: list[dict[int, float]] = []
        self.eq_rhs: list[float] = []
        self.eq_tags: list[RowTag] = []
        self.ub_rows: list[dict[int, float]] = []
        self.ub_rhs: list[float] = []
        self.ub_tags: list[RowTag] = []
        self.cones: list[tuple[float, dict[int, float], float, list[dict[int, float]], list[float]]] = []
        self.cone_tags: list[RowTag] = []

    def var(self, symbol: str, gen: str, lb=0.0, ub=math.inf, c=0.0, q=0.0,
            integer=False) -> int:
        key = (symbol, gen)
        if key in self.columns:
            raise ValueError(f"duplicate column {key}")
        j = len(self.lb)
        self.columns[key] = j
        self.lb.append(lb)
        self.ub.append(ub)
        self.c.append(c)
        self.q.append(q)
        self.integrality.append(integer)
        return j

    def eq(self, coeffs: dict[int, float], rhs: float, tag: RowTag):
        self.eq_rows.append(coeffs)
        self.eq_rhs.append(rhs)
        self.eq_tags.append(tag)

    def le(self, coeffs: dict[int, float], rhs: float, tag: RowTag):
        self.ub_rows.append(coeffs)
        self.ub_rhs.append(rhs)
        self.ub_tags.append(tag)

    def cone(self, scale: float, head: dict[int, float], head_const: float,
             tails: list[dict[int, float]], tail_consts: list[float], tag: RowTag):
        self.cones.append((scale, head, head_const, tails, tail_consts))
        self.cone_tags.append(tag)

    def build(self) -> ConicProgram:
        n = len(self.lb)

        def densify(rows):
            A = np.zeros((len(rows), n))
            for i, coeffs in enumerate(rows):
                for j, v in coeffs.items():
                    A[i, j] = v
            return A

        cones = []
        for scale, head, b0, tails, bts in self.cones:
            a0 = np.zeros(n)
            for j, v in head.items():
                a0[j] = v
            At = np.zeros((len(tails), n))
            for r, coeffs in enumerate(tails):
                for j, v in coeffs.items():
                    At[r, j] = v
            cones.append(SecondOrderCone(scale, a0, b0, At, np.array(bts, dtype=float)))

        prog = ConicProgram(
            n=n,
            c=np.array(self.c), q=np.array(self.q), const=self.const,
            A_eq=densify(self.eq_rows), b_eq=np.array(self.eq_rhs, dtype=float),
            eq_tags=list(self.eq_tags),
            A_ub=densify(self.ub_rows), b_ub=np.array(self.ub_rhs, dtype=float),
            ub_tags=list(self.ub_tags),
            cones=cones, cone_tags=list(self.cone_tags),
            lb=np.array(self.lb), ub=np.array(self.ub),
            integrality=np.array(self.integrality, dtype=bool),
            columns=dict(self.columns),
        )
        prog.audit()
        return prog


def _screen_linear_feasibility(case: SystemCase, margins: np.ndarray):
    """Reject cases where no all-on dispatch can meet net demand: the cheapest
    participation assignment still pushes capacity below D - W, or no
    participation split fits the per-unit half-ranges."""
    gens = case.generators
    caps = [min(1.0, g.half_range / m) if m > 0 else 1.0
            for g, m in zip(gens, margins)]
    if sum(caps) < 1.0 - 1e-12:
        raise InfeasibleCaseError(
            f"participation cannot sum to 1: per-unit caps sum to {sum(caps):.6g} "
            f"(margin exceeds half of every feasible range)")
    # greedy min-burden assignment: load alpha on the smallest margins first
    order = sorted(range(len(gens)), key=lambda i: (margins[i], gens[i].id))
    remaining, burden = 1.0, 0.0
    for i in order:
        take = min(caps[i], remaining)
        burden += take * margins[i]
        remaining -= take
        if remaining <= 0:
            break
    ceiling = sum(g.p_max for g in gens) - burden
    if ceiling < case.net_demand - 1e-9:
        raise InfeasibleCaseError(
            f"all-on capacity {ceiling:.6g} MW after reserve margins cannot cover "
            f"net demand {case.net_demand:.6g} MW")


def _screen_exact_feasibility(case: SystemCase):
    sigma = case.uncertainty.sigma
    total = 0.0
    for g in case.generators:
        if g.p_max <= g.p_min:
            raise InfeasibleCaseError(
                f"generator {g.id}: exact-SOC formulation needs p_max > p_min")
        total += min(1.0, math.sqrt(g.epsilon) * g.half_range / sigma)
    if total < 1.0 - 1e-12:
        raise InfeasibleCaseError(
            f"participation cannot sum to 1 under the reliability cones: "
            f"per-unit caps sum to {total:.6g}")


def _add_objective_vars(b: _Builder, g: Generator, mu: float, sigma: float,
                        quadratic: bool):
    """Columns p, alpha (and w when mu != 0) with the expected-cost objective."""
    if quadratic:
        if mu == 0.0:
            jp = b.var("p", g.id, lb=0.0, c=g.c1, q=g.c2)
            ja = b.var("alpha", g.id, lb=0.0, q=g.c2 * sigma ** 2)
        else:
            jp = b.var("p", g.id, lb=0.0)
            ja = b.var("alpha", g.id, lb=0.0, q=g.c2 * sigma ** 2)
            jw = b.var("w", g.id, lb=-math.inf, c=g.c1, q=g.c2)
            b.eq({jw: 1.0, jp: -1.0, ja: mu}, 0.0, RowTag(RECOURSE_LINK, g.id))
    else:
        jp = b.var("p", g.id, lb=0.0, c=g.c1)
        ja = b.var("alpha", g.id, lb=0.0)
    return jp, ja


def _linear_family(case: SystemCase, margins: np.ndarray, quadratic: bool,
                   formulation: Formulation, notes: list[str]) -> FormulationArtifacts:
    _screen_linear_feasibility(case, margins)
    b = _Builder()
    mu, sigma = case.uncertainty.mu, case.uncertainty.sigma
    balance, participation = {}, {}
    for g, m in zip(case.generators, margins):
        jp, ja = _add_objective_vars(b, g, mu if quadratic else 0.0, sigma, quadratic)
        if g.must_run:
            ju = b.var("u", g.id, lb=1.0, ub=1.0, c=g.c0, integer=True)
        else:
            ju = b.var("u", g.id, lb=0.0, ub=1.0, c=g.c0, integer=True)
        b.le({jp: 1.0, ja: m, ju: -g.p_max}, 0.0, RowTag(CAPACITY_UP, g.id))
        b.le({jp: -1.0, ja: m, ju: g.p_min}, 0.0, RowTag(CAPACITY_DOWN, g.id))
        b.le({ja: 1.0, ju: -1.0}, 0.0, RowTag(ALPHA_LINK, g.id))
        balance[jp] = 1.0
        participation[ja] = 1.0
    b.eq(balance, case.net_demand, RowTag(BALANCE))
    b.eq(participation, 1.0, RowTag(PARTICIPATION))
    return FormulationArtifacts(b.build(), formulation, margins, case, notes)


def build_normal_miqp(case: SystemCase) -> FormulationArtifacts:
    """Normal-assumption MIQP: quadratic expected cost, rows with sigma_hat."""
    margins = np.array([case.uncertainty.sigma_hat(g.epsilon) for g in case.generators])
    return _linear_family(case, margins, True, Formulation.NORMAL_MIQP, [])


def build_chebyshev(case: SystemCase) -> FormulationArtifacts:
    """Distributionally robust MIQP via the Cantelli margin sigma_tilde."""
    margins = np.array([case.uncertainty.sigma_tilde(g.epsilon) for g in case.generators])
    return _linear_family(case, margins, True, Formulation.CHEBYSHEV, [])


def build_milp(case: SystemCase) -> FormulationArtifacts:
    """Linear-cost path: requires mu = 0 and zeroes any quadratic coefficients
    (recorded), so LP duality applies downstream."""
    if case.uncertainty.mu != 0.0:
        raise ValueError("build_milp: requires a zero-mean uncertainty model; "
                         "use adjust_epsilon_for_mu to absorb the mean first")
    notes = []
    truncated = [g.id for g in case.generators if g.c2 > 0.0]
    if truncated:
        msg = f"milp: truncated C2 > 0 to 0 for generators {truncated}"
        warnings.warn(msg, TruncationWarning, stacklevel=2)
        notes.append(msg)
    margins = np.array([case.uncertainty.sigma_hat(g.epsilon) for g in case.generators])
    return _linear_family(case, margins, False, Formulation.NORMAL_MILP, notes)


def build_exact_soc(case: SystemCase) -> FormulationArtifacts:
    """Exact second-order-cone reformulation of the two-sided chance constraint
    with auxiliaries y (tail allowance) and pi (range give-back)."""
    for g in case.generators:
        if not 0.0 < g.epsilon < 1.0:
            raise ValueError(f"build_exact_soc: epsilon of {g.id} outside (0, 1)")
    _screen_exact_feasibility(case)
    b = _Builder()
    mu, sigma = case.uncertainty.mu, case.uncertainty.sigma
    balance, participation = {}, {}
    for g in case.generators:
        jp, ja = _add_objective_vars(b, g, mu, sigma, True)
        if g.must_run:
            ju = b.var("u", g.id, lb=1.0, ub=1.0, c=g.c0, integer=True)
        else:
            ju = b.var("u", g.id, lb=0.0, ub=1.0, c=g.c0, integer=True)
        jy = b.var("y", g.id, lb=0.0)
        jpi = b.var("pi", g.id, lb=0.0, ub=g.half_range)
        mid = g.midpoint
        b.le({jp: 1.0, jy: -1.0, jpi: -1.0, ju: -mid}, 0.0, RowTag(CAPACITY_UP, g.id))
        b.le({jp: -1.0, jy: -1.0, jpi: -1.0, ju: mid}, 0.0, RowTag(CAPACITY_DOWN, g.id))
        b.le({ja: 1.0, ju: -1.0}, 0.0, RowTag(ALPHA_LINK, g.id))
        b.cone(math.sqrt(g.epsilon), {jpi: -1.0}, g.half_range,
               [{jy: 1.0}, {ja: sigma}], [0.0, 0.0], RowTag(SOC, g.id))
        balance[jp] = 1.0
        participation[ja] = 1.0
    b.eq(balance, case.net_demand, RowTag(BALANCE))
    b.eq(participation, 1.0, RowTag(PARTICIPATION))
    return FormulationArtifacts(
        b.build(), Formulation.EXACT_SOC,
        np.zeros(len(case.generators)), case, [])


_BUILDERS = {
    Formulation.NORMAL_MILP: build_milp,
    Formulation.NORMAL_MIQP: build_normal_miqp,
    Formulation.CHEBYSHEV: build_chebyshev,
    Formulation.EXACT_SOC: build_exact_soc,
}


def build(case: SystemCase) -> FormulationArtifacts:
    return _BUILDERS[case.formulation](case)


def build_augmented(case: SystemCase, u_star: np.ndarray) -> FormulationArtifacts:
    """Continuous pricing equivalent: binaries relaxed and pinned by u = u*
    rows (dual gamma); quadratic paths get substitution variables x >= w^2,
    z >= alpha^2 so the objective is linear in them.

    The [0,1] bounds on u are dropped (the fixing row pins u); keeping them
    would split the commitment dual between the row and a degenerately active
    bound.
    """
    u_star = np.asarray(u_star, dtype=float)
    if u_star.shape != (len(case.generators),):
        raise ValueError("build_augmented: u_star length must match the fleet")
    if not np.all((u_star == 0.0) | (u_star == 1.0)):
        raise ValueError("build_augmented: u_star must be binary")
    for g, u in zip(case.generators, u_star):
        if g.must_run and u != 1.0:
            raise ValueError(f"build_augmented: must_run generator {g.id} has u*=0")

    form = case.formulation
    quadratic = form is not Formulation.NORMAL_MILP
    notes: list[str] = []
    if form is Formulation.NORMAL_MILP:
        if case.uncertainty.mu != 0.0:
            raise ValueError("build_augmented: MILP path requires mu = 0")
        truncated = [g.id for g in case.generators if g.c2 > 0.0]
        if truncated:
            notes.append(f"milp: truncated C2 > 0 to 0 for generators {truncated}")
    if form is Formulation.EXACT_SOC:
        margins = np.zeros(len(case.generators))
        _screen_exact_feasibility(case)
    elif form is Formulation.CHEBYSHEV:
        margins = np.array([case.uncertainty.sigma_tilde(g.epsilon) for g in case.generators])
    else:
        margins = np.array([case.uncertainty.sigma_hat(g.epsilon) for g in case.generators])

    b = _Builder()
    mu, sigma = case.uncertainty.mu, case.uncertainty.sigma
    balance, participation = {}, {}
    for k, (g, m) in enumerate(zip(case.generators, margins)):
        use_subst = quadratic and g.c2 > 0.0
        # dispatch/participation columns; objective moves onto (x, z) when substituted
        jp = b.var("p", g.id, lb=0.0, c=0.0 if use_subst or mu != 0.0 else g.c1,
                   q=0.0 if use_subst or not quadratic else g.c2)
        ja = b.var("alpha", g.id, lb=0.0,
                   q=0.0 if use_subst or not quadratic else g.c2 * sigma ** 2)
        ju = b.var("u", g.id, lb=-math.inf, ub=math.inf, c=g.c0)
        if mu != 0.0 and quadratic:
            jw = b.var("w", g.id, lb=-math.inf, c=g.c1,
                       q=0.0 if use_subst else g.c2)
            b.eq({jw: 1.0, jp: -1.0, ja: mu}, 0.0, RowTag(RECOURSE_LINK, g.id))
        else:
            jw = jp
        if form is Formulation.EXACT_SOC:
            jy = b.var("y", g.id, lb=0.0)
            jpi = b.var("pi", g.id, lb=0.0, ub=g.half_range)
            mid = g.midpoint
            b.le({jp: 1.0, jy: -1.0, jpi: -1.0, ju: -mid}, 0.0, RowTag(CAPACITY_UP, g.id))
            b.le({jp: -1.0, jy: -1.0, jpi: -1.0, ju: mid}, 0.0, RowTag(CAPACITY_DOWN, g.id))
            b.cone(math.sqrt(g.epsilon), {jpi: -1.0}, g.half_range,
                   [{jy: 1.0}, {ja: sigma}], [0.0, 0.0], RowTag(SOC, g.id))
        else:
            b.le({jp: 1.0, ja: m, ju: -g.p_max}, 0.0, RowTag(CAPACITY_UP, g.id))
            b.le({jp: -1.0, ja: m, ju: g.p_min}, 0.0, RowTag(CAPACITY_DOWN, g.id))
        b.le({ja: 1.0, ju: -1.0}, 0.0, RowTag(ALPHA_LINK, g.id))
        if use_subst:
            # x >= w^2 and z >= alpha^2 as 3-dim cones ||(w, (x-1)/2)|| <= (x+1)/2
            jx = b.var("x", g.id, lb=0.0, c=g.c2)
            jz = b.var("z", g.id, lb=0.0, c=g.c2 * sigma ** 2)
            b.cone(1.0, {jx: 0.5}, 0.5, [{jw: 1.0}, {jx: 0.5}], [0.0, -0.5],
                   RowTag(X_LINK, g.id))
            b.cone(1.0, {jz: 0.5}, 0.5, [{ja: 1.0}, {jz: 0.5}], [0.0, -0.5],
                   RowTag(Z_LINK, g.id))
        b.eq({ju: 1.0}, float(u_star[k]), RowTag(COMMITMENT_FIX, g.id))
        balance[jp] = 1.0
        participation[ja] = 1.0
    b.eq(balance, case.net_demand, RowTag(BALANCE))
    b.eq(participation, 1.0, RowTag(PARTICIPATION))
    return FormulationArtifacts(b.build(), form, margins, case, notes,
                                u_star=u_star.copy())


@dataclass
class FixResult:
    """Reduced program after column substitution plus the index maps needed to
    lift primal values and duals back to the original program."""
    program: ConicProgram
    keep_cols: np.ndarray      # surviving original column indices
    eq_rows: list[int]         # surviving original equality row indices
    ub_rows: list[int]
    cone_rows: list[int]
    fixings: dict[int, float]

    def lift_primal(self, x_reduced: np.ndarray, n_full: int) -> np.ndarray:
        x = np.zeros(n_full)
        x[self.keep_cols] = x_reduced
        for j, v in self.fixings.items():
            x[j] = v
        return x


def fix_variables(prog: ConicProgram, fixings: dict[int, float]) -> FixResult:
    """Eliminate columns by substitution.

    Rows and cones whose coefficients vanish entirely are dropped after a
    consistency check; an interior-point method cannot carry slack-free rows.
    """
    keep = np.array([j for j in range(prog.n) if j not in fixings], dtype=int)
    xfix = np.zeros(prog.n)
    for j, v in fixings.items():
        xfix[j] = v
        if not (prog.lb[j] - 1e-9 <= v <= prog.ub[j] + 1e-9):
            raise InfeasibleCaseError(f"fixing column {j} to {v} violates its bounds")

    const = prog.const + float(prog.c @ xfix + prog.q @ (xfix * xfix))

    def reduce_rows(A, rhs, tags, is_eq):
        if A.shape[0] == 0:
            return A[:, keep], rhs.copy(), list(tags), list(range(len(rhs)))
        shift = A @ xfix
        newA, newb, newtags, kept = [], [], [], []
        for i in range(A.shape[0]):
            row = A[i, keep]
            b_i = rhs[i] - shift[i]
            if np.all(row == 0.0):
                bad = abs(b_i) > 1e-9 if is_eq else b_i < -1e-9
                if bad:
                    raise InfeasibleCaseError(
                        f"row {tags[i]} becomes 0 {'=' if is_eq else '<='} {b_i:.3g} "
                        f"after fixing")
                continue
            newA.append(row)
            newb.append(b_i)
            newtags.append(tags[i])
            kept.append(i)
        if newA:
            return np.array(newA), np.array(newb), newtags, kept
        return np.zeros((0, len(keep))), np.zeros(0), [], []

    A_eq, b_eq, eq_tags, eq_keep = reduce_rows(prog.A_eq, prog.b_eq, prog.eq_tags, True)
    A_ub, b_ub, ub_tags, ub_keep = reduce_rows(prog.A_ub, prog.b_ub, prog.ub_tags, False)

    cones, cone_tags, cone_keep = [], [], []
    for k, (cone, tag) in enumerate(zip(prog.cones, prog.cone_tags)):
        b_head = cone.b_head + float(cone.a_head @ xfix)
        b_tail = cone.b_tail + cone.A_tail @ xfix
        a_head = cone.a_head[keep]
        A_tail = cone.A_tail[:, keep]
        if np.all(a_head == 0.0) and np.all(A_tail == 0.0):
            if np.linalg.norm(b_tail) > cone.scale * b_head + 1e-9:
                raise InfeasibleCaseError(f"cone {tag} infeasible after fixing")
            continue
        cones.append(SecondOrderCone(cone.scale, a_head, b_head, A_tail, b_tail))
        cone_tags.append(tag)
        cone_keep.append(k)

    inv = {int(j): k for k, j in enumerate(keep)}
    columns = {key: inv[j] for key, j in prog.columns.items() if j in inv}
    reduced = ConicProgram(
        n=len(keep), c=prog.c[keep], q=prog.q[keep], const=const,
        A_eq=A_eq, b_eq=b_eq, eq_tags=eq_tags,
        A_ub=A_ub, b_ub=b_ub, ub_tags=ub_tags,
        cones=cones, cone_tags=cone_tags,
        lb=prog.lb[keep], ub=prog.ub[keep],
        integrality=prog.integrality[keep],
        columns=columns,
    )
    return FixResult(reduced, keep, eq_keep, ub_keep, cone_keep, dict(fixings))


def relax_integrality(prog: ConicProgram) -> ConicProgram:
    out = ConicProgram(
        n=prog.n, c=prog.c.copy(), q=prog.q.copy(), const=prog.const,
        A_eq=prog.A_eq.copy(), b_eq=prog.b_eq.copy(), eq_tags=list(prog.eq_tags),
        A_ub=prog.A_ub.copy(), b_ub=prog.b_ub.copy(), ub_tags=list(prog.ub_tags),
        cones=list(prog.cones), cone_tags=list(prog.cone_tags),
        lb=prog.lb.copy(), ub=prog.ub.copy(),
        integrality=np.zeros(prog.n, dtype=bool),
        columns=dict(prog.columns),
    )
    return out


def dump_program(prog: ConicProgram) -> str:
    """Plain-text dump: one line per variable, row, and cone, with names and
    coefficients, for external cross-checking."""
    inv = {j: key for key, j in prog.columns.items()}
    out = io.StringIO()
    out.write(f"conicprogram schema_version=1 n={prog.n} const={prog.const!r}\n")

    def name(j):
        sym, gen = inv[j]
        return f"{sym}[{gen}]"

    for j in range(prog.n):
        out.write(f"var {name(j)} lb={prog.lb[j]!r} ub={prog.ub[j]!r} "
                  f"c={prog.c[j]!r} q={prog.q[j]!r} "
                  f"int={int(prog.integrality[j])}\n")

    def row_str(coeffs):
        return " + ".join(f"{coeffs[j]!r}*{name(j)}" for j in np.nonzero(coeffs)[0])

    for i in range(len(prog.b_eq)):
        out.write(f"eq [{prog.eq_tags[i]}] {row_str(prog.A_eq[i])} = {prog.b_eq[i]!r}\n")
    for i in range(len(prog.b_ub)):
        out.write(f"le [{prog.ub_tags[i]}] {row_str(prog.A_ub[i])} <= {prog.b_ub[i]!r}\n")
    for cone, tag in zip(prog.cones, prog.cone_tags):
        tails = "; ".join(
            f"{row_str(cone.A_tail[r])} + {cone.b_tail[r]!r}"
            for r in range(cone.A_tail.shape[0]))
        out.write(f"cone [{tag}] ||{tails}|| <= {cone.scale!r}*"
                  f"({row_str(cone.a_head)} + {cone.b_head!r})\n")
    return out.getvalue()
