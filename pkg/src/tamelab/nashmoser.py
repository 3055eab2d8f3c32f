"""The Nash-Moser fast-convergence engine.

Constants schedule with superexponential parameters t_nu = t_0^{(3/2)^nu}
and radius sequences converging to (s+r)/2; the iteration step

    v_nu  = -(h_nu o S_nu)(e_nu),
    e_nu+1 = (e_nu|_{D_{r_nu}} . phi_{v_nu})|_{D_{s_nu+1}},

with induction-hypothesis monitoring (the weak high-norm and strong
low-norm estimates) and a norm ledger per step.  The engine is generic
over PdeInstance capability records; see liealg.LieAlgebraInstance and
darboux.DarbouxInstance.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

from .errors import DivergenceError, ScheduleError, StepError

__all__ = [
    "ConstantsSchedule",
    "schedule",
    "default_t0_pairs",
    "admissibility_check",
    "AdmissibilityReport",
    "RunConfig",
    "IterationState",
    "LedgerRow",
    "step",
    "monitor",
    "run",
    "quadratic_check",
    "homotopy_contract_check",
    "PdeInstance",
]


class PdeInstance:
    """Capability record one normalization problem supplies to the engine.

    Concrete instances provide: Q (obstruction), linearize (d Q at the
    base solution), h1/h2 (homotopy operators, h2 may return None),
    infinitesimal_action, smooth, flow, act, restrict, norms, symmetry
    composition, and the threshold gap for the step gate.
    """

    d_order = 1
    l1 = 0
    l2 = 0

    def d_k(self, k: int) -> float:
        return 0.0

    def gap(self, nu_step: int, sched: "ConstantsSchedule") -> float:
        return sched.r_nu(nu_step) - sched.s_nu(nu_step + 1)

    def h2(self, w, s, r):
        return None


def default_t0_pairs(d_k, l1: int, l2: int, q: int, n_const: int):
    """The seven (c, mu) pairs of the ineq c^nu t_nu^{-mu} < 1 family.

    These are the geometric growth factors the radius recursion and the
    norm estimates produce along the iteration; configurable on the
    schedule for instances with different d_k profiles.
    """
    return [
        (3.0 ** (1 + d_k(1)), 2 * l1 + 1),
        (3.0 ** (1 + d_k(1)), 2 * l1 + 1),
        (3.0, 2 * l1 + 1),
        (3.0 ** d_k(0), 0.5),
        (9.0 ** d_k(1), 2 * (2 * l1 + 1) * (0.25 - n_const / q)),
        (3.0 ** d_k(0), q - 6 * l1 - 2.5),
        (1.0, 2 * l1 + 1),
    ]


@dataclass
class ConstantsSchedule:
    """All the bookkeeping constants of the iteration."""

    t_0: float
    b: float
    s: float
    r: float
    d: int
    l1: int
    l2: int
    d_k: object  # callable k -> float
    p: int
    q: int
    l: int
    n_const: int
    nu_max: int = 25
    pairs: list = field(default_factory=list)
    min_admissible_t0: float | None = None

    def log_t_nu(self, nu: int) -> float:
        return 1.5**nu * math.log(self.t_0)

    def log_eps_nu(self, nu: int) -> float:
        gap = self.s - self.r
        return self.b * 1.5**nu * math.log(gap) if gap < 1.0 else 0.0

    def t_nu(self, nu: int) -> float:
        return math.exp(min(self.log_t_nu(nu), 700.0))

    def eps_nu(self, nu: int) -> float:
        return math.exp(max(self.log_eps_nu(nu), -700.0))

    def s_nu(self, nu: int) -> float:
        return self.s - (self.s - self.r) * 0.5 * (1.0 - 3.0**-nu)

    def r_nu(self, nu: int) -> float:
        return self.s_nu(nu) - 0.5 * (self.s - self.r) * 3.0 ** -(nu + 1)

    @property
    def r_infinity(self) -> float:
        return 0.5 * (self.s + self.r)

    def smoothing_scale(self, nu: int) -> float:
        return math.exp(min(self.log_t_nu(nu) - self.log_eps_nu(nu), 700.0))

    def pair_supremum(self, c: float, mu: float, nu_probe: int = 200) -> float:
        if mu <= 0:
            return math.inf if c > 1 else 1.0
        best = -math.inf
        for nu in range(nu_probe):
            val = nu * math.log(c) - mu * 1.5**nu * math.log(self.t_0)
            best = max(best, val)
            if 1.5**nu * math.log(self.t_0) > 50 + nu * abs(math.log(max(c, 1.0))):
                break
        return math.exp(best)

    def validate(self):
        for c, mu in self.pairs:
            if mu <= 0:
                raise ScheduleError(f"pair (c={c:.3g}, mu={mu:.3g}) has nonpositive exponent")
            if self.pair_supremum(c, mu) >= 1.0:
                raise ScheduleError(
                    f"t_0 = {self.t_0} violates c^nu t_nu^-mu < 1 for (c={c:.3g}, mu={mu:.3g})"
                )


def _derive_exponents(d: int, l1: int, l2: int):
    p = max(l1 + 1, d)
    q = max(6 * l1 + 5, 4 * l2 + 1)
    l = max(4 * l1 + 1, l1 + l2)
    n_const = max(l1 + 1, l2 + d)
    return p, q, l, n_const


def _min_t0(pairs) -> float:
    lo, hi = 1.0 + 1e-9, 64.0
    def ok(t0):
        for c, mu in pairs:
            best = max(nu * math.log(c) - mu * 1.5**nu * math.log(t0) for nu in range(120))
            if best >= 0.0:
                return False
        return True
    if not ok(hi):
        return math.inf
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def schedule(
    t_0: float,
    s: float,
    r: float,
    d: int,
    l1: int,
    l2: int,
    d_k=None,
    b: float | None = None,
    nu_max: int = 25,
    pairs=None,
    p_override: int | None = None,
) -> ConstantsSchedule:
    """Build and validate the constants schedule.

    b defaults to max(d_1+1, d_p, 2 d_{p+q}) from the d_k profile; the
    (c, mu) pairs default to the standard seven.  Raises ScheduleError
    listing the violated pair for inadmissible t_0, and records the
    minimal admissible t_0 found by bisection.
    """
    if not t_0 > 1:
        raise ScheduleError("t_0 must exceed 1")
    if not 0 <= r < s <= 1:
        raise ScheduleError("need 0 <= r < s <= 1")
    d_k = d_k or (lambda k: 0.0)
    p, q, l, n_const = _derive_exponents(d, l1, l2)
    if p_override is not None:
        p = p_override
    if b is None:
        b = max(d_k(1) + 1, d_k(p), 2 * d_k(p + q))
    pairs = pairs if pairs is not None else default_t0_pairs(d_k, l1, l2, q, n_const)
    sched = ConstantsSchedule(
        t_0=t_0, b=b, s=s, r=r, d=d, l1=l1, l2=l2, d_k=d_k,
        p=p, q=q, l=l, n_const=n_const, nu_max=nu_max, pairs=list(pairs),
    )
    sched.validate()
    sched.min_admissible_t0 = _min_t0(sched.pairs)
    return sched


# ---------------------------------------------------------------------- #


@dataclass
class AdmissibilityReport:
    ok: bool
    low_norm: float
    low_bound: float
    high_norm: float
    high_bound: float

    @property
    def margins(self):
        return (self.low_bound - self.low_norm, self.high_bound - self.high_norm)


def admissibility_check(instance, e, sched: ConstantsSchedule) -> AdmissibilityReport:
    """The size assumptions ||e||_p < (s-r)^b t_0^-(2l1+1), ||e||_{p+q} < inverse."""
    gap = sched.s - sched.r
    expo = 2 * sched.l1 + 1
    low = instance.norm(e, sched.p, sched.s)
    high = instance.norm(e, sched.p + sched.q, sched.s)
    low_bound = gap**sched.b * sched.t_0 ** (-expo)
    high_bound = gap ** (-sched.b) * sched.t_0 ** (expo)
    return AdmissibilityReport(low < low_bound and high < high_bound, low, low_bound, high, high_bound)


@dataclass
class LedgerRow:
    nu: int
    s_nu: float
    r_nu: float
    t_nu: float
    eps_nu: float
    norm_p: float
    norm_pq: float
    v_norm_0: float
    v_norm_1: float
    hyp_a: bool
    hyp_b: bool
    residual: float
    q_residual: float

    HEADER = (
        "nu,s_nu,r_nu,t_nu,eps_nu,norm_p,norm_pq,v_norm_0,v_norm_1,"
        "hypothesis_a,hypothesis_b,residual,q_residual"
    )

    def csv(self) -> str:
        return (
            f"{self.nu},{self.s_nu:.17g},{self.r_nu:.17g},{self.t_nu:.17g},"
            f"{self.eps_nu:.17g},{self.norm_p:.17g},{self.norm_pq:.17g},"
            f"{self.v_norm_0:.17g},{self.v_norm_1:.17g},{int(self.hyp_a)},"
            f"{int(self.hyp_b)},{self.residual:.17g},{self.q_residual:.17g}"
        )


@dataclass
class IterationState:
    nu: int
    e: object
    v: object
    symmetry: object
    ledger: list = field(default_factory=list)


@dataclass
class RunConfig:
    t_0: float = 2.7
    b: float | None = None
    nu_max: int = 25
    tol: float = 1e-10
    theta_gate: float = 1.0
    q_tol: float = 1e-6
    check_q: bool = True
    p_override: int | None = None


def _log_bound(sched, nu: int) -> float:
    """log of (eps_nu^-1 t_nu)^(2 l1 + 1), overflow-free."""
    return (2 * sched.l1 + 1) * (sched.log_t_nu(nu) - sched.log_eps_nu(nu))


def _hypotheses(instance, e, sched, nu):
    log_bound = _log_bound(sched, nu)
    norm_pq = instance.norm(e, sched.p + sched.q, sched.s_nu(nu))
    norm_p = instance.norm(e, sched.p, sched.s_nu(nu))
    hyp_a = norm_pq <= 0.0 or math.log(norm_pq) <= log_bound
    hyp_b = norm_p <= 0.0 or math.log(norm_p) <= -log_bound
    return norm_p, norm_pq, hyp_a, hyp_b


def step(state: IterationState, instance, sched: ConstantsSchedule, config: RunConfig) -> IterationState:
    """One iteration: smooth, homotopy, gate, flow, act; appends a ledger row."""
    nu = state.nu
    s_now, r_now, s_next = sched.s_nu(nu), sched.r_nu(nu), sched.s_nu(nu + 1)
    e = state.e
    smoothed = instance.smooth(e, sched.smoothing_scale(nu), s_now)
    v = -instance.h1(smoothed, s_now, r_now)  # v_nu = -(h_nu o S_nu)(e_nu)

    gap = instance.gap(nu, sched) * config.theta_gate
    v1 = instance.norm_generator(v, 1, r_now)
    e1 = instance.norm(e, 1, r_now)
    if v1 > gap or e1 > gap:
        raise StepError(
            f"flow/action threshold violated at nu={nu}: |v|_1={v1:.3g}, |e|_1={e1:.3g}, gap={gap:.3g}"
        )

    phi = instance.flow(v, r_now, s_next)
    e_next = instance.act(e, phi, s_next, r_now)

    q_res = instance.norm(instance.Q(e_next), 0, s_next) if config.check_q else 0.0
    norm_p, norm_pq, hyp_a, hyp_b = _hypotheses(instance, e_next, sched, nu + 1)
    row = LedgerRow(
        nu=nu + 1,
        s_nu=s_next,
        r_nu=sched.r_nu(nu + 1),
        t_nu=sched.t_nu(nu + 1),
        eps_nu=sched.eps_nu(nu + 1),
        norm_p=norm_p,
        norm_pq=norm_pq,
        v_norm_0=instance.norm_generator(v, 0, r_now),
        v_norm_1=v1,
        hyp_a=hyp_a,
        hyp_b=hyp_b,
        residual=instance.norm(e_next, 0, s_next),
        q_residual=q_res,
    )
    symmetry = instance.compose_symmetry(state.symmetry, phi)
    return IterationState(nu + 1, e_next, v, symmetry, state.ledger + [row])


def monitor(state: IterationState, sched: ConstantsSchedule):
    """Per-nu (a)_nu / (b)_nu report from the ledger (margins in log scale)."""
    out = []
    for row in state.ledger:
        lb = _log_bound(sched, row.nu)
        out.append(
            {
                "nu": row.nu,
                "a_ok": row.hyp_a,
                "b_ok": row.hyp_b,
                "a_margin": lb - (math.log(row.norm_pq) if row.norm_pq > 0 else -math.inf),
                "b_margin": -lb - (math.log(row.norm_p) if row.norm_p > 0 else -math.inf),
            }
        )
    return out


@dataclass
class RunResult:
    converged: bool
    symmetry: object
    state: IterationState
    residual: float
    monitor: list
    admissibility: AdmissibilityReport
    tame_output: dict = field(default_factory=dict)  # k -> ||psi - id||_k / ||e_0||_{k+l}

    def ledger_csv(self) -> str:
        buf = io.StringIO()
        buf.write(LedgerRow.HEADER + "\n")
        for row in self.state.ledger:
            buf.write(row.csv() + "\n")
        return buf.getvalue()


def run(instance, e, sched: ConstantsSchedule, config: RunConfig | None = None) -> RunResult:
    """Iterate until the residual tolerance, nu_max, or failure.

    Returns the composed symmetry; raises DivergenceError (ledger
    attached) when nu_max is exhausted above tolerance or a step fails.
    """
    config = config or RunConfig()
    adm = admissibility_check(instance, e, sched)
    if not adm.ok:
        from .errors import NeighborhoodError

        raise NeighborhoodError(
            f"input outside the admissibility neighborhood: "
            f"|e|_p={adm.low_norm:.3g} (bound {adm.low_bound:.3g}), "
            f"|e|_p+q={adm.high_norm:.3g} (bound {adm.high_bound:.3g})"
        )
    norm_p, norm_pq, hyp_a, hyp_b = _hypotheses(instance, e, sched, 0)
    row0 = LedgerRow(
        nu=0, s_nu=sched.s_nu(0), r_nu=sched.r_nu(0), t_nu=sched.t_nu(0),
        eps_nu=sched.eps_nu(0), norm_p=norm_p, norm_pq=norm_pq,
        v_norm_0=0.0, v_norm_1=0.0, hyp_a=hyp_a, hyp_b=hyp_b,
        residual=instance.norm(e, 0, sched.s_nu(0)),
        q_residual=instance.norm(instance.Q(e), 0, sched.s_nu(0)) if config.check_q else 0.0,
    )
    state = IterationState(0, e, None, instance.identity_symmetry(), [row0])
    residual = row0.residual
    if residual <= config.tol:
        return RunResult(True, state.symmetry, state, residual, monitor(state, sched), adm)
    while state.nu < min(sched.nu_max, config.nu_max):
        try:
            state = step(state, instance, sched, config)
        except Exception as exc:
            raise DivergenceError(f"iteration failed at nu={state.nu}: {exc}", ledger=state.ledger) from exc
        residual = state.ledger[-1].residual
        if not math.isfinite(residual):
            raise DivergenceError("residual is not finite", ledger=state.ledger)
        if residual <= config.tol:
            tame = _tame_output_ratios(instance, state.symmetry, e, sched)
            return RunResult(True, state.symmetry, state, residual, monitor(state, sched), adm, tame)
    raise DivergenceError(
        f"no convergence within nu_max={config.nu_max} (residual {residual:.3e})",
        ledger=state.ledger,
    )


# ---------------------------------------------------------------------- #
# diagnostic checks


def quadratic_check(instance, e, k: int, r: float) -> float:
    """||Q(e) - dQ_0(e)||_k / (||e||_d ||e||_{k+d}); Lemma A's ratio."""
    num = instance.norm(_sub(instance.Q(e), instance.linearize(e)), k, r)
    den = instance.norm(e, instance.d_order, r) * instance.norm(e, k + instance.d_order, r)
    return num / den if den > 0 else 0.0


def homotopy_contract_check(instance, w, s: float, r: float, k: int = 0):
    """Residual of (delta_0 h1 + h2 delta_0)(w) = w|_r plus tame ratios."""
    v = instance.h1(w, s, r)
    recon = instance.infinitesimal_action(v, r)
    dw = instance.linearize(w)
    h2w = instance.h2(dw, s, r)
    if h2w is not None:
        recon = _add(recon, h2w)
    resid = instance.norm(_sub(recon, instance.restrict(w, r)), k, r)
    denom = instance.norm(w, k + instance.l1, s)
    ratio1 = instance.norm_generator(v, k, r) / denom if denom > 0 else 0.0
    return resid, ratio1


def _tame_output_ratios(instance, symmetry, e0, sched):
    """||psi - id||_k / ||e_0||_{k+l, s} for k = 0, 1, when measurable."""
    fn = getattr(instance, "symmetry_norm", None)
    if fn is None or symmetry is None:
        return {}
    out = {}
    for k in (0, 1):
        denom = instance.norm(e0, k + sched.l, sched.s)
        if denom > 0:
            out[k] = fn(symmetry, k, sched.r_infinity) / denom
    return out


def _sub(a, b):
    try:
        return a - b
    except TypeError:
        raise TypeError("instance sections must support subtraction")


def _add(a, b):
    return a + b
