"""Machine checks of the auxiliary inequalities on random and reference instances.

Every check returns a :class:`CheckReport`.  Inequality margins are
``(RHS - LHS) / RHS`` (0 when both sides vanish), so a single slack of
``1e-10`` applies regardless of the size of the instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .functionals import (
    Fields,
    a_functional,
    alpha,
    b_functional,
    beta,
    bv_functional,
)
from .grid import GridN, fsum, lower_corner, prefix_sum, suffix_sum, upper_corner
from .weights import (
    Exponents,
    Factor1D,
    FactorizedWeight,
    PowerWeight,
    Weight,
    ZoneError,
    constant_weight,
    power_weight,
)

SLACK = 1e-10

# Largest ascent / B_v ratio seen on the reference suite was 0.99966 (measured
# once at the suite's resolution, config pow-e); frozen with 25% headroom.
KAPPA_BV = 1.25


@dataclass
class CheckReport:
    check_name: str
    instances_run: int = 0
    worst_margin: float = math.inf
    failing_instance: dict | None = None
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.failing_instance is None

    def record(self, margin: float, instance: Callable[[], dict] | dict) -> None:
        self.instances_run += 1
        if margin < self.worst_margin:
            self.worst_margin = margin
        if (margin < -SLACK or math.isnan(margin)) and self.failing_instance is None:
            self.failing_instance = instance() if callable(instance) else instance

    def merge(self, other: "CheckReport") -> None:
        self.instances_run += other.instances_run
        self.worst_margin = min(self.worst_margin, other.worst_margin)
        if self.failing_instance is None and other.failing_instance is not None:
            self.failing_instance = {"check": other.check_name, **other.failing_instance}

    def to_dict(self) -> dict:
        return {
            "check_name": self.check_name,
            "passed": self.passed,
            "instances_run": self.instances_run,
            "worst_margin": self.worst_margin,
            "failing_instance": self.failing_instance,
            "details": self.details,
        }


def relative_margin(lhs: float, rhs: float) -> float:
    if rhs == 0:
        return 0.0 if lhs <= 0 else -math.inf
    return (rhs - lhs) / abs(rhs)


# ---------------------------------------------------------------- sequences


def _pow_minus_one(base: float, gamma: float) -> float:
    """``(base^(gamma' - 1) - 1)^(gamma - 1)`` for base > 1, in log form (gamma' can be huge)."""
    t = math.log(base) / (gamma - 1.0)  # (gamma' - 1) log base
    return math.exp((gamma - 1.0) * (t + math.log(-math.expm1(-t))))


def ghs_constant(gamma: float, ratio: float, part: str) -> float:
    """Constant of the discrete geometric-weight inequality, part 'a' (ratio = rho > 1)
    or part 'b' (ratio = tau < 1)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if part == "a":
        if not ratio > 1:
            raise ValueError("part (a) needs rho > 1")
        if gamma <= 1:
            return ratio**gamma / (ratio**gamma - 1.0)
        return ratio**gamma / (_pow_minus_one(ratio, gamma) * (ratio ** (gamma - 1.0) - 1.0))
    if part == "b":
        if not 0 < ratio < 1:
            raise ValueError("part (b) needs 0 < tau < 1")
        if gamma <= 1:
            return ratio ** (-gamma) / (ratio ** (-gamma) - 1.0)
        return ratio ** (-gamma) / (_pow_minus_one(1.0 / ratio, gamma) * (ratio ** (1.0 - gamma) - 1.0))
    raise ValueError(f"part must be 'a' or 'b', got {part!r}")


def ghs_sides(a: np.ndarray, weights: np.ndarray, gamma: float, ratio: float, part: str) -> tuple[float, float]:
    """Both sides for sequences on the window k = -K..K (a = 0 outside).

    Outside the window the weight sequence continues geometrically with the
    extremal ratio, and the resulting infinite tail of the left side is
    summed in closed form.
    """
    a = np.asarray(a, dtype=float)
    weights = np.asarray(weights, dtype=float)
    total = fsum(a)
    if part == "a":
        tails = np.cumsum(a[::-1])[::-1]
        # k < -K: the inner sum is the total, weights shrink by 1/ratio per step
        outside = total**gamma * weights[0] ** gamma / (ratio**gamma - 1.0)
    else:
        tails = np.cumsum(a)
        outside = total**gamma * weights[-1] ** gamma * ratio**gamma / (1.0 - ratio**gamma)
    lhs = fsum(tails**gamma * weights**gamma) + outside
    rhs = ghs_constant(gamma, ratio, part) * fsum(a**gamma * weights**gamma)
    return float(lhs), float(rhs)


def _geometric_weights(rng: np.random.Generator, ratio: float, part: str, K: int) -> np.ndarray:
    n = 2 * K + 1
    steps = np.full(n - 1, ratio)
    if part == "a":
        steps *= 1.0 + rng.exponential(0.5, n - 1) * (rng.random(n - 1) < 0.5)
    else:
        steps *= 1.0 / (1.0 + rng.exponential(0.5, n - 1) * (rng.random(n - 1) < 0.5))
    steps[rng.integers(n - 1)] = ratio  # the extremal ratio is attained
    logs = np.concatenate([[0.0], np.cumsum(np.log(steps))])
    return np.exp(logs - logs[K])


def check_ghs(gamma: float, rho_or_tau: float, trials: int = 100, seed: int = 0, part: str | None = None, K: int = 32) -> CheckReport:
    """Random instances of the weighted tail-sum inequality.  ``part`` defaults
    to 'a' for a ratio above 1 and 'b' below."""
    if part is None:
        part = "a" if rho_or_tau > 1 else "b"
    ghs_constant(gamma, rho_or_tau, part)  # validates the zone
    if not 1 <= K <= 64:
        raise ValueError("window half-width K must be in 1..64")
    rng = np.random.default_rng(seed)
    rep = CheckReport(f"ghs[{part}] gamma={gamma} ratio={rho_or_tau}")
    for t in range(trials):
        wts = _geometric_weights(rng, rho_or_tau, part, K)
        a = rng.exponential(1.0, 2 * K + 1) * (rng.random(2 * K + 1) < rng.uniform(0.05, 1.0))
        a *= np.exp(rng.normal(0.0, 3.0, 2 * K + 1))
        lhs, rhs = ghs_sides(a, wts, gamma, rho_or_tau, part)
        rep.record(relative_margin(lhs, rhs), lambda: {"trial": t, "seed": seed, "lhs": lhs, "rhs": rhs})
    return rep


def ghs_impulse(gamma: float = 1.0, rho: float = 2.0, K: int = 32) -> tuple[float, float]:
    """Unit impulse at m = 0 with weights rho^k: the equality case for gamma = 1."""
    a = np.zeros(2 * K + 1)
    a[K] = 1.0
    wts = rho ** np.arange(-K, K + 1, dtype=float)
    return ghs_sides(a, wts, gamma, rho, "a")


def ghs_suite(trials: int = 1000, seed: int = 0) -> CheckReport:
    """``trials`` instances spread over gamma in {0.5, 1, 2, 3} and both parts."""
    rep = CheckReport("ghs")
    cases = [(g, r) for g in (0.5, 1.0, 2.0, 3.0) for r in (1.5, 2.0, 4.0, 0.25, 0.5, 0.75)]
    per = [trials // len(cases) + (1 if i < trials % len(cases) else 0) for i in range(len(cases))]
    for i, ((g, r), n) in enumerate(zip(cases, per)):
        rep.merge(check_ghs(g, r, n, seed=seed * 1000 + i))
    lhs, rhs = ghs_impulse()
    rep.details["impulse"] = {"lhs": lhs, "rhs": rhs, "relative_error": abs(lhs - rhs) / rhs}
    return rep


# ------------------------------------------------------------------- boxes


@dataclass(frozen=True)
class Box:
    """Cell index ranges ``[i0, i1) x [j0, j1)``."""

    i0: int
    i1: int
    j0: int
    j1: int

    def __post_init__(self):
        if not (0 <= self.i0 < self.i1 and 0 <= self.j0 < self.j1):
            raise ValueError(f"degenerate box {self}")

    @property
    def cells(self) -> tuple[slice, slice]:
        return slice(self.i0, self.i1), slice(self.j0, self.j1)

    @property
    def nodes(self) -> tuple[slice, slice]:
        return slice(self.i0, self.i1 + 1), slice(self.j0, self.j1 + 1)


def random_box(rng: np.random.Generator, shape: Sequence[int], min_cells: int = 1) -> Box:
    def span(n):
        lo = int(rng.integers(0, n - min_cells + 1))
        hi = int(rng.integers(lo + min_cells, n + 1))
        return lo, hi

    (i0, i1), (j0, j1) = span(shape[0]), span(shape[1])
    return Box(i0, i1, j0, j1)


def _masked_form1(phi: np.ndarray, psi: np.ndarray, mask: np.ndarray) -> float:
    """``sum mask * d_y phi * d_x(-psi)``, averaged over both edge pairings."""
    low = (phi[:-1, 1:] - phi[:-1, :-1]) * (psi[:-1, 1:] - psi[1:, 1:])
    up = (phi[1:, 1:] - phi[1:, :-1]) * (psi[:-1, :-1] - psi[1:, :-1])
    return fsum(np.where(mask, 0.5 * (low + up), 0.0))


def lemma_sides(which: str, fields: Fields, box: Box, A: float | None = None) -> tuple[float, float]:
    """LHS (box-relative double cumulation) and RHS of the box lemma."""
    e = fields.exps
    grid = fields.grid
    cs = box.cells
    vol = grid.volumes[cs]
    sig = fields.sigma.values[cs]
    w = fields.w.values[cs]
    if which == "lemma1":
        inner = upper_corner(prefix_sum(sig * vol))
        lhs = fsum(w * vol * inner**e.q)
        mass = fsum(sig * vol)
        if e.zone == "p<q":
            return lhs, alpha(e.p, e.q) * mass ** (e.q / e.p) * A**e.q
        r = e.require_q_lt_p("lemma1")
        stj = _box_stieltjes(fields, box, w > 0)
        return lhs, beta(e.p, e.q) * mass ** (e.q / e.p) * stj ** (e.q / r)
    if which == "lemma2":
        inner = lower_corner(suffix_sum(w * vol))
        lhs = fsum(sig * vol * inner**e.pp)
        mass = fsum(w * vol)
        if e.zone == "p<q":
            return lhs, alpha(e.qp, e.pp) * mass ** (e.pp / e.qp) * A**e.pp
        r = e.require_q_lt_p("lemma2")
        stj = _box_stieltjes(fields, box, sig > 0)
        return lhs, beta(e.qp, e.pp) * mass ** (e.pp / e.qp) * stj ** (e.pp / r)
    raise ValueError(f"which must be 'lemma1' or 'lemma2', got {which!r}")


def _box_stieltjes(fields: Fields, box: Box, mask: np.ndarray) -> float:
    e = fields.exps
    r = e.r
    ns = box.nodes
    phi = fields.S[ns] ** (r / e.pp)
    psi = fields.W[ns] ** (r / e.q)
    return max(_masked_form1(phi, psi, mask), 0.0)


def check_lemma_boxes(
    which: str, v: Weight, w: Weight, e: Exponents, grid: GridN, boxes: int = 100, seed: int = 0, min_cells: int = 1
) -> CheckReport:
    if e.zone == "p=q":
        raise ZoneError("the box lemmas are stated for p != q")
    fields = Fields.from_weights(v, w, grid, e)
    A = a_functional("A1", fields).value if e.zone == "p<q" else None
    rng = np.random.default_rng(seed)
    rep = CheckReport(f"{which} {e.zone_tag}")
    for _ in range(boxes):
        box = random_box(rng, grid.shape, min_cells)
        lhs, rhs = lemma_sides(which, fields, box, A)
        rep.record(relative_margin(lhs, rhs), lambda: {"box": box.__dict__, "lhs": lhs, "rhs": rhs, "p": e.p, "q": e.q})
    return rep


# ------------------------------------------------------------------ limits


def limit_gaps(v: Weight, w: Weight, p: float, deltas: Sequence[float], grid: GridN) -> dict[str, list[float]]:
    """``|B_i(p, p - delta) - A_i(p, p)|`` for i = 1, 2, 3 and each delta."""
    if any(d <= 0 or d >= p - 1 for d in deltas):
        raise ValueError(f"every delta must lie in (0, p - 1) = (0, {p - 1})")
    base = Fields.from_weights(v, w, grid, Exponents(p, p))
    A = [a_functional(f"A{i}", base).value for i in (1, 2, 3)]
    gaps: dict[str, list[float]] = {f"B{i}": [] for i in (1, 2, 3)}
    for d in deltas:
        fl = Fields.from_weights(v, w, grid, Exponents(p, p - d))
        for i in (1, 2, 3):
            gaps[f"B{i}"].append(abs(b_functional(f"B{i}", fl).value - A[i - 1]))
    return gaps


def check_limit_AB(v: Weight, w: Weight, p: float, deltas: Sequence[float], grid: GridN) -> CheckReport:
    """The gaps must strictly decrease along the given (decreasing) deltas."""
    if list(deltas) != sorted(deltas, reverse=True):
        raise ValueError("deltas must be decreasing")
    gaps = limit_gaps(v, w, p, deltas, grid)
    rep = CheckReport(f"limit p={p}", details={"deltas": list(deltas), "gaps": gaps})
    for name, gs in gaps.items():
        for k in range(len(gs) - 1):
            if gs[k] == 0 and gs[k + 1] == 0:
                margin = 0.0
            else:
                margin = (gs[k] - gs[k + 1]) / gs[k] if gs[k] > 0 else -math.inf
                if margin == 0.0:
                    margin = -math.inf  # strict decrease required
            rep.record(margin, {"functional": name, "step": k, "gaps": gs})
    return rep


# ------------------------------------------------------------------- zones


def zone_flags_exact(p: Fraction, q: Fraction) -> tuple[bool, bool]:
    r = 1 / (1 / q - 1 / p)
    qp = q / (q - 1)
    return r / p >= 1, r / qp >= 1


def check_zones(e: Exponents | None = None, step: Fraction = Fraction(1, 20)) -> CheckReport:
    """Scan 1.05 <= q < p <= 6 on a lattice and check the zone table.

    Each lattice point must satisfy exactly one of the four (r/p, r/q')
    zone predicates, the float classification of :class:`Exponents` must
    agree with exact rational arithmetic, and r must stay bounded in the
    zone r/p < 1, r/q' < 1.
    """
    if e is not None:
        e.require_q_lt_p("check_zones")
    rep = CheckReport("zones")
    lo, hi = Fraction(105, 100), Fraction(6)
    vals = []
    x = lo
    while x <= hi:
        vals.append(x)
        x += step
    counts = {}
    max_r_third = Fraction(0)
    for q in vals:
        for p in vals:
            if not q < p:
                continue
            a, b = zone_flags_exact(p, q)
            preds = [a and b, a and not b, (not a) and b, not a and not b]
            ok = sum(preds) == 1
            ex = Exponents(float(p), float(q))
            ok = ok and (ex.r_over_p_ge_1, ex.r_over_qp_ge_1) == (a, b)
            r = 1 / (1 / q - 1 / p)
            ok = ok and math.isclose(ex.r, float(r), rel_tol=1e-12)
            counts[(a, b)] = counts.get((a, b), 0) + 1
            if not a and not b:
                max_r_third = max(max_r_third, r)
            rep.record(0.0 if ok else -1.0, {"p": str(p), "q": str(q)})
    rep.details["zone_counts"] = {f"r/p>=1:{a},r/q'>=1:{b}": n for (a, b), n in sorted(counts.items())}
    rep.details["max_r_third_zone"] = float(max_r_third)
    rep.record(0.0 if math.isfinite(float(max_r_third)) else -1.0, {"max_r_third_zone": str(max_r_third)})
    if e is not None:
        rep.details["zone_of_e"] = e.zone_tag
    return rep


# --------------------------------------------------------- random instances


@dataclass
class Config:
    name: str
    v: Weight
    w: Weight
    e: Exponents
    grid: GridN

    def describe(self) -> dict:
        return {"name": self.name, "p": self.e.p, "q": self.e.q, "v": self.v.to_dict(), "w": self.w.to_dict()}


def random_power_config(rng: np.random.Generator, zone: str, nodes: int = 128, span: float = 1e2, name: str = "") -> Config:
    """Power weights with sigma- and w-exponents in (-0.9, 2) on a log grid.

    The exponents keep every cumulation finite near the origin of the
    truncation, matching the standing finiteness assumption.
    """
    if zone == "p<q":
        p = rng.uniform(1.3, 4.0)
        q = rng.uniform(p + 0.2, p + 3.0)
    elif zone == "q<p":
        q = rng.uniform(1.3, 4.0)
        p = rng.uniform(q + 0.2, q + 3.0)
    elif zone == "zone1":
        while True:
            q = rng.uniform(1.2, 4.0)
            p = rng.uniform(q + 0.1, 2 * q)
            e = Exponents(round(p, 6), round(q, 6))
            if e.r_over_p_ge_1 and e.r_over_qp_ge_1:
                break
    else:
        raise ValueError(f"unknown zone {zone!r}")
    e = Exponents(round(p, 6), round(q, 6))
    a_sig = rng.uniform(-0.9, 2.0, 2)
    a_w = rng.uniform(-0.9, 2.0, 2)
    v = PowerWeight(float(np.exp(rng.normal())), tuple(-(e.p - 1.0) * a_sig))
    w = PowerWeight(float(np.exp(rng.normal())), tuple(a_w))
    return Config(name or f"{zone}-{rng.integers(1 << 30)}", v, w, e, GridN.log(1.0 / span, span, nodes))


def unit_config(p: float, q: float, nodes: int = 129) -> Config:
    """v = w = 1 on (0, 1)^2."""
    return Config(f"unit p={p} q={q}", constant_weight(2), constant_weight(2), Exponents(p, q), GridN.linear(0.0, 1.0, nodes))


def reference_suite(nodes: int = 96) -> list[Config]:
    """Fixed q < p configurations used for the sufficiency constant."""
    g = GridN.log(1e-2, 1e2, nodes)
    cfgs = [
        unit_config(3.0, 2.0, nodes),
        unit_config(4.0, 1.5, nodes),
        Config("pow-a", power_weight(0.5, 0.5), power_weight(0.2, -0.3), Exponents(3.0, 2.0), g),
        Config("pow-b", power_weight(-0.4, 1.0), power_weight(1.0, 0.3), Exponents(2.5, 1.5), g),
        Config("pow-c", power_weight(1.5, -0.5), power_weight(-0.5, 0.5), Exponents(4.0, 2.0), g),
        Config("pow-d", power_weight(0.0, 0.0), power_weight(1.5, 1.5), Exponents(5.0, 1.8), g),
        Config("pow-e", power_weight(2.0, 2.0), power_weight(0.0, 0.0), Exponents(2.2, 1.6), g),
        Config(
            "fac-a",
            FactorizedWeight((Factor1D((1.0, 1.0), (0.0, 1.0), (1.0,)), Factor1D.power(0.5))),
            FactorizedWeight((Factor1D((1.0, 1.0), (0.5, -1.0), (1.0,)), Factor1D.power(-0.5))),
            Exponents(3.0, 2.0),
            g,
        ),
    ]
    return cfgs


def reference_limit_config(nodes: int = 129) -> Config:
    return unit_config(3.0, 3.0, nodes)


def check_bv_sufficiency(configs: Sequence[Config] | None = None, kappa: float = KAPPA_BV, **ascend_kw) -> CheckReport:
    """``ascent <= kappa * B_v`` with the single frozen kappa."""
    from .normest import ascend

    rep = CheckReport("Bv sufficiency", details={"kappa": kappa, "ratios": {}})
    for cfg in configs if configs is not None else reference_suite():
        fields = Fields.from_weights(cfg.v, cfg.w, cfg.grid, cfg.e)
        bv = bv_functional("Bv", fields).value
        est = ascend(cfg.v, cfg.w, cfg.e, cfg.grid, **ascend_kw).value
        rep.details["ratios"][cfg.name] = est / bv if bv > 0 else math.inf
        rep.record(relative_margin(est, kappa * bv), cfg.describe)
    return rep


def as_factorized(wt: Weight) -> FactorizedWeight:
    if isinstance(wt, FactorizedWeight):
        return wt
    if isinstance(wt, PowerWeight):
        first, *rest = wt.exponents
        return FactorizedWeight((Factor1D.power(first, wt.c), *(Factor1D.power(a) for a in rest)))
    raise ValueError("dilation sweep needs a factorized w")


def dilation_sweep(cfg: Config, lambdas: Sequence[float]) -> list[float]:
    """``B_v / B_w`` with w dilated by each lambda (x -> w(x / lambda))."""
    w = as_factorized(cfg.w)
    out = []
    for lam in lambdas:
        fields = Fields.from_weights(cfg.v, w.dilated(lam), cfg.grid, cfg.e)
        bw = bv_functional("Bw", fields).value
        out.append(bv_functional("Bv", fields).value / bw if bw > 0 else math.inf)
    return out


# ------------------------------------------------------------------ suites

SUITES = ("ghs", "lemmas", "limits", "zones", "all")


def run_suite(name: str, seed: int = 0) -> list[CheckReport]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    reports = []
    if name in ("ghs", "all"):
        rep = ghs_suite(1000, seed)
        lhs, rhs = ghs_impulse()
        rep.record(0.0 if abs(lhs - rhs) <= 1e-12 * rhs else -1.0, {"impulse": [lhs, rhs]})
        reports.append(rep)
    if name in ("lemmas", "all"):
        rng = np.random.default_rng(seed)
        rep = CheckReport("lemmas")
        for zone in ("p<q", "q<p"):
            for which in ("lemma1", "lemma2"):
                cfg = random_power_config(rng, zone, nodes=48)
                rep.merge(check_lemma_boxes(which, cfg.v, cfg.w, cfg.e, cfg.grid, 100, seed=int(rng.integers(1 << 31))))
        reports.append(rep)
    if name in ("limits", "all"):
        cfg = reference_limit_config()
        reports.append(check_limit_AB(cfg.v, cfg.w, cfg.e.p, (0.4, 0.2, 0.1), cfg.grid))
    if name in ("zones", "all"):
        reports.append(check_zones())
    return reports
