"""Direct estimation of the best constant ``C`` in ``||I f||_{q,w} <= C ||f||_{p,v}``.

Lower bounds come from explicit test functions (rectangle probes and the
``sigma * J`` probe) and from a fixed-point ascent on the Rayleigh ratio.
All quantities are discrete: ``I f`` on a cell is the prefix cumulation read at
the cell's upper corner, and its adjoint is the suffix cumulation read at the
lower corner.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .functionals import Fields, b_functional
from .grid import CellField, GridN, check_same_grid, fsum, lower_corner, prefix_sum, suffix_sum, upper_corner
from .weights import Exponents, Weight, dual_weight

DEFAULT_ITERS = 500
DEFAULT_TOL = 1e-9
TRACE_SLACK = 1e-12


def max_threads() -> int:
    """Worker cap from ``HARDYCERT_THREADS`` (default 1)."""
    raw = os.environ.get("HARDYCERT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


class HardyOperator:
    """Cell-to-cell discrete ``I_n`` and its adjoint on one grid."""

    def __init__(self, grid: GridN):
        self.grid = grid
        self.vol = grid.volumes

    def apply(self, f: np.ndarray) -> np.ndarray:
        return upper_corner(prefix_sum(f * self.vol))

    def adjoint(self, g: np.ndarray) -> np.ndarray:
        return lower_corner(suffix_sum(g * self.vol))


@dataclass
class Problem:
    """Cell samples of v, sigma = v^(1-p') and w for one (v, w, p, q)."""

    grid: GridN
    e: Exponents
    v: np.ndarray
    sigma: np.ndarray
    w: np.ndarray

    @classmethod
    def build(cls, v, w, e: Exponents, grid: GridN | None = None) -> "Problem":
        if isinstance(v, CellField):
            grid = v.grid if grid is None else grid
            check_same_grid(grid, v.grid)
            if (v.values <= 0).any():
                raise ValueError("v must be positive on every cell")
            vv = np.asarray(v.values)
            sig = vv ** (1.0 - e.pp)
        else:
            vv = v.sample(grid).values
            sig = dual_weight(v, e).sample(grid).values
        wv = w.values if isinstance(w, CellField) else w.sample(grid).values
        if isinstance(w, CellField):
            check_same_grid(grid, w.grid)
        return cls(grid, e, np.asarray(vv, dtype=float), np.asarray(sig, dtype=float), np.asarray(wv, dtype=float))


def _ratio(op: HardyOperator, f: np.ndarray, v: np.ndarray, w: np.ndarray, e: Exponents) -> float:
    fm = float(np.max(f))
    if fm <= 0:
        raise ValueError("test function is identically zero")
    fn = f / fm
    den = fsum(fn**e.p * v * op.vol)
    if den <= 0:
        raise ValueError("zero denominator: f vanishes v-almost everywhere")
    num = fsum(op.apply(fn) ** e.q * w * op.vol)
    return num ** (1.0 / e.q) / den ** (1.0 / e.p)


def rayleigh_ratio(f: CellField, v, w, e: Exponents) -> float:
    """``||I f||_{L^q_w} / ||f||_{L^p_v}`` on the grid of ``f``."""
    if (f.values < 0).any():
        raise ValueError("the ratio is taken over nonnegative functions")
    pr = Problem.build(v, w, e, f.grid)
    return _ratio(HardyOperator(f.grid), np.asarray(f.values), pr.v, pr.w, e)


# ------------------------------------------------------------------ probes


@dataclass
class ProbeResult:
    ratio: float
    node: tuple[int, ...]
    kind: str
    f: CellField


def _exclusive_prefix(a: np.ndarray, d: int) -> np.ndarray:
    pad = [(0, 0)] * a.ndim
    pad[d] = (1, 0)
    return np.pad(np.cumsum(a, axis=d), pad)


def _inclusive_suffix_nodes(a: np.ndarray, d: int) -> np.ndarray:
    pad = [(0, 0)] * a.ndim
    pad[d] = (0, 1)
    return np.pad(np.flip(np.cumsum(np.flip(a, axis=d), axis=d), axis=d), pad)


def rectangle_sweep(g: np.ndarray, pr: Problem) -> np.ndarray:
    """Ratio of ``f = g * chi_{cells below node k}`` for every node k at once.

    For each set O of axes on which a cell lies beyond the box, ``I f`` at
    that cell is the prefix table clamped to the box corner along O, so the
    numerator splits into 2^n separable pieces of prefix/suffix sums.
    """
    grid, e = pr.grid, pr.e
    n = grid.dim
    vol = grid.volumes
    gm = float(g.max())
    if gm <= 0:
        return np.zeros(grid.node_shape)
    gn = g / gm
    P = prefix_sum(gn * vol)
    pmax = float(P.max())
    Pq = (P / pmax) ** e.q
    wv = pr.w * vol
    num = np.zeros(grid.node_shape)
    for k in range(n + 1):
        for O in combinations(range(n), k):
            tail = wv
            for d in O:
                tail = _inclusive_suffix_nodes(tail, d)
            sel = tuple(slice(None) if d in O else slice(1, None) for d in range(n))
            Z = Pq[sel] * tail
            for d in range(n):
                if d not in O:
                    Z = _exclusive_prefix(Z, d)
            num = num + Z
    den = prefix_sum(gn**e.p * pr.v * vol)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = pmax * np.maximum(num, 0.0) ** (1.0 / e.q) / den ** (1.0 / e.p)
    return np.where(den > 0, ratio, 0.0)


def _box_indicator(grid: GridN, node: Sequence[int]) -> np.ndarray:
    chi = np.zeros(grid.shape)
    chi[tuple(slice(0, k) for k in node)] = 1.0
    return chi


def probe_rectangles(v, w, e: Exponents, grid: GridN, kinds=("sigma", "raw")) -> ProbeResult:
    """Best ratio over ``sigma * chi`` and ``chi`` for all boxes anchored at the origin.

    Ties go to the first kind, then the lowest node index.  When every ratio
    is 0 the full box is returned so the probe is still a usable start.
    """
    pr = Problem.build(v, w, e, grid)
    best = None
    for kind in kinds:
        g = pr.sigma if kind == "sigma" else np.ones(grid.shape)
        rat = rectangle_sweep(g, pr)
        flat = int(np.argmax(rat))
        node = tuple(int(i) for i in np.unravel_index(flat, rat.shape))
        val = float(rat[node])
        if best is None or val > best[0]:
            best = (val, node, kind, g)
    val, node, kind, g = best
    if val == 0.0:
        node = tuple(s - 1 for s in grid.node_shape)
    f = CellField(grid, g * _box_indicator(grid, node), nonnegative=True)
    return ProbeResult(val, node, kind, f)


@dataclass
class TestFunctionB:
    """The probe ``f = sigma * J``; ``J_field`` holds J per cell."""

    f: CellField
    J_field: np.ndarray
    ratio: float
    lhs: float
    rhs: float

    __test__ = False

    @property
    def deviation(self) -> float:
        if self.rhs == 0:
            return 0.0 if self.lhs == 0 else math.inf
        return abs(self.lhs - self.rhs) / self.rhs


def probe_B(v, w, e: Exponents, grid: GridN) -> TestFunctionB:
    """Build ``f = sigma * J`` with
    ``J^p(s, y) = int_s^inf S^(r/q') W^(r/p) (int_y^inf w(x, t) dt) dx``.

    Also returns both sides of ``int f^p v = (p' q / r^2) B_1^r``.
    """
    r = e.require_q_lt_p("probe_B")
    if grid.dim != 2:
        raise ValueError("probe_B is two-dimensional")
    pr = Problem.build(v, w, e, grid)
    fields = Fields(CellField(grid, pr.sigma, True), CellField(grid, pr.w, True), e)
    # S and W at cell midpoints: bilinear average of the four corners
    S = _corner_mean(fields.S)
    W = _corner_mean(fields.W)
    dx = grid.widths(0)[:, None]
    dy = grid.widths(1)[None, :]
    wcol = pr.w * dy
    # int_y^inf w dt from the cell midpoint in y
    col_tail = _inclusive_suffix_nodes(wcol, 1)[:, 1:] + 0.5 * wcol
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = (r / e.qp) * np.log(S) + (r / e.p) * np.log(W) + np.log(col_tail) + np.log(dx)
    lg = np.where(np.isnan(lg), -np.inf, lg)
    if np.isneginf(lg).all():
        zero = CellField(grid, np.zeros(grid.shape), True)
        b1 = b_functional("B1", fields).value
        return TestFunctionB(zero, np.zeros(grid.shape), 0.0, 0.0, (e.pp * e.q / r**2) * b1**r)
    m = float(lg[np.isfinite(lg)].max())
    integrand = np.exp(lg - m)
    # suffix in x from the cell midpoint
    Jp = _inclusive_suffix_nodes(integrand, 0)[1:, :] + 0.5 * integrand
    J = Jp ** (1.0 / e.p)
    f = pr.sigma * J
    # the identity is checked in log scale: both sides carry exp(m)
    lhs = fsum(f**e.p * pr.v * grid.volumes) * math.exp(m) if m < 700 else math.inf
    b1 = b_functional("B1", fields).value
    rhs = (e.pp * e.q / r**2) * b1**r
    ratio = _ratio(HardyOperator(grid), f, pr.v, pr.w, e) if f.max() > 0 else 0.0
    # undo the normalization when it fits in floating point; f = sigma * J either way
    scale = math.exp(m / e.p) if m / e.p < 700 else math.inf
    if math.isfinite(scale) and np.isfinite(f * scale).all():
        J, f = J * scale, f * scale
    return TestFunctionB(CellField(grid, f, True), J, ratio, lhs, rhs)


def _corner_mean(nodes: np.ndarray) -> np.ndarray:
    return 0.25 * (nodes[1:, 1:] + nodes[:-1, 1:] + nodes[1:, :-1] + nodes[:-1, :-1])


# ------------------------------------------------------------------ ascent


@dataclass
class NormEstimate:
    value: float
    probe_lower: float
    ascent_trace: list[float]
    converged: bool
    argmax_function: CellField | None
    start_values: list[float] = field(default_factory=list)
    traces: list[list[float]] = field(default_factory=list)
    best_start: int = 0

    def summary(self) -> dict:
        return {
            "value": self.value,
            "probe_lower": self.probe_lower,
            "converged": self.converged,
            "best_start": self.best_start,
            "start_values": self.start_values,
            "iterations": [len(t) - 1 for t in self.traces],
        }


def _run_start(f0: np.ndarray, pr: Problem, op: HardyOperator, iters: int, tol: float):
    e = pr.e
    vol = op.vol
    f = f0 / float(f0.max())
    f = f / fsum(f**e.p * pr.v * vol) ** (1.0 / e.p)
    trace = [_ratio(op, f, pr.v, pr.w, e)]
    best_f, best = f, trace[0]
    converged = False
    for _ in range(iters):
        Tf = op.apply(f)
        h = op.adjoint(Tf ** (e.q - 1.0) * pr.w)
        hm = float(h.max())
        if hm <= 0:
            # I* ((I f)^(q-1) w) vanishes: the ratio is 0 for every f
            trace.append(0.0)
            converged = True
            break
        g = pr.sigma * (h / hm) ** (1.0 / (e.p - 1.0))
        gm = float(g.max())
        if gm <= 0:
            trace.append(0.0)
            converged = True
            break
        g = g / gm
        den = fsum(g**e.p * pr.v * vol)
        f = g / den ** (1.0 / e.p)
        val = _ratio(op, f, pr.v, pr.w, e)
        prev = trace[-1]
        trace.append(val)
        if val > best:
            best, best_f = val, f
        if prev > 0 and abs(val - prev) <= tol * prev:
            converged = True
            break
    return best, best_f, trace, converged


def default_starts(v, w, e: Exponents, grid: GridN) -> tuple[list[np.ndarray], float]:
    """Constant 1, best sigma-box, best raw box, and the ``sigma J`` probe (sigma if q >= p)."""
    pr = Problem.build(v, w, e, grid)
    starts = [np.ones(grid.shape)]
    lower = 0.0
    for kind in ("sigma", "raw"):
        res = probe_rectangles(v, w, e, grid, kinds=(kind,))
        starts.append(np.asarray(res.f.values))
        lower = max(lower, res.ratio)
    if e.zone == "q<p" and grid.dim == 2:
        tb = probe_B(v, w, e, grid)
        if tb.f.values.max() > 0:
            starts.append(np.asarray(tb.f.values))
            lower = max(lower, tb.ratio)
        else:
            starts.append(pr.sigma.copy())
    else:
        starts.append(pr.sigma.copy())
    return starts, lower


def ascend(
    v,
    w,
    e: Exponents,
    grid: GridN,
    starts: Sequence | None = None,
    iters: int = DEFAULT_ITERS,
    tol: float = DEFAULT_TOL,
    threads: int | None = None,
) -> NormEstimate:
    """Fixed-point ascent ``f <- sigma [I*((I f)^(q-1) w)]^(1/(p-1))`` from several starts.

    The best ratio seen on any trace is returned; ties go to the lower start index.
    """
    pr = Problem.build(v, w, e, grid)
    op = HardyOperator(grid)
    if starts is None:
        start_arrays, probe_lower = default_starts(v, w, e, grid)
    else:
        start_arrays = [np.asarray(getattr(s, "values", s), dtype=float) for s in starts]
        probe_lower = 0.0
    usable = [s for s in start_arrays if s.max() > 0]
    if not usable:
        raise ValueError("all starting functions are identically zero")
    for s in usable:
        if (s < 0).any() or s.shape != grid.shape:
            raise ValueError("starts must be nonnegative cell arrays on the grid")
    nthreads = threads or max_threads()
    if nthreads > 1 and len(usable) > 1:
        with ThreadPoolExecutor(max_workers=min(nthreads, len(usable))) as ex:
            results = list(ex.map(lambda s: _run_start(s, pr, op, iters, tol), usable))
    else:
        results = [_run_start(s, pr, op, iters, tol) for s in usable]
    best_i = 0
    for i, res in enumerate(results):
        if res[0] > results[best_i][0]:
            best_i = i
    best, best_f, trace, converged = results[best_i]
    value = max(best, probe_lower)
    return NormEstimate(
        value=value,
        probe_lower=probe_lower,
        ascent_trace=trace,
        converged=all(r[3] for r in results),
        argmax_function=CellField(grid, best_f, nonnegative=True),
        start_values=[r[0] for r in results],
        traces=[r[2] for r in results],
        best_start=best_i,
    )
