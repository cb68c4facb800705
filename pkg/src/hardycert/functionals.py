"""Scalar functionals of (v, w) and the explicit equivalence constants.

All functionals are evaluated on a grid from cumulative node tables:

* ``S = I_2 sigma`` (prefix, zero on the lower faces),
* ``W = I_2* w`` (suffix, zero on the upper faces).

Sup-type functionals (A-family) are maxima over grid nodes, with ``0 * inf``
and ``0 / 0`` read as 0.  Integral-type functionals (B-family, B_v, B_w and
the multidimensional B's) are quadrature or Stieltjes sums.  Products of
powers are formed in log space so that exponents of size ``r`` cannot
overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .grid import (
    DIAGONAL,
    LOWER,
    UPPER,
    CellField,
    GridN,
    box_measure,
    check_same_grid,
    fsum,
    lower_corner,
    prefix_sum,
    stieltjes_form1,
    stieltjes_form2,
    stieltjes_form3,
    suffix_sum,
    upper_corner,
)
from .weights import Exponents, Factor1D, Weight, ZoneError, dual_weight

A_NAMES = ("A1", "A2", "A3")
B_NAMES = ("B1", "B2", "B3")
BV_NAMES = ("Bv", "Bw")
MULTI_NAMES = ("AMn", "ATn", "AMn*", "ATn*", "BMRn", "BPSn", "BMRn*", "BPSn*", "AW")
STARRED = ("AMn*", "ATn*", "BMRn*", "BPSn*")

# inequality slack for rounding
SLACK = 1e-10
# Each cell is split k x k for B1.  With cellwise-constant weights the
# cumulations are exactly bilinear inside a cell, so the split adds no model
# error and cuts the quadrature error of the integrand by k^2.
B1_SUBCELLS = 4


@dataclass
class FunctionalValue:
    name: str
    value: float
    witness: tuple[int, ...] | None = None
    witness_point: tuple[float, ...] | None = None
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"name": self.name, "value": self.value}
        if self.witness is not None:
            d["witness"] = list(self.witness)
            d["witness_point"] = list(self.witness_point)
        if self.info:
            d["info"] = self.info
        return d


# ---------------------------------------------------------------- constants


def alpha(p: float, q: float) -> float:
    if not p < q:
        raise ZoneError(f"alpha(p, q) needs p < q, got p={p}, q={q}")
    return p * p * (q - 1.0) / (q - p)


def _r(p: float, q: float) -> float:
    return 1.0 / (1.0 / q - 1.0 / p)


def beta(p: float, q: float) -> float:
    if not q < p:
        raise ZoneError(f"beta(p, q) needs q < p, got p={p}, q={q}")
    r = _r(p, q)
    tail = 2.0 ** (q / p - q / r) if r / p >= 1 else 1.0
    return 2.0 ** (q + 1.0) / (2.0 ** (q / r) - 1.0) * tail


def bold_beta(p: float, q: float) -> float:
    """Chain constant in ``B_2 <= bold_beta(p, q) B_1``."""
    if not q < p:
        raise ZoneError(f"bold_beta(p, q) needs q < p, got p={p}, q={q}")
    r = _r(p, q)
    if r <= q:
        raise ZoneError("bold_beta(p, q) needs r > q")
    den = (2.0 ** ((r - q) / p) - 1.0) ** (1.0 / r) * (2.0 ** (q / r) - 1.0) ** (1.0 / p)
    return 2.0 ** (1.0 / q + 1.0) / den


def _geom(base: float, expo: float) -> float:
    return (base / (base - 1.0)) ** expo


def c_alpha(p: float, q: float, a: float, a_dual: float) -> float:
    """Upper constant of the p < q sandwich for generic (alpha, alpha') slots."""
    pp, qp = p / (p - 1.0), q / (q - 1.0)
    first = (2.0 / 3.0) ** q * max(a, 2.0 * q * qp ** (q / pp)) * _geom(2.0 ** (p - 1.0), q / p)
    second = 3.0 ** (1.0 / p) * a_dual ** (1.0 / pp) * _geom(3.0 ** (q - 1.0), 1.0 / qp)
    return 3.0 ** (3.0 * q) * (first + second)


def c_beta(p: float, q: float, b: float, b_dual: float) -> float:
    """Upper constant of the q < p sandwich; ``p == q`` is read as r = inf."""
    pp, qp = p / (p - 1.0), q / (q - 1.0)
    q_over_r = 0.0 if p == q else q / _r(p, q)
    lift = q_over_r**q_over_r if q_over_r > 0 else 1.0
    first = (2.0 / 3.0) ** q * max(b, 2.0 * q * pp ** (q - 1.0) * lift) * _geom(2.0 ** (p - 1.0), q / p)
    second = 3.0 * b_dual ** (1.0 / pp) * _geom(3.0 ** (q - 1.0), 1.0 / qp)
    return 3.0 ** (3.0 * q) * (first + second)


def c_lower(e: Exponents) -> float:
    if e.zone != "q<p":
        return 1.0
    r, pp = e.r, e.pp
    return 2.0 ** (-1.0 / pp) * (e.q / r) ** (1.0 / e.q) * (pp / r) ** (1.0 / pp)


@dataclass
class ConstantSet:
    """Constants of the zone of ``e``; entries outside the zone are None.

    ``C_upper`` multiplies the zone's primary functional: A1 for p < q,
    B1 for q < p and A1 + A2 + A3 for p = q (the r -> inf limit of the
    B-chain constant).  ``C11``/``C1b``/``Cb1`` are the chain constants with
    unit slots.
    """

    p: float
    q: float
    zone: str
    c_lower: float
    C_upper: float
    alpha: float | None = None
    alpha_dual: float | None = None
    beta: float | None = None
    beta_dual: float | None = None
    bold_beta_pq: float | None = None
    bold_beta_dual: float | None = None
    C11: float | None = None
    C1b: float | None = None
    Cb1: float | None = None

    def require(self, name: str) -> float:
        val = getattr(self, name)
        if val is None:
            raise ZoneError(f"constant {name} is not defined in zone {self.zone}")
        return val

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def constants(e: Exponents) -> ConstantSet:
    p, q = e.p, e.q
    if e.zone == "p<q":
        a, ad = alpha(p, q), alpha(e.qp, e.pp)
        return ConstantSet(
            p, q, e.zone, 1.0, c_alpha(p, q, a, ad), alpha=a, alpha_dual=ad, C11=c_alpha(p, q, 1.0, 1.0)
        )
    if e.zone == "p=q":
        c11 = c_beta(p, q, 1.0, 1.0)
        return ConstantSet(p, q, e.zone, 1.0, c11, C11=c11)
    b, bd = beta(p, q), beta(e.qp, e.pp)
    cs = ConstantSet(
        p,
        q,
        e.zone,
        c_lower(e),
        c_beta(p, q, b, bd),
        beta=b,
        beta_dual=bd,
        bold_beta_pq=bold_beta(p, q),
        C11=c_beta(p, q, 1.0, 1.0),
        C1b=c_beta(p, q, 1.0, bd),
        Cb1=c_beta(p, q, b, 1.0),
    )
    if e.r > e.pp:
        cs.bold_beta_dual = bold_beta(e.qp, e.pp)
    return cs


# ------------------------------------------------------------ log helpers


def _log(x) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(x, dtype=float))


def _log_product(*pairs) -> np.ndarray:
    """``sum_k a_k log X_k`` with 0 * inf -> 0 (nan mapped to -inf)."""
    out = None
    for base, a in pairs:
        if a == 0:
            continue
        term = a * _log(base)
        with np.errstate(invalid="ignore"):
            out = term if out is None else out + term
    with np.errstate(invalid="ignore"):
        out = np.where(np.isnan(out), -np.inf, out)
    return out


def _log_cumulate(log_mass: np.ndarray, direction: str) -> np.ndarray:
    """Log of prefix/suffix sums of ``exp(log_mass)``."""
    finite = log_mass[np.isfinite(log_mass)]
    if finite.size == 0:
        return np.full(tuple(s + 1 for s in log_mass.shape), -np.inf)
    m = finite.max()
    table = (prefix_sum if direction == LOWER else suffix_sum)(np.exp(log_mass - m))
    return _log(table) + m


def _log_total(log_terms: np.ndarray) -> float:
    finite = log_terms[np.isfinite(log_terms)]
    if np.isposinf(log_terms).any():
        return math.inf
    if finite.size == 0:
        return -math.inf
    m = finite.max()
    return math.log(fsum(np.exp(log_terms - m))) + m


def _sup(name: str, log_vals: np.ndarray, grid: GridN, info=None) -> FunctionalValue:
    # np.argmax returns the first maximum in C order: lowest multi-index wins ties
    flat = int(np.argmax(log_vals))
    idx = tuple(int(i) for i in np.unravel_index(flat, log_vals.shape))
    best = log_vals[idx]
    value = 0.0 if best == -np.inf else math.exp(best)
    return FunctionalValue(name, value, idx, grid.node(idx), dict(info or {}))


def _integral(name: str, log_terms: np.ndarray, r: float, info=None) -> FunctionalValue:
    lt = _log_total(log_terms)
    value = 0.0 if lt == -math.inf else math.exp(lt / r)
    return FunctionalValue(name, value, info=dict(info or {}))


def _power_stieltjes(base: np.ndarray, a: float, gen: np.ndarray, b: float, corner: str):
    """``sum base(corner)^a * box_measure(gen^b)`` in scaled form.

    Returns ``(total, log_scale, negative_fraction)`` with the true sum equal
    to ``total * exp(log_scale)``.
    """
    gm = float(gen.max())
    if gm <= 0:
        return 0.0, 0.0, 0.0
    meas = box_measure((gen / gm) ** b)
    bpos = base[base > 0]
    bm = float(bpos.max()) if bpos.size else 1.0
    if corner == DIAGONAL:
        # power of the corner mean: tracks the cell-centre value to second order
        nb = 0.5 * (lower_corner(base) + upper_corner(base)) / bm
    else:
        nb = (lower_corner(base) if corner == LOWER else upper_corner(base)) / bm
    logint = a * _log(nb) if a != 0 else np.zeros_like(nb)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        terms = np.where(meas != 0, np.sign(meas) * np.exp(logint + _log(np.abs(meas))), 0.0)
    absmass = fsum(np.abs(meas))
    neg = fsum(-meas[meas < 0]) / absmass if absmass > 0 else 0.0
    if np.isinf(terms).any():
        return math.inf, 0.0, neg
    return fsum(terms), a * math.log(bm) + b * math.log(gm), neg


def subdivide_bilinear(nodes: np.ndarray, k: int) -> np.ndarray:
    """Node table on the grid with every cell split k x k, by bilinear interpolation."""
    if k == 1:
        return nodes
    t = np.arange(k) / k
    out = nodes
    for axis in (0, 1):
        a = np.moveaxis(out, axis, 0)
        lo, hi = a[:-1], a[1:]
        mid = lo[:, None] * (1.0 - t)[None, :, None] + hi[:, None] * t[None, :, None]
        mid = mid.reshape((-1,) + a.shape[1:])
        out = np.moveaxis(np.concatenate([mid, a[-1:]], axis=0), 0, axis)
    return out


def _stieltjes_value(name: str, total: float, log_scale: float, neg: float, r: float) -> FunctionalValue:
    info = {"negative_mass_fraction": neg}
    if total < 0:
        info["signed_total"] = total
        return FunctionalValue(name, math.nan, info=info)
    if total == 0:
        return FunctionalValue(name, 0.0, info=info)
    if math.isinf(total):
        return FunctionalValue(name, math.inf, info=info)
    return FunctionalValue(name, math.exp((math.log(total) + log_scale) / r), info=info)


# --------------------------------------------------------------- fields


class Fields:
    """Cell samples of sigma and w plus their cumulative node tables."""

    def __init__(self, sigma: CellField, w: CellField, exps: Exponents):
        check_same_grid(sigma.grid, w.grid)
        self.grid = sigma.grid
        self.sigma = sigma
        self.w = w
        self.exps = exps

    @classmethod
    def from_weights(cls, v: Weight, w: Weight, grid: GridN, exps: Exponents) -> "Fields":
        return cls(dual_weight(v, exps).sample(grid), w.sample(grid), exps)

    @cached_property
    def S(self) -> np.ndarray:
        """``I_2 sigma`` at nodes."""
        return prefix_sum(self.sigma.mass())

    @cached_property
    def W(self) -> np.ndarray:
        """``I_2* w`` at nodes."""
        return suffix_sum(self.w.mass())

    @cached_property
    def S_cells(self) -> np.ndarray:
        return upper_corner(self.S)

    @cached_property
    def W_cells(self) -> np.ndarray:
        return lower_corner(self.W)

    @cached_property
    def log_vol(self) -> np.ndarray:
        return _log(self.grid.volumes)

    def log_G(self, q: float | None = None) -> np.ndarray:
        """log of ``int_0^x int_0^y (I_2 sigma)^q w`` at nodes."""
        q = self.exps.q if q is None else q
        return _log_cumulate(_log_product((self.S_cells, q), (self.w.values, 1.0)) + self.log_vol, LOWER)

    def log_H(self, pp: float | None = None) -> np.ndarray:
        """log of ``int_x^inf int_y^inf (I_2* w)^p' sigma`` at nodes."""
        pp = self.exps.pp if pp is None else pp
        return _log_cumulate(_log_product((self.W_cells, pp), (self.sigma.values, 1.0)) + self.log_vol, UPPER)


def _with_exps(fields: Fields, e: Exponents | None) -> tuple[Fields, Exponents]:
    return fields, (fields.exps if e is None else e)


# ------------------------------------------------------------ A / B family


def a_functional(which: str, fields: Fields, e: Exponents | None = None) -> FunctionalValue:
    """A1 (Muckenhoupt type), A2 and A3: suprema over grid nodes."""
    fields, e = _with_exps(fields, e)
    S, W = fields.S, fields.W
    if which == "A1":
        lv = _log_product((W, 1.0 / e.q), (S, 1.0 / e.pp))
    elif which == "A2":
        G = np.exp(fields.log_G(e.q))
        lv = _log_product((G, 1.0 / e.q), (S, -1.0 / e.p))
    elif which == "A3":
        H = np.exp(fields.log_H(e.pp))
        lv = _log_product((H, 1.0 / e.pp), (W, -1.0 / e.qp))
    else:
        raise ValueError(f"unknown A-functional {which!r}")
    return _sup(which, lv, fields.grid)


def b_functional(which: str, fields: Fields, e: Exponents | None = None) -> FunctionalValue:
    """B1, B2, B3 (q < p) as Stieltjes sums against mixed differences."""
    fields, e = _with_exps(fields, e)
    r = e.require_q_lt_p(which)
    if fields.grid.dim != 2:
        raise ValueError("B-functionals are two-dimensional")
    if which == "B1":
        k = B1_SUBCELLS
        total, ls, neg = _power_stieltjes(
            subdivide_bilinear(fields.S, k), r / e.pp, subdivide_bilinear(fields.W, k), r / e.q, DIAGONAL
        )
    elif which == "B2":
        lg = fields.log_G(e.q)
        gmax = lg.max()
        if gmax == -np.inf:
            return FunctionalValue(which, 0.0, info={"negative_mass_fraction": 0.0})
        total, ls, neg = _power_stieltjes(fields.S, -r / e.p, np.exp(lg - gmax), r / e.q, UPPER)
        ls += (r / e.q) * gmax
    elif which == "B3":
        lh = fields.log_H(e.pp)
        hmax = lh.max()
        if hmax == -np.inf:
            return FunctionalValue(which, 0.0, info={"negative_mass_fraction": 0.0})
        total, ls, neg = _power_stieltjes(fields.W, -r / e.qp, np.exp(lh - hmax), r / e.pp, LOWER)
        ls += (r / e.pp) * hmax
    else:
        raise ValueError(f"unknown B-functional {which!r}")
    return _stieltjes_value(which, total, ls, neg, r)


def b1_forms(fields: Fields, e: Exponents | None = None) -> tuple[float, float, float]:
    """The three discrete forms of B1^r (common scale factor removed)."""
    fields, e = _with_exps(fields, e)
    r = e.require_q_lt_p("B1")
    sm, wm = fields.S.max(), fields.W.max()
    phi = (fields.S / sm) ** (r / e.pp) if sm > 0 else np.zeros_like(fields.S)
    psi = (fields.W / wm) ** (r / e.q) if wm > 0 else np.zeros_like(fields.W)
    return (
        stieltjes_form1(phi, psi, DIAGONAL),
        stieltjes_form2(phi, psi, DIAGONAL),
        stieltjes_form3(phi, psi, DIAGONAL),
    )


def bv_functional(which: str, fields: Fields, e: Exponents | None = None) -> FunctionalValue:
    """B_v (sufficient condition) and its dual B_w, both for q < p."""
    fields, e = _with_exps(fields, e)
    r = e.require_q_lt_p(which)
    lv = fields.log_vol
    if which == "Bv":
        inner = _log_product((fields.S_cells, e.q - 1.0), (fields.w.values, 1.0)) + lv
        K = lower_corner(_log_cumulate(inner, UPPER))
        terms = _log(fields.sigma.values) + lv + (r / e.q) * K
    elif which == "Bw":
        inner = _log_product((fields.W_cells, e.pp - 1.0), (fields.sigma.values, 1.0)) + lv
        L = upper_corner(_log_cumulate(inner, LOWER))
        terms = _log(fields.w.values) + lv + (r / e.pp) * L
    else:
        raise ValueError(f"unknown functional {which!r}")
    with np.errstate(invalid="ignore"):
        terms = np.where(np.isnan(terms), -np.inf, terms)
    return _integral(which, terms, r)


# -------------------------------------------------------- multidimensional


def _axis_table(fac: Factor1D, grid: GridN, d: int, direction: str) -> np.ndarray:
    mass = fac(grid.midpoints(d)) * grid.widths(d)
    return prefix_sum(mass) if direction == LOWER else suffix_sum(mass)


def _along(vec: np.ndarray, d: int, n: int) -> np.ndarray:
    shape = [1] * n
    shape[d] = vec.size
    return vec.reshape(shape)


def _divergence_report(factors: Sequence[Factor1D], grid: GridN, toward: str, decades: int = 4) -> dict:
    """Probe ``I_1 f(inf) = inf`` (toward='inf') or ``I_1* f(0) = inf`` (toward='0').

    The truncated integral is reported per factor; the hypothesis counts as
    asymptotically checked when the integral keeps growing by non-shrinking
    increments over successive decades beyond the truncation.
    """
    per_axis = []
    for d, fac in enumerate(factors):
        lo, hi = float(grid.axes[d][0]), float(grid.axes[d][-1])
        if toward == "inf":
            edges = [hi * 10.0**k for k in range(decades + 1)]
        else:
            edges = [lo * 10.0 ** (-k) for k in range(decades + 1)]
        incs = [abs(fac.integral(min(a, b), max(a, b))) for a, b in zip(edges[:-1], edges[1:])]
        grows = all(incs[k + 1] >= 0.99 * incs[k] for k in range(len(incs) - 1)) and incs[0] > 0
        per_axis.append({"truncated_value": fac.integral(lo, hi), "decade_increments": incs, "grows": grows})
    status = "asymptotically checked" if all(a["grows"] for a in per_axis) else "fails under widening"
    return {"divergence_hypothesis": status, "axes": per_axis}


@np.errstate(invalid="ignore")
def multidim_functional(
    which: str,
    v: Weight,
    w: Weight,
    grid: GridN,
    e: Exponents,
    s: tuple[float, float] | None = None,
) -> FunctionalValue:
    """Functionals for a factorizable v (AMn, ATn, BMRn, BPSn, AW) or w (starred)."""
    if which not in MULTI_NAMES:
        raise ValueError(f"unknown functional {which!r}")
    n = grid.dim
    starred = which in STARRED
    holder = w if starred else v
    if not holder.factorizable:
        raise ValueError(f"{which} needs a factorized {'w' if starred else 'v'}, got a {holder.kind} weight")
    lv = _log(grid.volumes)

    if not starred:
        sig_f = dual_weight(v, e).factors()
        phi = [_axis_table(f, grid, d, LOWER) for d, f in enumerate(sig_f)]
        phi_n = [_along(t, d, n) for d, t in enumerate(phi)]
        phi_c = [_along(t[1:], d, n) for d, t in enumerate(phi)]
        wc = w.sample(grid).values
        if which == "AMn":
            W = suffix_sum(wc * grid.volumes)
            lv_ = _log_product((W, 1.0 / e.q), *[(t, 1.0 / e.pp) for t in phi_n])
            return _sup(which, lv_, grid)
        if which == "ATn":
            inner = _log_product((wc, 1.0), *[(t, e.q) for t in phi_c]) + lv
            G = _log_cumulate(inner, LOWER)
            lv_ = G / e.q + _log_product(*[(t, -1.0 / e.p) for t in phi_n])
            return _sup(which, np.where(np.isnan(lv_), -np.inf, lv_), grid)
        if which == "AW":
            if n != 2 or not e.p <= e.q:
                raise ZoneError("AW needs n = 2 and p <= q")
            if s is None or not all(1.0 < si < e.p for si in s):
                raise ValueError(f"AW needs s1, s2 in (1, p={e.p}), got {s}")
            inner = (
                _log_product(
                    (phi_c[0], e.q * (e.p - s[0]) / e.p), (phi_c[1], e.q * (e.p - s[1]) / e.p), (wc, 1.0)
                )
                + lv
            )
            T = _log_cumulate(inner, UPPER)
            lv_ = T / e.q + _log_product((phi_n[0], (s[0] - 1.0) / e.p), (phi_n[1], (s[1] - 1.0) / e.p))
            return _sup(which, np.where(np.isnan(lv_), -np.inf, lv_), grid)
        r = e.require_q_lt_p(which)
        info = _divergence_report(sig_f, grid, "inf")
        sig_mass = [_along(f(grid.midpoints(d)), d, n) for d, f in enumerate(sig_f)]
        if which == "BMRn":
            W = suffix_sum(wc * grid.volumes)
            terms = _log_product(
                (lower_corner(W), r / e.q), *[(t, r / e.qp) for t in phi_c], *[(m, 1.0) for m in sig_mass]
            )
        else:  # BPSn
            inner = _log_product((wc, 1.0), *[(t, e.q) for t in phi_c]) + lv
            G = upper_corner(_log_cumulate(inner, LOWER))
            terms = (r / e.q) * G + _log_product(*[(t, -r / e.q) for t in phi_c], *[(m, 1.0) for m in sig_mass])
        terms = np.where(np.isnan(terms), -np.inf, terms + lv)
        return _integral(which, terms, r, info)

    w_f = w.factors()
    psi = [_axis_table(f, grid, d, UPPER) for d, f in enumerate(w_f)]
    psi_n = [_along(t, d, n) for d, t in enumerate(psi)]
    psi_c = [_along(t[:-1], d, n) for d, t in enumerate(psi)]
    sc = dual_weight(v, e).sample(grid).values
    if which == "AMn*":
        S = prefix_sum(sc * grid.volumes)
        lv_ = _log_product((S, 1.0 / e.pp), *[(t, 1.0 / e.q) for t in psi_n])
        return _sup(which, lv_, grid)
    if which == "ATn*":
        inner = _log_product((sc, 1.0), *[(t, e.pp) for t in psi_c]) + lv
        H = _log_cumulate(inner, UPPER)
        lv_ = H / e.pp + _log_product(*[(t, -1.0 / e.qp) for t in psi_n])
        return _sup(which, np.where(np.isnan(lv_), -np.inf, lv_), grid)
    r = e.require_q_lt_p(which)
    info = _divergence_report(w_f, grid, "0")
    w_mass = [_along(f(grid.midpoints(d)), d, n) for d, f in enumerate(w_f)]
    if which == "BMRn*":
        S = prefix_sum(sc * grid.volumes)
        terms = _log_product((upper_corner(S), r / e.pp), *[(t, r / e.p) for t in psi_c], *[(m, 1.0) for m in w_mass])
    else:  # BPSn*
        inner = _log_product((sc, 1.0), *[(t, e.pp) for t in psi_c]) + lv
        H = lower_corner(_log_cumulate(inner, UPPER))
        terms = (r / e.pp) * H + _log_product(*[(t, -r / e.pp) for t in psi_c], *[(m, 1.0) for m in w_mass])
    terms = np.where(np.isnan(terms), -np.inf, terms + lv)
    return _integral(which, terms, r, info)


# ------------------------------------------------------------- zone chains


@dataclass
class ChainResult:
    name: str
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + SLACK) + 1e-300

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "margin": self.margin, "holds": self.holds}


def zone_chain(values: dict[str, float], e: Exponents) -> list[ChainResult]:
    """Chained bounds between functionals valid in the zone of ``e``."""
    out = []
    if e.zone == "p<q":
        a1 = values["A1"]
        out.append(ChainResult("A2 <= alpha(p,q)^(1/q) A1", values["A2"], alpha(e.p, e.q) ** (1.0 / e.q) * a1))
        out.append(
            ChainResult("A3 <= alpha(q',p')^(1/p') A1", values["A3"], alpha(e.qp, e.pp) ** (1.0 / e.pp) * a1)
        )
    elif e.zone == "q<p":
        b1 = values["B1"]
        if e.r_over_p_ge_1:
            out.append(ChainResult("B2 <= bbeta(p,q) B1", values["B2"], bold_beta(e.p, e.q) * b1))
        if e.r_over_qp_ge_1:
            out.append(ChainResult("B3 <= bbeta(q',p') B1", values["B3"], bold_beta(e.qp, e.pp) * b1))
    return out


# --------------------------------------------------------------- evaluate


def names_for_zone(e: Exponents) -> list[str]:
    names = list(A_NAMES)
    if e.zone == "q<p":
        names += list(B_NAMES) + list(BV_NAMES)
    return names


def evaluate(fields: Fields, names: Iterable[str] | None = None) -> dict[str, FunctionalValue]:
    e = fields.exps
    out = {}
    for name in names if names is not None else names_for_zone(e):
        if name in A_NAMES:
            out[name] = a_functional(name, fields)
        elif name in B_NAMES:
            out[name] = b_functional(name, fields)
        elif name in BV_NAMES:
            out[name] = bv_functional(name, fields)
        else:
            raise ValueError(f"{name} is not a two-weight functional of Fields; use multidim_functional")
    return out
