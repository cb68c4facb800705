"""Exponent bookkeeping, weight descriptors and the dual weight ``sigma = v^(1-p')``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .grid import CellField, GridMismatchError, GridN


class ZoneError(ValueError):
    """A quantity was requested outside the (p, q) zone where it is defined."""


@dataclass(frozen=True)
class Exponents:
    p: float
    q: float

    def __post_init__(self):
        for name in ("p", "q"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 1):
                raise ValueError(f"{name} must be a finite real > 1, got {val!r}")
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "q", float(self.q))

    @property
    def pp(self) -> float:
        """Conjugate p' = p/(p-1)."""
        return self.p / (self.p - 1.0)

    @property
    def qp(self) -> float:
        return self.q / (self.q - 1.0)

    @property
    def r(self) -> float | None:
        """1/r = 1/q - 1/p; negative for p < q, None for p == q."""
        if self.p == self.q:
            return None
        return 1.0 / (1.0 / self.q - 1.0 / self.p)

    @property
    def zone(self) -> str:
        if self.p < self.q:
            return "p<q"
        if self.p == self.q:
            return "p=q"
        return "q<p"

    def exact(self) -> tuple[Fraction, Fraction]:
        """p and q as exact decimals (``2.05`` is read as 41/20)."""
        return Fraction(repr(self.p)), Fraction(repr(self.q))

    @property
    def r_over_p_ge_1(self) -> bool | None:
        # r >= p  <=>  p <= 2q
        if self.zone != "q<p":
            return None
        p, q = self.exact()
        return p <= 2 * q

    @property
    def r_over_qp_ge_1(self) -> bool | None:
        # r >= q'  <=>  2p - q <= pq
        if self.zone != "q<p":
            return None
        p, q = self.exact()
        return 2 * p - q <= p * q

    @property
    def zone_tag(self) -> str:
        if self.zone != "q<p":
            return self.zone
        a = "r/p>=1" if self.r_over_p_ge_1 else "r/p<1"
        b = "r/q'>=1" if self.r_over_qp_ge_1 else "r/q'<1"
        return f"q<p,{a},{b}"

    def dual(self) -> "Exponents":
        """Exponents (q', p') of the adjoint inequality; r is unchanged."""
        return Exponents(self.qp, self.pp)

    def require_q_lt_p(self, what: str = "this quantity") -> float:
        if self.zone != "q<p":
            raise ZoneError(f"{what} needs q < p (got p={self.p}, q={self.q})")
        return self.r


def _dual_power(p) -> float:
    pval = p.p if isinstance(p, Exponents) else float(p)
    return 1.0 - pval / (pval - 1.0)


@dataclass(frozen=True)
class Factor1D:
    """Piecewise power ``coeffs[j] * x**exponents[j]`` on ``[breaks[j-1], breaks[j])``."""

    coeffs: tuple[float, ...]
    exponents: tuple[float, ...]
    breaks: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "exponents", tuple(float(a) for a in self.exponents))
        object.__setattr__(self, "breaks", tuple(float(b) for b in self.breaks))
        if len(self.coeffs) != len(self.exponents) or len(self.breaks) != len(self.coeffs) - 1:
            raise ValueError("a factor with k pieces needs k coeffs, k exponents and k-1 breaks")
        if any(c < 0 or not math.isfinite(c) for c in self.coeffs):
            raise ValueError("factor coefficients must be finite and nonnegative")
        if any(b <= 0 for b in self.breaks) or any(np.diff(self.breaks) <= 0):
            raise ValueError("factor breaks must be positive and strictly increasing")

    @classmethod
    def power(cls, a: float, c: float = 1.0) -> "Factor1D":
        return cls((c,), (a,))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        piece = np.searchsorted(self.breaks, x, side="right")
        c = np.asarray(self.coeffs)[piece]
        a = np.asarray(self.exponents)[piece]
        with np.errstate(divide="ignore"):
            return np.where(c == 0.0, 0.0, c * x**a)

    def raised(self, t: float) -> "Factor1D":
        if t < 0 and any(c == 0 for c in self.coeffs):
            raise ValueError("cannot raise a factor that vanishes on a piece to a negative power")
        return Factor1D(tuple(c**t for c in self.coeffs), tuple(a * t for a in self.exponents), self.breaks)

    def scaled(self, lam: float) -> "Factor1D":
        return Factor1D(tuple(lam * c for c in self.coeffs), self.exponents, self.breaks)

    def dilated(self, lam: float) -> "Factor1D":
        """``x -> f(x / lam)`` for a piecewise power."""
        coeffs = tuple(c * lam ** (-a) for c, a in zip(self.coeffs, self.exponents))
        return Factor1D(coeffs, self.exponents, tuple(lam * b for b in self.breaks))

    def integral(self, lo: float, hi: float) -> float:
        """Closed-form integral over ``[lo, hi]`` (may be inf)."""
        edges = [lo, *[b for b in self.breaks if lo < b < hi], hi]
        total = 0.0
        for a_, b_ in zip(edges[:-1], edges[1:]):
            j = int(np.searchsorted(self.breaks, a_, side="right"))
            c, e = self.coeffs[j], self.exponents[j]
            if c == 0.0:
                continue
            total += c * (_antiderivative(b_, e) - _antiderivative(a_, e))
        return total

    def to_dict(self) -> dict:
        return {"coeffs": list(self.coeffs), "exponents": list(self.exponents), "breaks": list(self.breaks)}


def _antiderivative(x: float, a: float) -> float:
    """Antiderivative of x**a, extended to x = 0 and x = inf (possibly infinite)."""
    if a == -1.0:
        if x == 0:
            return -math.inf
        return math.log(x)
    k = a + 1.0
    if x == 0:
        return 0.0 if k > 0 else -math.inf
    if math.isinf(x):
        return math.inf if k > 0 else 0.0
    return x**k / k


class Weight:
    """Base class for weight descriptors."""

    kind: str = ""
    dim: int = 0

    def sample(self, grid: GridN) -> CellField:
        raise NotImplementedError

    def _check_dim(self, grid: GridN) -> None:
        if grid.dim != self.dim:
            raise GridMismatchError(f"{self.kind} weight has dimension {self.dim}, grid has {grid.dim}")

    @property
    def factorizable(self) -> bool:
        return False


@dataclass(frozen=True)
class PowerWeight(Weight):
    """``c * x_1**a_1 * ... * x_n**a_n``."""

    c: float
    exponents: tuple[float, ...]
    kind = "power"

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(float(a) for a in self.exponents))
        if not (self.c >= 0 and math.isfinite(self.c)):
            raise ValueError("power weight needs a finite c >= 0")

    @property
    def dim(self) -> int:
        return len(self.exponents)

    @property
    def factorizable(self) -> bool:
        return True

    def factors(self) -> list[Factor1D]:
        return [Factor1D.power(a, self.c if d == 0 else 1.0) for d, a in enumerate(self.exponents)]

    def sample(self, grid: GridN) -> CellField:
        self._check_dim(grid)
        vals = np.full(grid.shape, self.c)
        for x, a in zip(grid.mesh(), self.exponents):
            if a != 0.0:
                vals = vals * x**a
        return CellField(grid, vals, nonnegative=True)

    def scaled(self, lam: float) -> "PowerWeight":
        return PowerWeight(lam * self.c, self.exponents)

    def to_dict(self) -> dict:
        return {"kind": "power", "c": self.c, "exponents": list(self.exponents)}


@dataclass(frozen=True)
class FactorizedWeight(Weight):
    factors_: tuple[Factor1D, ...]
    kind = "factorized"

    @property
    def dim(self) -> int:
        return len(self.factors_)

    @property
    def factorizable(self) -> bool:
        return True

    def factors(self) -> list[Factor1D]:
        return list(self.factors_)

    def sample(self, grid: GridN) -> CellField:
        self._check_dim(grid)
        vals = np.ones(grid.shape)
        for x, fac in zip(grid.mesh(), self.factors_):
            vals = vals * fac(x)
        return CellField(grid, vals, nonnegative=True)

    def scaled(self, lam: float) -> "FactorizedWeight":
        return FactorizedWeight((self.factors_[0].scaled(lam), *self.factors_[1:]))

    def dilated(self, lam: float) -> "FactorizedWeight":
        return FactorizedWeight(tuple(f.dilated(lam) for f in self.factors_))

    def to_dict(self) -> dict:
        return {"kind": "factorized", "factors": [f.to_dict() for f in self.factors_]}


@dataclass(frozen=True, eq=False)
class TableWeight(Weight):
    """Sampled weight; ``grid`` pins it to one grid when known."""

    values: np.ndarray
    grid: GridN | None = None
    kind = "table"

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if not np.all(np.isfinite(vals)) or (vals < 0).any():
            raise ValueError("table weights must be finite and nonnegative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_field(cls, f: CellField) -> "TableWeight":
        return cls(f.values, f.grid)

    @property
    def dim(self) -> int:
        return self.values.ndim

    def sample(self, grid: GridN) -> CellField:
        self._check_dim(grid)
        if self.grid is not None and not self.grid.same_as(grid):
            raise GridMismatchError("table weight sampled on a foreign grid")
        return CellField(grid, self.values.copy(), nonnegative=True)

    def scaled(self, lam: float) -> "TableWeight":
        return TableWeight(lam * self.values, self.grid)

    def to_dict(self) -> dict:
        return {"kind": "table", "values": self.values.tolist()}


def dual_weight(v: Weight, p) -> Weight:
    """``sigma = v^(1-p')``; ``p`` is an :class:`Exponents` or a bare exponent."""
    t = _dual_power(p)
    if isinstance(v, PowerWeight):
        if v.c == 0:
            raise ValueError("v vanishes identically; the dual weight would be infinite")
        return PowerWeight(v.c**t, tuple(a * t for a in v.exponents))
    if isinstance(v, FactorizedWeight):
        return FactorizedWeight(tuple(f.raised(t) for f in v.factors_))
    if isinstance(v, TableWeight):
        if (v.values == 0).any():
            idx = tuple(int(i) for i in np.argwhere(v.values == 0)[0])
            raise ValueError(f"v vanishes at cell {idx}; the dual weight would be infinite there")
        return TableWeight(v.values**t, v.grid)
    raise TypeError(f"unsupported weight {type(v).__name__}")


def sample(wt: Weight, grid: GridN) -> CellField:
    return wt.sample(grid)


def weight_from_dict(d: dict[str, Any]) -> Weight:
    kind = d.get("kind")
    if kind == "power":
        return PowerWeight(float(d.get("c", 1.0)), tuple(d["exponents"]))
    if kind == "factorized":
        facs = tuple(
            Factor1D(tuple(f["coeffs"]), tuple(f["exponents"]), tuple(f.get("breaks", ()))) for f in d["factors"]
        )
        return FactorizedWeight(facs)
    if kind == "table":
        return TableWeight(np.asarray(d["values"], dtype=float))
    raise ValueError(f"unknown weight kind {kind!r}")


def constant_weight(dim: int, c: float = 1.0) -> PowerWeight:
    return PowerWeight(c, (0.0,) * dim)


def power_weight(*exponents: float, c: float = 1.0) -> PowerWeight:
    return PowerWeight(c, tuple(exponents))
