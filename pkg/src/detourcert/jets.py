"""Exact truncated Taylor (jet) arithmetic in several variables.

A jet of order K in d variables stores every Taylor coefficient
f_alpha = (d^alpha f / alpha!) evaluated at a base point, for all
multi-indices with |alpha| <= K, in a dense float vector laid out in graded
lexicographic order.  Arithmetic is exact truncated power-series arithmetic:
the order-K coefficients of a product depend only on inputs of order <= K, so
no truncation error beyond float rounding is ever introduced.  Jets are
treated as immutable; every operation returns a fresh instance.

Derivatives are recovered by unscaling: d^alpha f = alpha! * f_alpha.
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np


class SingularPointError(ArithmeticError):
    """Raised when an operation hits a genuine singularity at the base point."""


# ---------------------------------------------------------------------------
# multi-index bookkeeping, cached per (dim, order)


def _gen_indices(dim: int, degree: int):
    if dim == 1:
        yield (degree,)
        return
    for first in range(degree + 1):
        for rest in _gen_indices(dim - 1, degree - first):
            yield (first,) + rest


@lru_cache(maxsize=None)
def multi_indices(dim: int, order: int) -> tuple:
    """All exponent tuples with |alpha| <= order, graded lexicographic.

    The ordering is degree-major, so the multi-indices of a lower order form
    a prefix: truncating a jet is a coefficient-vector slice.
    """
    if dim < 1 or order < 0:
        raise ValueError(f"bad jet shape dim={dim} order={order}")
    out = []
    for deg in range(order + 1):
        out.extend(_gen_indices(dim, deg))
    return tuple(out)


@lru_cache(maxsize=None)
def _rank(dim: int, order: int) -> dict:
    return {alpha: i for i, alpha in enumerate(multi_indices(dim, order))}


@lru_cache(maxsize=None)
def _size(dim: int, order: int) -> int:
    return len(multi_indices(dim, order))


@lru_cache(maxsize=None)
def _mul_table(dim: int, order: int):
    """Gather tables (ia, ib, ic) with alpha_ia + alpha_ib = alpha_ic."""
    idx = multi_indices(dim, order)
    rank = _rank(dim, order)
    ia, ib, ic = [], [], []
    for i, a in enumerate(idx):
        da = sum(a)
        for j, b in enumerate(idx):
            if da + sum(b) > order:
                continue
            ia.append(i)
            ib.append(j)
            ic.append(rank[tuple(x + y for x, y in zip(a, b))])
    return (
        np.asarray(ia, dtype=np.intp),
        np.asarray(ib, dtype=np.intp),
        np.asarray(ic, dtype=np.intp),
    )


@lru_cache(maxsize=None)
def _partial_table(dim: int, order: int, slot: int):
    """Source ranks and multipliers mapping coeffs(K) -> coeffs of d/dx_slot (K-1)."""
    rank = _rank(dim, order)
    src, mul = [], []
    for beta in multi_indices(dim, order - 1):
        up = list(beta)
        up[slot] += 1
        src.append(rank[tuple(up)])
        mul.append(beta[slot] + 1.0)
    return np.asarray(src, dtype=np.intp), np.asarray(mul)


@lru_cache(maxsize=None)
def _extend_table(dim: int, order: int, extra: int):
    """Ranks in the (dim+extra) context of each alpha padded with zeros."""
    rank_big = _rank(dim + extra, order)
    pad = (0,) * extra
    return np.asarray(
        [rank_big[alpha + pad] for alpha in multi_indices(dim, order)], dtype=np.intp
    )


# ---------------------------------------------------------------------------


class Jet:
    """Immutable truncated Taylor expansion at a point."""

    __slots__ = ("dim", "order", "coeffs")

    def __init__(self, dim: int, order: int, coeffs: np.ndarray):
        self.dim = dim
        self.order = order
        if coeffs.shape != (_size(dim, order),):
            raise ValueError("coefficient vector has wrong length")
        coeffs.flags.writeable = False
        self.coeffs = coeffs

    # -- constructors ------------------------------------------------------

    @staticmethod
    def constant(value: float, dim: int, order: int) -> "Jet":
        c = np.zeros(_size(dim, order))
        c[0] = value
        return Jet(dim, order, c)

    @staticmethod
    def variable(value: float, slot: int, dim: int, order: int) -> "Jet":
        if not 0 <= slot < dim:
            raise ValueError(f"variable slot {slot} out of range for dim {dim}")
        c = np.zeros(_size(dim, order))
        c[0] = value
        if order >= 1:
            unit = tuple(1 if i == slot else 0 for i in range(dim))
            c[_rank(dim, order)[unit]] = 1.0
        return Jet(dim, order, c)

    # -- basic queries -----------------------------------------------------

    @property
    def value(self) -> float:
        """Constant term: the function value at the base point."""
        return float(self.coeffs[0])

    def coeff(self, alpha) -> float:
        """Taylor coefficient for the exponent tuple alpha."""
        alpha = tuple(int(a) for a in alpha)
        r = _rank(self.dim, self.order).get(alpha)
        if r is None:
            raise ValueError(f"multi-index {alpha} outside jet of order {self.order}")
        return float(self.coeffs[r])

    def derivative(self, alpha) -> float:
        """Partial derivative d^alpha at the base point (factorial unscaled)."""
        alpha = tuple(int(a) for a in alpha)
        fac = 1.0
        for a in alpha:
            fac *= math.factorial(a)
        return self.coeff(alpha) * fac

    def __repr__(self):
        return f"Jet(dim={self.dim}, order={self.order}, value={self.value!r})"

    # -- structural operations ----------------------------------------------

    def truncated(self, order: int) -> "Jet":
        if order > self.order or order < 0:
            raise ValueError(f"cannot truncate order {self.order} jet to {order}")
        if order == self.order:
            return self
        return Jet(self.dim, order, self.coeffs[: _size(self.dim, order)].copy())

    def padded(self, order: int) -> "Jet":
        """Zero-fill up to a higher order.

        The filled coefficients are not the true Taylor coefficients; callers
        must ensure downstream arithmetic provably never consumes them (as
        when the result is immediately multiplied by a first-order factor of
        a fresh variable).
        """
        if order < self.order:
            raise ValueError("padded() cannot lower the order")
        c = np.zeros(_size(self.dim, order))
        c[: self.coeffs.size] = self.coeffs
        return Jet(self.dim, order, c)

    def partial(self, slot: int) -> "Jet":
        """Jet of the partial derivative along one variable; order drops by 1."""
        if not 0 <= slot < self.dim:
            raise ValueError(f"slot {slot} out of range")
        if self.order < 1:
            raise ValueError("cannot differentiate an order-0 jet")
        src, mul = _partial_table(self.dim, self.order, slot)
        return Jet(self.dim, self.order - 1, self.coeffs[src] * mul)

    def extended(self, extra: int) -> "Jet":
        """Same germ viewed in dim+extra variables; new slots are passive."""
        if extra < 0:
            raise ValueError("extra must be nonnegative")
        if extra == 0:
            return self
        c = np.zeros(_size(self.dim + extra, self.order))
        c[_extend_table(self.dim, self.order, extra)] = self.coeffs
        return Jet(self.dim + extra, self.order, c)

    def linear_part(self, slot: int) -> "Jet":
        """Coefficient of the first power of one variable, as a jet without it.

        For f = g + eps*h + O(eps^2) with eps the given slot, returns the jet
        of h in the remaining variables at order K-1.
        """
        if self.dim < 2:
            raise ValueError("linear_part needs at least two variables")
        if not 0 <= slot < self.dim:
            raise ValueError(f"slot {slot} out of range")
        small_dim, small_order = self.dim - 1, self.order - 1
        rank = _rank(self.dim, self.order)
        out = np.zeros(_size(small_dim, small_order))
        for i, beta in enumerate(multi_indices(small_dim, small_order)):
            alpha = beta[:slot] + (1,) + beta[slot:]
            out[i] = self.coeffs[rank[alpha]]
        return Jet(small_dim, small_order, out)

    # -- ring arithmetic -----------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.dim != self.dim or other.order != self.order:
                raise ValueError(
                    f"jet shape mismatch: ({self.dim},{self.order}) vs "
                    f"({other.dim},{other.order})"
                )
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Jet.constant(float(other), self.dim, self.order)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Jet(self.dim, self.order, self.coeffs + o.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Jet(self.dim, self.order, self.coeffs - o.coeffs)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Jet(self.dim, self.order, o.coeffs - self.coeffs)

    def __neg__(self):
        return Jet(self.dim, self.order, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Jet(self.dim, self.order, self.coeffs * float(other))
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        ia, ib, ic = _mul_table(self.dim, self.order)
        prod = np.bincount(ic, weights=self.coeffs[ia] * o.coeffs[ib], minlength=self.coeffs.size)
        return Jet(self.dim, self.order, prod)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            if float(other) == 0.0:
                raise SingularPointError("division by zero")
            return Jet(self.dim, self.order, self.coeffs / float(other))
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * _reciprocal(o)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * _reciprocal(self)

    def __pow__(self, expo):
        if isinstance(expo, Jet):
            return NotImplemented
        e = float(expo)
        if e.is_integer():
            n = int(e)
            if n == 0:
                return Jet.constant(1.0, self.dim, self.order)
            base = self if n > 0 else _reciprocal(self)
            out = base
            for _ in range(abs(n) - 1):
                out = out * base
            return out
        if self.value <= 0.0:
            raise ValueError(f"fractional power of nonpositive value {self.value}")
        if e == 0.5:
            return sqrt(self)
        return exp(log(self) * e)


# public constructor aliases

constant = Jet.constant
variable = Jet.variable


def from_coeffs(coeffs, dim: int, order: int) -> Jet:
    """Build a jet from a mapping {alpha: coeff} or a flat coefficient list."""
    if isinstance(coeffs, Mapping):
        c = np.zeros(_size(dim, order))
        rank = _rank(dim, order)
        for alpha, v in coeffs.items():
            c[rank[tuple(alpha)]] = float(v)
        return Jet(dim, order, c)
    arr = np.asarray(coeffs, dtype=float).copy()
    return Jet(dim, order, arr)


def coordinates(point: Iterable[float], order: int, dim: int | None = None) -> list:
    """Variable jets for every coordinate of a base point."""
    pt = [float(x) for x in point]
    d = dim if dim is not None else len(pt)
    return [Jet.variable(x, k, d, order) for k, x in enumerate(pt)]


# ---------------------------------------------------------------------------
# analytic functions via Horner composition with univariate Taylor tables


def _compose(a: Jet, table: np.ndarray) -> Jet:
    """Evaluate sum_k table[k] * (a - a0)^k; exact since a - a0 is nilpotent."""
    t = a - a.value
    out = Jet.constant(float(table[a.order]), a.dim, a.order)
    for k in range(a.order - 1, -1, -1):
        out = out * t + float(table[k])
    return out


def _reciprocal(a: Jet) -> Jet:
    a0 = a.value
    if a0 == 0.0:
        raise SingularPointError("division by a jet with zero constant term")
    k = np.arange(a.order + 1)
    table = (-1.0) ** k / a0 ** (k + 1)
    return _compose(a, table)


def _dispatch(name, jet_fn, float_fn):
    def wrapper(x):
        if isinstance(x, Jet):
            return jet_fn(x)
        return float_fn(x)

    wrapper.__name__ = name
    return wrapper


def _exp_jet(a: Jet) -> Jet:
    e0 = math.exp(a.value)
    table = np.array([e0 / math.factorial(k) for k in range(a.order + 1)])
    return _compose(a, table)


def _log_jet(a: Jet) -> Jet:
    a0 = a.value
    if a0 <= 0.0:
        raise ValueError(f"log of nonpositive value {a0}")
    table = np.empty(a.order + 1)
    table[0] = math.log(a0)
    for k in range(1, a.order + 1):
        table[k] = (-1.0) ** (k + 1) / (k * a0**k)
    return _compose(a, table)


def _sqrt_jet(a: Jet) -> Jet:
    a0 = a.value
    if a0 <= 0.0:
        raise ValueError(f"sqrt of nonpositive value {a0}")
    table = np.empty(a.order + 1)
    coef = 1.0
    for k in range(a.order + 1):
        table[k] = coef * a0 ** (0.5 - k)
        coef *= (0.5 - k) / (k + 1.0)
    return _compose(a, table)


def _sin_jet(a: Jet) -> Jet:
    s, c = math.sin(a.value), math.cos(a.value)
    cycle = [s, c, -s, -c]
    table = np.array([cycle[k % 4] / math.factorial(k) for k in range(a.order + 1)])
    return _compose(a, table)


def _cos_jet(a: Jet) -> Jet:
    s, c = math.sin(a.value), math.cos(a.value)
    cycle = [c, -s, -c, s]
    table = np.array([cycle[k % 4] / math.factorial(k) for k in range(a.order + 1)])
    return _compose(a, table)


def _sinh_jet(a: Jet) -> Jet:
    s, c = math.sinh(a.value), math.cosh(a.value)
    table = np.array([(s if k % 2 == 0 else c) / math.factorial(k) for k in range(a.order + 1)])
    return _compose(a, table)


def _cosh_jet(a: Jet) -> Jet:
    s, c = math.sinh(a.value), math.cosh(a.value)
    table = np.array([(c if k % 2 == 0 else s) / math.factorial(k) for k in range(a.order + 1)])
    return _compose(a, table)


exp = _dispatch("exp", _exp_jet, math.exp)
log = _dispatch("log", _log_jet, math.log)
sqrt = _dispatch("sqrt", _sqrt_jet, math.sqrt)
sin = _dispatch("sin", _sin_jet, math.sin)
cos = _dispatch("cos", _cos_jet, math.cos)
sinh = _dispatch("sinh", _sinh_jet, math.sinh)
cosh = _dispatch("cosh", _cosh_jet, math.cosh)


def tan(x):
    if isinstance(x, Jet):
        return _sin_jet(x) / _cos_jet(x)
    return math.tan(x)


FUNCTIONS = {
    "sin": sin,
    "cos": cos,
    "tan": tan,
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
    "sinh": sinh,
    "cosh": cosh,
}
