"""Pointwise Riemannian engine over jet arithmetic.

A Geometry object fixes a metric, a base point and a jet order K, then lazily
computes jets of the Levi-Civita data and the curvature chain.  Conventions,
used consistently everywhere downstream:

* curvature sign:   [nabla_a, nabla_b] v^c = R_ab^c_d v^d,
  so R_ab^c_d = d_a Gam^c_bd - d_b Gam^c_ad + Gam^c_ae Gam^e_bd - Gam^c_be Gam^e_ad
* Ricci:            Ric_bd = R_ab^a_d   (positive on round spheres)
* trace adjustment: J = Sc / (2(n-1)),  Schouten P = (Ric - J g) / (n-2)
* Weyl:             C_abcd = R_abcd - (g_ca P_bd - g_cb P_ad + g_db P_ac - g_da P_bc)
* Cotton:           A_abc = nabla_b P_ca - nabla_c P_ba
* Bach:             B_ab = nabla^c A_acb + P^dc C_dacb

Jet orders decay along the chain: the metric carries order K, Christoffel
K-1, curvature K-2, Cotton K-3, Bach K-4.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import dsl, jets
from .jets import Jet, SingularPointError


class SingularMetricError(SingularPointError):
    """Metric is numerically degenerate at the base point."""


class CurvatureConsistencyError(RuntimeError):
    """An internal identity of the curvature pack failed its tolerance."""


@dataclass
class JetTensor:
    """Tensor with jet components at a point; variance is 'u'/'d' per slot."""

    variances: tuple
    comps: np.ndarray
    weight: float = 0.0  # conformal weight annotation; not enforced

    def __post_init__(self):
        self.variances = tuple(self.variances)
        if self.comps.ndim != len(self.variances):
            raise ValueError("variance list does not match component rank")

    @property
    def order(self) -> int:
        return self.comps.flat[0].order

    @property
    def dim(self) -> int:
        return self.comps.flat[0].dim

    def values(self) -> np.ndarray:
        out = np.empty(self.comps.shape)
        for idx in np.ndindex(self.comps.shape):
            out[idx] = self.comps[idx].value
        return out

    def truncated(self, order: int) -> "JetTensor":
        return JetTensor(self.variances, truncate_array(self.comps, order), self.weight)


def jet_array(shape, dim: int, order: int) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    zero = Jet.constant(0.0, dim, order)
    out[...] = zero
    return out


def truncate_array(arr: np.ndarray, order: int) -> np.ndarray:
    out = np.empty(arr.shape, dtype=object)
    for idx in np.ndindex(arr.shape):
        out[idx] = arr[idx].truncated(order)
    return out


def value_array(arr: np.ndarray) -> np.ndarray:
    out = np.empty(arr.shape)
    for idx in np.ndindex(arr.shape):
        out[idx] = arr[idx].value
    return out


def max_coeff(arr) -> float:
    """Largest |coefficient| across an object array of jets."""
    worst = 0.0
    for j in np.asarray(arr, dtype=object).flat:
        worst = max(worst, float(np.max(np.abs(j.coeffs))))
    return worst


def invert_jet_matrix(g: np.ndarray, pivot_floor: float = 1e-12) -> np.ndarray:
    """Gauss-Jordan inverse of a square object matrix of jets."""
    n = g.shape[0]
    a = [[g[i, j] for j in range(n)] for i in range(n)]
    sample = g[0, 0]
    eye = [
        [Jet.constant(1.0 if i == j else 0.0, sample.dim, sample.order) for j in range(n)]
        for i in range(n)
    ]
    scale = max(1.0, max(abs(g[i, j].value) for i in range(n) for j in range(n)))
    for col in range(n):
        pivot_row = max(range(col, n), key=lambda r: abs(a[r][col].value))
        if abs(a[pivot_row][col].value) < pivot_floor * scale:
            raise SingularMetricError(f"metric is singular (pivot {col})")
        a[col], a[pivot_row] = a[pivot_row], a[col]
        eye[col], eye[pivot_row] = eye[pivot_row], eye[col]
        inv_piv = 1.0 / a[col][col]
        a[col] = [x * inv_piv for x in a[col]]
        eye[col] = [x * inv_piv for x in eye[col]]
        for r in range(n):
            if r == col:
                continue
            f = a[r][col]
            if np.all(f.coeffs == 0.0):
                continue
            a[r] = [x - f * y for x, y in zip(a[r], a[col])]
            eye[r] = [x - f * y for x, y in zip(eye[r], eye[col])]
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            out[i, j] = eye[i][j]
    return out


class Geometry:
    """Cached jets of the curvature chain for one metric at one point.

    The jets may carry more variables than the manifold has coordinates
    (extra passive parameters); geometric derivatives only ever touch the
    first n slots.
    """

    def __init__(self, spec=None, point=None, order: int = 4, *, metric_jets=None, dim=None):
        if order is None or int(order) < 0:
            raise ValueError(f"bad jet order {order!r}")
        self.order = int(order)
        self.spec = spec
        if metric_jets is None:
            if spec is None:
                raise ValueError("need a metric spec or explicit metric jets")
            if point is None or len(point) != spec.dim:
                raise ValueError(f"point must have {spec.dim} coordinates")
            self.point = tuple(float(x) for x in point)
            self.n = spec.dim
            self.g = spec.metric_jets(self.point, self.order)
        else:
            self.n = int(dim if dim is not None else metric_jets.shape[0])
            self.point = None if point is None else tuple(float(x) for x in point)
            self.g = metric_jets
        if self.n < 3:
            raise ValueError("the engine supports dimension >= 3")
        self.jet_dim = self.g[0, 0].dim
        self.ginv  # eager inverse so a degenerate metric fails fast

    # -- helpers -------------------------------------------------------------

    def zero(self, order: int) -> Jet:
        return Jet.constant(0.0, self.jet_dim, order)

    def require(self, order_needed: int, what: str):
        if self.order < order_needed:
            raise ValueError(
                f"{what} needs metric jet order >= {order_needed}, geometry has {self.order}"
            )

    def _partials(self, arr: np.ndarray) -> np.ndarray:
        """d_a applied to every entry; new axis in front runs over coordinates."""
        out = np.empty((self.n,) + arr.shape, dtype=object)
        for a in range(self.n):
            for idx in np.ndindex(arr.shape):
                out[(a,) + idx] = arr[idx].partial(a)
        return out

    # -- curvature chain ------------------------------------------------------

    @cached_property
    def ginv(self) -> np.ndarray:
        return invert_jet_matrix(self.g)

    @cached_property
    def gamma(self) -> np.ndarray:
        """Gamma[c, a, b] = Gam^c_ab at order K-1."""
        self.require(1, "christoffel")
        n, k = self.n, self.order - 1
        dg = self._partials(self.g)
        gl = truncate_array(self.ginv, k)
        out = np.empty((n, n, n), dtype=object)
        for c in range(n):
            for a in range(n):
                for b in range(a, n):
                    acc = self.zero(k)
                    for d in range(n):
                        acc = acc + gl[c, d] * (dg[a, d, b] + dg[b, d, a] - dg[d, a, b])
                    out[c, a, b] = out[c, b, a] = acc * 0.5
        return out

    @cached_property
    def riemann(self) -> np.ndarray:
        """R[a, b, c, d] = R_ab^c_d at order K-2."""
        self.require(2, "curvature")
        n, k = self.n, self.order - 2
        gam = self.gamma
        dgam = self._partials(gam)
        gl = truncate_array(gam, k)
        out = np.empty((n, n, n, n), dtype=object)
        for a in range(n):
            for b in range(n):
                if b < a:
                    for c in range(n):
                        for d in range(n):
                            out[a, b, c, d] = -out[b, a, c, d]
                    continue
                for c in range(n):
                    for d in range(n):
                        if a == b:
                            out[a, b, c, d] = self.zero(k)
                            continue
                        acc = dgam[a, c, b, d] - dgam[b, c, a, d]
                        for e in range(n):
                            acc = acc + gl[c, a, e] * gl[e, b, d] - gl[c, b, e] * gl[e, a, d]
                        out[a, b, c, d] = acc
        return out

    @cached_property
    def riemann_down(self) -> np.ndarray:
        n, k = self.n, self.order - 2
        g = truncate_array(self.g, k)
        rie = self.riemann
        out = np.empty((n, n, n, n), dtype=object)
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    for d in range(n):
                        acc = self.zero(k)
                        for e in range(n):
                            acc = acc + g[c, e] * rie[a, b, e, d]
                        out[a, b, c, d] = acc
        return out

    @cached_property
    def ricci(self) -> np.ndarray:
        n = self.n
        rie = self.riemann
        out = np.empty((n, n), dtype=object)
        for b in range(n):
            for d in range(n):
                acc = self.zero(self.order - 2)
                for a in range(n):
                    acc = acc + rie[a, b, a, d]
                out[b, d] = acc
        return out

    @cached_property
    def scalar(self) -> Jet:
        k = self.order - 2
        gl = truncate_array(self.ginv, k)
        acc = self.zero(k)
        for b in range(self.n):
            for d in range(self.n):
                acc = acc + gl[b, d] * self.ricci[b, d]
        return acc

    @cached_property
    def jtrace(self) -> Jet:
        return self.scalar / (2.0 * (self.n - 1))

    @cached_property
    def schouten(self) -> np.ndarray:
        n, k = self.n, self.order - 2
        g = truncate_array(self.g, k)
        j = self.jtrace
        out = np.empty((n, n), dtype=object)
        for a in range(n):
            for b in range(n):
                out[a, b] = (self.ricci[a, b] - j * g[a, b]) / float(n - 2)
        return out

    @cached_property
    def schouten_up(self) -> np.ndarray:
        """P with both indices raised, order K-2."""
        n, k = self.n, self.order - 2
        gl = truncate_array(self.ginv, k)
        out = np.empty((n, n), dtype=object)
        for a in range(n):
            for b in range(n):
                acc = self.zero(k)
                for i in range(n):
                    for j in range(n):
                        acc = acc + gl[a, i] * gl[b, j] * self.schouten[i, j]
                out[a, b] = acc
        return out

    @cached_property
    def weyl(self) -> np.ndarray:
        """C[a, b, c, d] all indices down, order K-2."""
        n, k = self.n, self.order - 2
        g = truncate_array(self.g, k)
        P = self.schouten
        out = np.empty((n, n, n, n), dtype=object)
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    for d in range(n):
                        wedge = (
                            g[c, a] * P[b, d] - g[c, b] * P[a, d]
                            + g[d, b] * P[a, c] - g[d, a] * P[b, c]
                        )
                        out[a, b, c, d] = self.riemann_down[a, b, c, d] - wedge
        return out

    @cached_property
    def cotton(self) -> np.ndarray:
        """A[a, b, c] = A_abc = nabla_b P_ca - nabla_c P_ba, order K-3."""
        self.require(3, "cotton")
        dP = self.covd_array(self.schouten, ("d", "d"))
        n = self.n
        out = np.empty((n, n, n), dtype=object)
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    out[a, b, c] = dP[b, c, a] - dP[c, b, a]
        return out

    @cached_property
    def bach(self) -> np.ndarray:
        """B[a, b], order K-4."""
        self.require(4, "bach")
        n, k = self.n, self.order - 4
        dA = self.covd_array(self.cotton, ("d", "d", "d"))
        gl = truncate_array(self.ginv, k)
        pup = truncate_array(self.schouten_up, k)
        weyl = truncate_array(self.weyl, k)
        out = np.empty((n, n), dtype=object)
        for a in range(n):
            for b in range(n):
                acc = self.zero(k)
                for c in range(n):
                    for e in range(n):
                        acc = acc + gl[c, e] * dA[e, a, c, b]
                for d in range(n):
                    for c in range(n):
                        acc = acc + pup[d, c] * weyl[d, a, c, b]
                out[a, b] = acc
        return out

    # -- coupled derivative ----------------------------------------------------

    def covd_array(self, comps: np.ndarray, variances: tuple) -> np.ndarray:
        """Covariant derivative; new 'd' slot first, jet order drops by one."""
        order_in = comps.flat[0].order if comps.size else self.order
        out_order = order_in - 1
        if out_order < 0:
            raise ValueError("cannot differentiate order-0 jets")
        self.require(out_order + 1, "covariant derivative")
        n = self.n
        gam = truncate_array(self.gamma, out_order)
        low = truncate_array(comps, out_order)
        out = np.empty((n,) + comps.shape, dtype=object)
        for idx in np.ndindex(comps.shape):
            for a in range(n):
                val = comps[idx].partial(a)
                for s, var in enumerate(variances):
                    i_s = idx[s]
                    for m in range(n):
                        swapped = idx[:s] + (m,) + idx[s + 1 :]
                        if var == "u":
                            val = val + gam[i_s, a, m] * low[swapped]
                        else:
                            val = val - gam[m, a, i_s] * low[swapped]
                out[(a,) + idx] = val
        return out


# ---------------------------------------------------------------------------
# public operations


def christoffel(spec, point, order: int) -> JetTensor:
    geom = Geometry(spec, point, order)
    return JetTensor(("u", "d", "d"), geom.gamma)


def covariant_derivative(t: JetTensor, geom: Geometry) -> JetTensor:
    return JetTensor(("d",) + t.variances, geom.covd_array(t.comps, t.variances), t.weight)


@dataclass
class CurvaturePack:
    """Float values of the curvature chain at one point, with jets kept around."""

    point: tuple
    n: int
    riemann: np.ndarray  # R_ab^c_d
    riemann_down: np.ndarray
    ricci: np.ndarray
    scalar: float
    jtrace: float
    schouten: np.ndarray
    weyl: np.ndarray
    cotton: np.ndarray
    bach: np.ndarray
    residuals: dict = field(default_factory=dict)
    geometry: Geometry = None


def _pack_checks(pack: CurvaturePack, geom: Geometry):
    n = pack.n
    rd = pack.riemann_down
    scale = 1.0 + float(np.max(np.abs(rd)))
    res = pack.residuals
    res["riemann-antisym-front"] = float(np.max(np.abs(rd + rd.transpose(1, 0, 2, 3))))
    res["riemann-antisym-back"] = float(np.max(np.abs(rd + rd.transpose(0, 1, 3, 2))))
    res["riemann-pair-symmetry"] = float(np.max(np.abs(rd - rd.transpose(2, 3, 0, 1))))
    res["first-bianchi"] = float(
        np.max(np.abs(rd + rd.transpose(1, 2, 0, 3) + rd.transpose(2, 0, 1, 3)))
    )
    res["ricci-symmetry"] = float(np.max(np.abs(pack.ricci - pack.ricci.T)))
    ginv = value_array(geom.ginv)
    res["weyl-trace"] = max(
        float(np.max(np.abs(np.einsum("ac,abcd->bd", ginv, pack.weyl)))),
        float(np.max(np.abs(np.einsum("bd,abcd->ac", ginv, pack.weyl)))),
    )
    res["cotton-trace"] = float(np.max(np.abs(np.einsum("ab,abc->c", ginv, pack.cotton))))
    res["metric-compatibility"] = max_coeff(
        geom.covd_array(truncate_array(geom.g, 1), ("d", "d"))
    )
    for name, tol in list(res.items()):
        if res[name] > 1e-10 * scale:
            raise CurvatureConsistencyError(f"{name} residual {res[name]:.3e}")
    res["bach-symmetry"] = float(np.max(np.abs(pack.bach - pack.bach.T)))
    res["bach-trace"] = abs(float(np.einsum("ab,ab->", ginv, pack.bach)))
    if res["bach-symmetry"] > 1e-9 * scale or res["bach-trace"] > 1e-9 * scale:
        raise CurvatureConsistencyError("bach symmetry/trace residual too large")


def curvature_pack(spec, point, order: int = 4, checks: bool = True) -> CurvaturePack:
    """Evaluate the whole curvature chain at a point; order must be >= 4."""
    if order < 4:
        raise ValueError("curvature pack needs jet order >= 4 (bach takes 4 derivatives)")
    geom = Geometry(spec, point, order)
    pack = CurvaturePack(
        point=tuple(float(x) for x in point),
        n=geom.n,
        riemann=value_array(geom.riemann),
        riemann_down=value_array(geom.riemann_down),
        ricci=value_array(geom.ricci),
        scalar=geom.scalar.value,
        jtrace=geom.jtrace.value,
        schouten=value_array(geom.schouten),
        weyl=value_array(geom.weyl),
        cotton=value_array(geom.cotton),
        bach=value_array(geom.bach),
        geometry=geom,
    )
    if checks:
        _pack_checks(pack, geom)
    return pack


def conformal_rescale(spec, omega) -> "dsl.MetricSpec":
    """New spec with components exp(2*omega) * g_ij; omega in the same coords."""
    if isinstance(omega, str):
        omega = dsl.parse_expression(omega)
    stray = dsl.variables(omega) - set(spec.coords) - {"pi"}
    if stray:
        raise dsl.MetricValidationError(f"rescale factor uses unknown name {sorted(stray)[0]!r}")
    factor = dsl.Call("exp", dsl.Bin("*", dsl.Num(2.0), omega))
    comps = {key: dsl.Bin("*", factor, ast) for key, ast in spec.components.items()}
    return dsl.MetricSpec(
        spec.dim, spec.signature, spec.coords, comps, label=spec.label + "_rescaled"
    )


def projective_change(gamma: JetTensor, upsilon: JetTensor) -> JetTensor:
    """Gam^c_ab -> Gam^c_ab + delta^c_a Ups_b + delta^c_b Ups_a."""
    if gamma.variances != ("u", "d", "d") or upsilon.variances != ("d",):
        raise ValueError("projective change expects christoffel ('u','d','d') and a 1-form")
    k = min(gamma.order, upsilon.order)
    gam = truncate_array(gamma.comps, k)
    ups = truncate_array(upsilon.comps, k)
    n = gam.shape[0]
    out = np.empty((n, n, n), dtype=object)
    for c in range(n):
        for a in range(n):
            for b in range(n):
                val = gam[c, a, b]
                if c == a:
                    val = val + ups[b]
                if c == b:
                    val = val + ups[a]
                out[c, a, b] = val
    return JetTensor(("u", "d", "d"), out)
