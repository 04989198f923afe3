"""Detour operators: twisted de Rham pieces and their compositions.

For a bundle-with-connection this module builds the twisted exterior
derivative and codifferential on form degrees 0..2 and the second-order
detour operator

    M = delta d - F#          with  (F# phi)_b = g^{ac} F_ba phi_c,

whose compositions with d and delta collapse to zeroth-order actions of
the Yang-Mills current delta F:

    M(d f)      = (delta F) f,
    delta(M phi) = -<delta F, phi>.

Translating M through the injector E and its adjoint yields the
second-order operator on trace-free symmetric tensors whose composition
with the Einstein operator D is the zeroth-order Bach/Cotton action;
that composition is the engine behind the "detour complex" checks.

The deformation side: the conformal Killing operator K0 and a linearized
Bach operator obtained by differentiating the full nonlinear curvature
chain along a metric perturbation with one extra jet variable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tractor as tractor_mod
from .connections import Connection, covd_endomorphism, covd_section, curvature, matmul
from .geometry import Geometry, JetTensor, jet_array, truncate_array
from .jets import Jet


@dataclass
class TwistedForm:
    """V-valued p-form; comps shape (n,)*degree + (rank,), antisymmetric."""

    degree: int
    comps: np.ndarray

    @property
    def order(self) -> int:
        return self.comps.flat[0].order

    @property
    def rank(self) -> int:
        return self.comps.shape[-1]

    def values(self) -> np.ndarray:
        out = np.empty(self.comps.shape)
        for idx in np.ndindex(*self.comps.shape):
            out[idx] = self.comps[idx].value
        return out


def twisted_d(phi: TwistedForm, conn: Connection) -> TwistedForm:
    """Coupled exterior derivative on degrees 0 and 1."""
    n = conn.n
    dphi = covd_section(conn, phi.comps)
    if phi.degree == 0:
        return TwistedForm(1, dphi)
    if phi.degree == 1:
        out = np.empty((n, n) + phi.comps.shape[-1:], dtype=object)
        for a in range(n):
            for b in range(n):
                for i in range(phi.rank):
                    out[a, b, i] = dphi[a, b, i] - dphi[b, a, i]
        return TwistedForm(2, out)
    raise ValueError(f"twisted_d not implemented for degree {phi.degree}")


def twisted_delta(phi: TwistedForm, conn: Connection) -> TwistedForm:
    """Coupled codifferential, minus the g-trace of the coupled derivative."""
    if phi.degree == 0:
        raise ValueError("codifferential of a 0-form")
    n = conn.n
    dphi = covd_section(conn, phi.comps)
    k = dphi.flat[0].order
    gl = truncate_array(conn.geom.ginv, k)
    shape = phi.comps.shape[1:]
    out = np.empty(shape, dtype=object)
    for idx in np.ndindex(*shape):
        acc = conn.geom.zero(k)
        for e in range(n):
            for a in range(n):
                acc = acc - gl[e, a] * dphi[(e, a) + idx]
        out[idx] = acc
    return TwistedForm(phi.degree - 1, out)


def f_action(phi: TwistedForm, conn: Connection, f_mats: np.ndarray | None = None) -> TwistedForm:
    """(F# phi)_b = g^{ac} F_ba phi_c on twisted 1-forms."""
    if phi.degree != 1:
        raise ValueError("F# acts on 1-forms here")
    n, r = conn.n, conn.rank
    F = curvature(conn) if f_mats is None else f_mats
    k = min(phi.order, F.flat[0].order)
    gl = truncate_array(conn.geom.ginv, k)
    low = truncate_array(phi.comps, k)
    Fl = truncate_array(F, k)
    out = np.empty((n, r), dtype=object)
    for b in range(n):
        for i in range(r):
            acc = conn.geom.zero(k)
            for a in range(n):
                for c in range(n):
                    for j in range(r):
                        acc = acc + gl[a, c] * Fl[b, a][i, j] * low[c, j]
            out[b, i] = acc
    return TwistedForm(1, out)


def op_M(phi: TwistedForm, conn: Connection, f_mats: np.ndarray | None = None) -> TwistedForm:
    """Second-order detour operator delta d - F# on twisted 1-forms."""
    dd = twisted_delta(twisted_d(phi, conn), conn)
    fa = f_action(phi, conn, f_mats)
    k = min(dd.order, fa.order)
    return TwistedForm(1, truncate_array(dd.comps, k) - truncate_array(fa.comps, k))


def ym_current(conn: Connection) -> np.ndarray:
    """delta F: (delta F)_b = -g^{ea} (nabla_e F)_ab, End(V)-valued."""
    n, r = conn.n, conn.rank
    F = curvature(conn)
    dF = covd_endomorphism(conn, F)
    k = dF[0, 0, 0, 0, 0].order
    gl = truncate_array(conn.geom.ginv, k)
    out = np.empty((n, r, r), dtype=object)
    for b in range(n):
        m = np.empty((r, r), dtype=object)
        m[...] = conn.geom.zero(k)
        for e in range(n):
            for a in range(n):
                m = m + gl[e, a] * (-1.0) * dF[e, a, b]
        out[b] = m
    return out


def current_action(current: np.ndarray, section: np.ndarray) -> np.ndarray:
    """epsilon(delta F) f: pair an End-valued 1-form with a section."""
    n, r = current.shape[0], current.shape[1]
    k = min(current[0][0, 0].order, section[0].order)
    low = truncate_array(section, k)
    out = np.empty((n, r), dtype=object)
    for b in range(n):
        cm = truncate_array(current[b], k)
        for i in range(r):
            acc = cm[i, 0] * low[0]
            for j in range(1, r):
                acc = acc + cm[i, j] * low[j]
            out[b, i] = acc
    return out


def current_contraction(current: np.ndarray, phi: TwistedForm, conn: Connection) -> np.ndarray:
    """iota(delta F) phi = g^{ab} (delta F)_a phi_b, a section of V."""
    n, r = conn.n, conn.rank
    k = min(current[0][0, 0].order, phi.order)
    gl = truncate_array(conn.geom.ginv, k)
    low = truncate_array(phi.comps, k)
    out = np.empty(r, dtype=object)
    for i in range(r):
        acc = conn.geom.zero(k)
        for a in range(n):
            cm = truncate_array(current[a], k)
            for b in range(n):
                for j in range(r):
                    acc = acc + gl[a, b] * cm[i, j] * low[b, j]
        out[i] = acc
    return out


# ---------------------------------------------------------------------------
# translation to trace-free symmetric tensors


def tractor_form(phi: tractor_mod.TractorOneForm) -> TwistedForm:
    return TwistedForm(1, phi.as_matrix())


def form_to_tractor(phi: TwistedForm) -> tractor_mod.TractorOneForm:
    return tractor_mod.TractorOneForm.from_matrix(phi.comps)


def op_MT(psi: JetTensor, geom: Geometry, conn: Connection | None = None,
          f_mats: np.ndarray | None = None) -> JetTensor:
    """E* M E: the detour operator translated to trace-free symmetric tensors."""
    from .connections import tractor_connection

    if conn is None:
        conn = tractor_connection(geom)
    injected = tractor_mod.op_E(psi, geom)
    m_out = op_M(tractor_form(injected), conn, f_mats)
    return tractor_mod.op_E_star(form_to_tractor(m_out), geom)


def einstein_detour_expected(sigma: Jet, geom: Geometry) -> JetTensor:
    """Zeroth-order action TFS(-B_ab sigma + (n-4) A_acb nabla^c sigma).

    This is what M^T composed with the Einstein operator D must produce;
    the Cotton slot order matters only away from dimension four.
    """
    n = geom.n
    geom.require(5, "detour composition")
    k = geom.order - 5
    A = truncate_array(geom.cotton, k)
    B = truncate_array(geom.bach, k)
    gl = truncate_array(geom.ginv, k)
    sig = sigma.truncated(k)
    grad = truncate_array(
        np.array([sigma.partial(c) for c in range(n)], dtype=object), k
    )
    comps = np.empty((n, n), dtype=object)
    for a in range(n):
        for b in range(n):
            acc = -(B[a, b] * sig)
            for c in range(n):
                for d in range(n):
                    acc = acc + (n - 4.0) * A[a, c, b] * gl[c, d] * grad[d]
            comps[a, b] = acc
    return JetTensor(("d", "d"), tractor_mod.trace_free_symmetric(comps, geom))


# ---------------------------------------------------------------------------
# deformation complex pieces


def op_K0(v_up: np.ndarray, geom: Geometry) -> JetTensor:
    """Conformal Killing operator: trace-free part of the Lie derivative of g."""
    n = geom.n
    k = v_up.flat[0].order - 1
    g = truncate_array(geom.g, k)
    v_low = np.empty(n, dtype=object)
    for a in range(n):
        acc = geom.zero(v_up.flat[0].order)
        for b in range(n):
            acc = acc + geom.g[a, b].truncated(v_up.flat[0].order) * v_up[b]
        v_low[a] = acc
    dv = geom.covd_array(v_low, ("d",))
    comps = np.empty((n, n), dtype=object)
    for a in range(n):
        for b in range(n):
            comps[a, b] = dv[a, b] + dv[b, a]
    return JetTensor(("d", "d"), tractor_mod.trace_free(comps, geom), weight=0.0)


def op_K0_star(psi: JetTensor, geom: Geometry) -> np.ndarray:
    """Adjoint of K0 on trace-free symmetric inputs: -2 nabla^b psi_ab."""
    comps = psi.comps if isinstance(psi, JetTensor) else psi
    n = geom.n
    k = comps.flat[0].order - 1
    dpsi = geom.covd_array(comps, ("d", "d"))
    gl = truncate_array(geom.ginv, k)
    out = np.empty(n, dtype=object)
    for a in range(n):
        acc = geom.zero(k)
        for b in range(n):
            for c in range(n):
                acc = acc - 2.0 * gl[b, c] * dpsi[c, a, b]
        out[a] = acc
    return out


def perturbed_geometry(geom: Geometry, h: np.ndarray) -> Geometry:
    """Geometry of g + eps h with eps a fresh jet variable (slot jet_dim)."""
    n = geom.n
    k = min(geom.order, h.flat[0].order + 1)
    eps = Jet.variable(0.0, geom.jet_dim, geom.jet_dim + 1, k)
    comps = np.empty((n, n), dtype=object)
    for a in range(n):
        for b in range(n):
            base = geom.g[a, b].truncated(k).extended(1)
            bump = h[a, b].truncated(k - 1).padded(k).extended(1)
            comps[a, b] = base + eps * bump
    return Geometry(metric_jets=comps, dim=n, order=k, point=geom.point)


def linearized_bach(h: np.ndarray, geom: Geometry) -> np.ndarray:
    """Derivative of the Bach tensor along the metric perturbation h."""
    pg = perturbed_geometry(geom, h)
    n = geom.n
    out = np.empty((n, n), dtype=object)
    for a in range(n):
        for b in range(n):
            out[a, b] = pg.bach[a, b].linear_part(geom.jet_dim)
    return out
