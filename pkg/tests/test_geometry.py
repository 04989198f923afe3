"""Riemannian engine oracles.

Frozen expectations used here come from textbook closed forms derived by
hand, independent of the module under test: constant-curvature model spaces
(R_abcd = k(g_ac g_bd - g_ad g_bc)), round-sphere Christoffel symbols,
Ricci-flatness of the vacuum black-hole metric together with its Kretschmann
scalar 48 m^2 / r^6, and the Ricci commutator identity.
"""
from __future__ import annotations

import math

import numpy as np
import pytest

from detourcert import jets
from detourcert.dsl import parse_expression, parse_metric_text
from detourcert.geometry import (
    Geometry,
    JetTensor,
    SingularMetricError,
    christoffel,
    conformal_rescale,
    covariant_derivative,
    curvature_pack,
    projective_change,
)

FLAT4 = parse_metric_text(
    'dimension = 4\nsignature = "++++"\ncoords = x1 x2 x3 x4\n'
    'g[1][1] = "1"\ng[2][2] = "1"\ng[3][3] = "1"\ng[4][4] = "1"\n',
    label="flat4",
)

SPHERE3 = parse_metric_text(
    'dimension = 3\nsignature = "+++"\ncoords = p1 p2 p3\n'
    'g[1][1] = "1"\ng[2][2] = "sin(p1)^2"\ng[3][3] = "sin(p1)^2 * sin(p2)^2"\n',
    label="sphere3",
)

SPHERE4 = parse_metric_text(
    'dimension = 4\nsignature = "++++"\ncoords = p1 p2 p3 p4\n'
    'g[1][1] = "1"\ng[2][2] = "sin(p1)^2"\ng[3][3] = "sin(p1)^2 * sin(p2)^2"\n'
    'g[4][4] = "sin(p1)^2 * sin(p2)^2 * sin(p3)^2"\n',
    label="sphere4",
)

HYPERBOLIC4 = parse_metric_text(
    'dimension = 4\nsignature = "++++"\ncoords = x y z w\n'
    'g[1][1] = "1/w^2"\ng[2][2] = "1/w^2"\ng[3][3] = "1/w^2"\ng[4][4] = "1/w^2"\n',
    label="hyperbolic4",
)

SCHWARZSCHILD = parse_metric_text(
    'dimension = 4\nsignature = "-+++"\ncoords = t r th ph\n'
    'g[1][1] = "-(1 - 2/r)"\ng[2][2] = "1/(1 - 2/r)"\ng[3][3] = "r^2"\n'
    'g[4][4] = "r^2 * sin(th)^2"\n',
    label="schwarzschild",
)

BUMP4 = parse_metric_text(
    'dimension = 4\nsignature = "++++"\ncoords = x1 x2 x3 x4\n'
    'g[1][1] = "1 + 0.05 * x2^2 * x3^2"\n'
    'g[2][2] = "1 + 0.05 * x3^2 * x4^2"\n'
    'g[3][3] = "1 + 0.05 * x1^2 * x4^2"\n'
    'g[4][4] = "1 + 0.05 * x1^2 * x2^2"\n'
    'g[1][2] = "0.05 * x3 * x4"\ng[3][4] = "0.05 * x1 * x2 * x3"\n',
    label="bump4",
)

P_SPHERE4 = (0.8, 1.1, 0.9, 2.0)
P_HYP = (0.2, -0.3, 0.5, 1.3)
P_SCHW = (0.0, 5.0, 1.2, 0.3)
P_BUMP = (0.3, -0.4, 0.25, 0.5)


def maxabs(arr) -> float:
    return float(np.max(np.abs(np.asarray(arr, dtype=float))))


def pack_values(spec, point, order=4):
    return curvature_pack(spec, point, order)


# ---------------------------------------------------------------------------


def test_flat_metric_is_inert():
    geom = Geometry(FLAT4, (0.1, 0.2, -0.3, 0.4), order=4)
    assert maxabs([j.coeffs for j in geom.gamma.flat]) == 0.0
    pack = pack_values(FLAT4, (0.1, 0.2, -0.3, 0.4))
    assert maxabs(pack.riemann) == 0.0
    assert pack.scalar == 0.0
    assert maxabs(pack.bach) == 0.0


def test_sphere3_christoffel_frozen_values():
    # round 3-sphere at p1 = pi/3: Gamma^1_22 = -sin cos = -sqrt(3)/4,
    # Gamma^2_12 = cot(pi/3) = 1/sqrt(3)
    gam = christoffel(SPHERE3, (math.pi / 3, 1.0, 0.5), order=3)
    assert gam.variances == ("u", "d", "d")
    vals = gam.values()
    assert vals[0, 1, 1] == pytest.approx(-math.sqrt(3) / 4, abs=1e-13)
    assert vals[1, 0, 1] == pytest.approx(1 / math.sqrt(3), abs=1e-13)
    assert vals[1, 1, 0] == pytest.approx(1 / math.sqrt(3), abs=1e-13)
    assert vals[0, 0, 0] == 0.0


def constant_curvature_residual(pack, g, k):
    n = g.shape[0]
    want = np.zeros((n, n, n, n))
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for d in range(n):
                    want[a, b, c, d] = k * (g[a, c] * g[b, d] - g[a, d] * g[b, c])
    # storage is R_ab^c_d lowered to R_abcd with the pair (ab) first
    return maxabs(pack.riemann_down - want.transpose(0, 1, 2, 3))


def test_unit_sphere4_curvature():
    g = SPHERE4.metric_values(P_SPHERE4)
    pack = pack_values(SPHERE4, P_SPHERE4)
    assert constant_curvature_residual(pack, g, 1.0) < 1e-10
    assert maxabs(pack.ricci - 3.0 * g) < 1e-10
    assert pack.scalar == pytest.approx(12.0, abs=1e-10)
    assert pack.jtrace == pytest.approx(2.0, abs=1e-11)
    assert maxabs(pack.schouten - 0.5 * g) < 1e-11
    assert maxabs(pack.weyl) < 1e-10
    assert maxabs(pack.cotton) < 1e-10
    assert maxabs(pack.bach) < 1e-9


def test_hyperbolic4_flips_every_sign():
    g = HYPERBOLIC4.metric_values(P_HYP)
    pack = pack_values(HYPERBOLIC4, P_HYP)
    assert constant_curvature_residual(pack, g, -1.0) < 1e-10
    assert maxabs(pack.ricci + 3.0 * g) < 1e-10
    assert pack.scalar == pytest.approx(-12.0, abs=1e-9)
    assert pack.jtrace == pytest.approx(-2.0, abs=1e-10)
    assert maxabs(pack.schouten + 0.5 * g) < 1e-10
    assert maxabs(pack.weyl) < 1e-9
    assert maxabs(pack.bach) < 1e-9


def test_schwarzschild_vacuum_and_kretschmann():
    pack = pack_values(SCHWARZSCHILD, P_SCHW)
    assert maxabs(pack.ricci) < 1e-11
    assert abs(pack.scalar) < 1e-11
    assert maxabs(pack.schouten) < 1e-11
    assert maxabs(pack.cotton) < 1e-10
    assert maxabs(pack.weyl) > 1e-3  # genuinely curved
    # Kretschmann scalar 48 m^2 / r^6 with m = 1, r = 5
    ginv = np.linalg.inv(SCHWARZSCHILD.metric_values(P_SCHW))
    rd = pack.riemann_down
    k = np.einsum("abcd,ai,bj,ck,dl,ijkl->", rd, ginv, ginv, ginv, ginv, rd)
    assert k == pytest.approx(48.0 / 5.0**6, rel=1e-9)
    assert maxabs(pack.bach) < 1e-9


def test_pack_invariants_on_generic_metric():
    pack = pack_values(BUMP4, P_BUMP, order=4)
    n = 4
    rd = pack.riemann_down
    assert maxabs(rd + rd.transpose(1, 0, 2, 3)) < 1e-10
    assert maxabs(rd + rd.transpose(0, 1, 3, 2)) < 1e-10
    assert maxabs(rd - rd.transpose(2, 3, 0, 1)) < 1e-10
    # first Bianchi
    bianchi = rd + np.transpose(rd, (1, 2, 0, 3)) + np.transpose(rd, (2, 0, 1, 3))
    assert maxabs(bianchi) < 1e-10
    g = BUMP4.metric_values(P_BUMP)
    ginv = np.linalg.inv(g)
    # decomposition of the curvature into weyl + schouten wedge
    want = np.zeros((n, n, n, n))
    P = pack.schouten
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for d in range(n):
                    want[a, b, c, d] = (
                        g[c, a] * P[b, d] - g[c, b] * P[a, d]
                        + g[d, b] * P[a, c] - g[d, a] * P[b, c]
                    )
    assert maxabs(rd - pack.weyl - want) < 1e-10
    # weyl is trace-free on every index pair
    assert maxabs(np.einsum("ac,abcd->bd", ginv, pack.weyl)) < 1e-10
    assert maxabs(np.einsum("bd,abcd->ac", ginv, pack.weyl)) < 1e-10
    assert maxabs(np.einsum("ab,abcd->cd", ginv, pack.weyl)) < 1e-12
    # cotton antisymmetry and trace conditions
    A = pack.cotton
    assert maxabs(A + A.transpose(0, 2, 1)) < 1e-12
    assert maxabs(np.einsum("ab,abc->c", ginv, A)) < 1e-10
    # bach symmetric trace-free
    B = pack.bach
    assert maxabs(B - B.T) < 1e-9
    assert abs(np.einsum("ab,ab->", ginv, B)) < 1e-9
    assert maxabs(B) > 1e-4  # the bump really bends it


def test_ricci_identity_on_random_vector():
    rng = np.random.default_rng(3)
    order = 4
    geom = Geometry(BUMP4, P_BUMP, order=order)
    n = 4
    comps = np.empty(n, dtype=object)
    for i in range(n):
        comps[i] = jets.from_coeffs(
            {a: rng.uniform(-1, 1) for a in jets.multi_indices(n, order)}, n, order
        )
    v = JetTensor(("u",), comps)
    ddv = covariant_derivative(covariant_derivative(v, geom), geom)
    rie = geom.riemann  # R_ab^c_d jets
    worst = 0.0
    for a in range(n):
        for b in range(n):
            for c in range(n):
                comm = ddv.comps[a, b, c] - ddv.comps[b, a, c]
                expect = jets.constant(0.0, n, comm.order)
                for d in range(n):
                    expect = expect + rie[a, b, c, d].truncated(comm.order) * v.comps[d].truncated(comm.order)
                worst = max(worst, np.max(np.abs((comm - expect).coeffs)))
    assert worst < 1e-10


def test_metric_compatibility_and_torsion_free():
    geom = Geometry(BUMP4, P_BUMP, order=3)
    gt = JetTensor(("d", "d"), geom.g)
    nabla_g = covariant_derivative(gt, geom)
    assert max(np.max(np.abs(j.coeffs)) for j in nabla_g.comps.flat) < 1e-12
    f = jets.from_coeffs(
        {a: 0.3 for a in jets.multi_indices(4, 3)}, 4, 3
    )
    hess = covariant_derivative(
        covariant_derivative(JetTensor((), np.asarray(f, dtype=object)), geom), geom
    )
    asym = [
        np.max(np.abs((hess.comps[a, b] - hess.comps[b, a]).coeffs))
        for a in range(4)
        for b in range(4)
    ]
    assert max(asym) < 1e-12


def test_covariant_derivative_leibniz():
    rng = np.random.default_rng(11)
    order = 3
    geom = Geometry(SPHERE4, P_SPHERE4, order=order)
    n = 4
    f = jets.from_coeffs({a: rng.uniform(-1, 1) for a in jets.multi_indices(n, order)}, n, order)
    vc = np.empty(n, dtype=object)
    for i in range(n):
        vc[i] = jets.from_coeffs({a: rng.uniform(-1, 1) for a in jets.multi_indices(n, order)}, n, order)
    v = JetTensor(("u",), vc)
    fv = JetTensor(("u",), np.array([f * vc[i] for i in range(n)], dtype=object))
    lhs = covariant_derivative(fv, geom)
    dv = covariant_derivative(v, geom)
    worst = 0.0
    for a in range(n):
        for c in range(n):
            rhs = f.partial(a) * vc[c].truncated(order - 1) + f.truncated(order - 1) * dv.comps[a, c]
            worst = max(worst, np.max(np.abs((lhs.comps[a, c] - rhs).coeffs)))
    assert worst < 1e-11


def test_conformal_rescale_weyl_law():
    omega = parse_expression("0.1 * (t + r/10) - 0.05 * th")
    rescaled = conformal_rescale(SCHWARZSCHILD, omega)
    w = 0.1 * (P_SCHW[0] + P_SCHW[1] / 10) - 0.05 * P_SCHW[2]
    g_hat = rescaled.metric_values(P_SCHW)
    assert np.allclose(g_hat, math.exp(2 * w) * SCHWARZSCHILD.metric_values(P_SCHW), rtol=1e-13)
    pack = pack_values(SCHWARZSCHILD, P_SCHW)
    pack_hat = pack_values(rescaled, P_SCHW)
    assert maxabs(pack_hat.weyl - math.exp(2 * w) * pack.weyl) < 1e-8
    # scale survives a round trip through text
    again = parse_metric_text(rescaled.to_text(), label=rescaled.label)
    assert np.allclose(again.metric_values(P_SCHW), g_hat, rtol=1e-13)


def test_conformal_rescale_rejects_stray_names():
    with pytest.raises(Exception):
        conformal_rescale(SCHWARZSCHILD, parse_expression("q + r"))


def test_projective_change_keeps_rays():
    rng = np.random.default_rng(5)
    order = 3
    geom = Geometry(BUMP4, P_BUMP, order=order)
    ups = np.array(
        [jets.from_coeffs({a: rng.uniform(-1, 1) for a in jets.multi_indices(4, order - 1)}, 4, order - 1) for _ in range(4)],
        dtype=object,
    )
    gam2 = projective_change(christoffel(BUMP4, P_BUMP, order), JetTensor(("d",), ups))
    assert gam2.variances == ("u", "d", "d")
    vals = gam2.values()
    assert maxabs(vals - vals.transpose(0, 2, 1)) < 1e-13
    # acceleration of any straight ray stays parallel to the ray
    v = rng.uniform(-1, 1, 4)
    uv = np.array([u.value for u in ups])
    accel = np.einsum("cab,a,b->c", vals, v, v)
    base = np.einsum("cab,a,b->c", christoffel(BUMP4, P_BUMP, order).values(), v, v)
    extra = accel - base
    assert maxabs(np.cross(extra[:3], v[:3])) < 1e-12 or maxabs(extra - (2 * uv @ v) * v) < 1e-12


def test_singular_metric_raises():
    degenerate = parse_metric_text(
        'dimension = 3\nsignature = "+++"\ncoords = x y z\n'
        'g[1][1] = "1"\ng[2][2] = "x"\ng[3][3] = "1"\n'
    )
    with pytest.raises(SingularMetricError):
        Geometry(degenerate, (0.0, 0.0, 0.0), order=2)


def test_geometry_rejects_bad_order_and_point():
    with pytest.raises(ValueError):
        Geometry(SPHERE4, P_SPHERE4, order=-1)
    with pytest.raises(ValueError):
        Geometry(SPHERE4, (0.1, 0.2), order=3)
    with pytest.raises(ValueError):
        curvature_pack(SPHERE4, P_SPHERE4, order=3)  # bach needs 4 derivatives
