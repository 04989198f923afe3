"""Batch verification harness.

Runs identity suites over seeded sample points of a catalog or file
metric and emits a deterministic certificate: a fixed-width table for
humans or JSON for machines.  Identical configuration (including the
seed) produces byte-identical JSON.

Checks whose residual is *supposed* to be large (operator compositions
on metrics where the obstruction tensor is visibly nonzero) are
classified as expected negatives at runtime: they pass when the
residual exceeds the tolerance and matches the predicted obstruction
value.
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy

from . import __version__, catalog, detour, prolong, tractor
from .connections import covector_connection, killing_connection, tractor_connection
from .dsl import MetricSyntaxError, MetricValidationError, load_metric
from .geometry import Geometry, truncate_array
from .jets import Jet

SCHEMA = "detourcert-report/1"
SUITES = ("curvature", "tractor", "detour", "prolong", "deformation")
MIN_ORDER = {"curvature": 4, "tractor": 5, "detour": 6, "prolong": 3,
             "deformation": 6}
# match tolerance for expected-negative residuals against the predicted value
OBSTRUCTION_MATCH_TOL = 1e-6
DEFAULT_BOX_HALF_WIDTH = 0.5


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    metric: str
    suites: tuple
    points: int = 3
    seed: int = 0
    tol: float = 1e-8
    jet_order: Optional[int] = None
    fmt: str = "text"

    def __post_init__(self):
        unknown = [s for s in self.suites if s not in SUITES]
        if unknown:
            raise ConfigError(f"unknown suite {unknown[0]!r}; choose from {', '.join(SUITES)}")
        if not self.suites:
            raise ConfigError("no suites selected")
        if self.points < 1:
            raise ConfigError("points must be at least 1")
        if not self.tol > 0:
            raise ConfigError("tolerance must be positive")
        need = self.required_order()
        if self.jet_order is not None and self.jet_order < need:
            table = ", ".join(f"{s}>={MIN_ORDER[s]}" for s in self.suites)
            raise ConfigError(
                f"jet order {self.jet_order} is below the minimum {need} "
                f"for the selected suites ({table})"
            )

    def required_order(self) -> int:
        return max(MIN_ORDER[s] for s in self.suites)

    def resolved_order(self) -> int:
        return self.jet_order if self.jet_order is not None else self.required_order()


@dataclass
class CheckRecord:
    check_id: str
    suite: str
    statement: str
    max_residual: float
    tolerance: float
    passed: bool
    points: int
    expected_negative: bool = False
    prediction_gap: Optional[float] = None

    def as_dict(self) -> dict:
        out = {
            "id": self.check_id,
            "suite": self.suite,
            "statement": self.statement,
            "max_residual": float(self.max_residual),
            "tolerance": float(self.tolerance),
            "passed": bool(self.passed),
            "points": int(self.points),
            "expected_negative": bool(self.expected_negative),
        }
        if self.prediction_gap is not None:
            out["prediction_gap"] = float(self.prediction_gap)
        return out


@dataclass
class Report:
    config: dict
    environment: dict
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> str:
        payload = {
            "schema": SCHEMA,
            "config": self.config,
            "environment": self.environment,
            "checks": [c.as_dict() for c in self.checks],
            "passed": self.passed,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        head = f"{'check':34s} {'suite':12s} {'residual':>12s} {'tol':>9s} {'status':>10s}"
        lines = [head, "-" * len(head)]
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            if c.expected_negative:
                status = "neg-" + status
            lines.append(
                f"{c.check_id:34s} {c.suite:12s} {c.max_residual:12.3e} "
                f"{c.tolerance:9.1e} {status:>10s}"
            )
        lines.append("-" * len(head))
        lines.append(f"metric: {self.config['metric']}   points: {self.config['points']}   "
                     f"seed: {self.config['seed']}   jet order: {self.environment['jet_order']}")
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# metric resolution and sampling


def resolve_metric(source: str):
    """Catalog name or file path -> (spec, sample box)."""
    if source in catalog.names():
        entry = catalog.get(source)
        return entry.spec(), entry.sample_box, entry
    spec = load_metric(source)
    box = ((-DEFAULT_BOX_HALF_WIDTH, DEFAULT_BOX_HALF_WIDTH),) * spec.dim
    return spec, box, None


def _rand_jet(rng, n, order, scale=1.0) -> Jet:
    size = Jet.constant(0.0, n, order).coeffs.shape[0]
    return Jet(n, order, rng.standard_normal(size) * scale)


def _rand_field(rng, n, order, scale=1.0) -> np.ndarray:
    out = np.empty(n, dtype=object)
    for a in range(n):
        out[a] = _rand_jet(rng, n, order, scale)
    return out


def _values_max(arr) -> float:
    return max(abs(j.value) for j in np.asarray(arr, dtype=object).flat)


# ---------------------------------------------------------------------------
# per-point check functions; each returns a residual, optionally with a
# (prediction_norm, prediction_gap) pair for obstruction-style checks


def _check_algebraic_bianchi(geom, rng, tol):
    n = geom.n
    rd = geom.riemann_down
    worst = 0.0
    scale = _values_max(rd)
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for d in range(n):
                    worst = max(worst, abs(
                        rd[a, b, c, d].value + rd[b, c, a, d].value + rd[c, a, b, d].value
                    ))
    return worst / max(1.0, scale)


def _check_contracted_bianchi(geom, rng, tol):
    n = geom.n
    dric = geom.covd_array(geom.ricci, ("d", "d"))
    sc = geom.scalar
    gi = truncate_array(geom.ginv, dric[0, 0, 0].order)
    worst = 0.0
    scale = _values_max(dric)
    for b in range(n):
        acc = 0.0
        for e in range(n):
            for a in range(n):
                acc += gi[e, a].value * dric[e, a, b].value
        worst = max(worst, abs(acc - 0.5 * sc.partial(b).value))
    return worst / max(1.0, scale)


def _check_weyl_trace(geom, rng, tol):
    n = geom.n
    w = geom.weyl
    gi = truncate_array(geom.ginv, w[0, 0, 0, 0].order)
    worst = 0.0
    for c in range(n):
        for d in range(n):
            t1 = sum(gi[a, b].value * w[a, c, b, d].value for a in range(n) for b in range(n))
            t2 = sum(gi[a, b].value * w[a, b, c, d].value for a in range(n) for b in range(n))
            worst = max(worst, abs(t1), abs(t2))
    return worst / max(1.0, _values_max(w))


def _check_cotton_trace(geom, rng, tol):
    n = geom.n
    cot = geom.cotton
    gi = truncate_array(geom.ginv, cot[0, 0, 0].order)
    worst = 0.0
    for c in range(n):
        t1 = sum(gi[a, b].value * cot[a, b, c].value for a in range(n) for b in range(n))
        t2 = sum(gi[a, b].value * cot[c, a, b].value for a in range(n) for b in range(n))
        worst = max(worst, abs(t1), abs(t2))
    return worst / max(1.0, _values_max(cot))


def _check_bach_shape(geom, rng, tol):
    n = geom.n
    b = geom.bach
    gi = truncate_array(geom.ginv, b[0, 0].order)
    worst = max(abs(b[i, j].value - b[j, i].value) for i in range(n) for j in range(n))
    tr = sum(gi[i, j].value * b[i, j].value for i in range(n) for j in range(n))
    return max(worst, abs(tr)) / max(1.0, _values_max(b))


def _check_tractor_metric_parallel(geom, rng, tol):
    # compatibility of the position dependent pairing: d_a h = T_a^T h + h T_a
    n = geom.n
    mats = tractor.connection_matrices(geom, 1)
    gi = truncate_array(geom.ginv, 1)
    h = np.zeros((n + 2, n + 2))
    h[0, n + 1] = h[n + 1, 0] = 1.0
    scale = 0.0
    hv = h.copy()
    for b in range(n):
        for c in range(n):
            hv[1 + b, 1 + c] = gi[b, c].value
    worst = 0.0
    for a in range(n):
        t = np.array([[mats[a][i, j].value for j in range(n + 2)]
                      for i in range(n + 2)])
        dh = np.zeros((n + 2, n + 2))
        for b in range(n):
            for c in range(n):
                dh[1 + b, 1 + c] = gi[b, c].partial(a).value
        worst = max(worst, np.max(np.abs(t.T @ hv + hv @ t - dh)))
        scale = max(scale, np.max(np.abs(t)), np.max(np.abs(dh)))
    return worst / max(1.0, scale)


def _check_splitting_commutation(geom, rng, tol):
    n = geom.n
    sigma = _rand_jet(rng, n, min(geom.order, 5))
    lhs = tractor.apply_connection(tractor.splitting(sigma, geom), geom)
    rhs = tractor.op_E(tractor.op_D(sigma, geom), geom)
    k = min(lhs.alpha[0].order, rhs.alpha[0].order)
    diff = lhs.as_matrix() - rhs.as_matrix()
    scale = max(_values_max(lhs.as_matrix()), _values_max(rhs.as_matrix()))
    return _values_max(truncate_array(diff, k)) / max(1.0, scale)


def _check_adjoint_factorization(geom, rng, tol):
    n = geom.n
    nu = np.array([[_rand_jet(rng, n, 3) for _ in range(n)] for _ in range(n)],
                  dtype=object)
    phi = tractor.TractorOneForm(_rand_field(rng, n, 3), nu, _rand_field(rng, n, 3))
    lhs = tractor.splitting_star(tractor.coupled_divergence(phi, geom), geom)
    rhs = tractor.op_D_star(tractor.op_E_star(phi, geom), geom)
    return abs(lhs.value - rhs.value) / max(1.0, abs(lhs.value), abs(rhs.value))


def _check_tractor_curvature_skew(geom, rng, tol):
    n = geom.n
    omega = tractor.tractor_curvature(geom)
    h = tractor.gram_matrix(geom)
    worst = 0.0
    scale = 0.0
    for a in range(n):
        for b in range(n):
            m = np.array([[omega[a, b][i, j].value for j in range(n + 2)]
                          for i in range(n + 2)])
            mba = np.array([[omega[b, a][i, j].value for j in range(n + 2)]
                            for i in range(n + 2)])
            worst = max(worst, np.max(np.abs(m + mba)), np.max(np.abs(m.T @ h + h @ m)))
            scale = max(scale, np.max(np.abs(m)))
    return worst / max(1.0, scale)


def _check_signature(geom, rng, tol):
    base = tuple(1 if geom.g[a, a].value > 0 else -1 for a in range(geom.n))
    p = base.count(1)
    q = base.count(-1)
    got = tractor.tractor_signature(geom)
    return 0.0 if got == (p + 1, q + 1) else 1.0


def _ym_exterior(geom, rng, tol):
    # M(d f) = + current acting on f, for a section f of the twist bundle
    conn = covector_connection(geom)
    n = geom.n
    f = _rand_field(rng, n, 4)
    lhs = detour.op_M(detour.twisted_d(detour.TwistedForm(0, f), conn), conn)
    cur = detour.ym_current(conn)
    rhs = detour.current_action(cur, f)
    k = min(lhs.comps.flat[0].order, rhs.flat[0].order)
    scale = max(_values_max(lhs.comps), _values_max(rhs))
    return _values_max(truncate_array(lhs.comps, k) - truncate_array(rhs, k)) / max(1.0, scale)


def _ym_interior(geom, rng, tol):
    conn = covector_connection(geom)
    n = geom.n
    phi = detour.TwistedForm(1, np.array(
        [[_rand_jet(rng, n, 4) for _ in range(n)] for _ in range(n)], dtype=object))
    lhs = detour.twisted_delta(detour.op_M(phi, conn), conn)
    rhs = detour.current_contraction(detour.ym_current(conn), phi, conn)
    k = min(lhs.comps.flat[0].order, rhs.flat[0].order)
    scale = max(_values_max(lhs.comps), _values_max(rhs))
    return _values_max(truncate_array(lhs.comps, k) + truncate_array(rhs, k)) / max(1.0, scale)


def _complex_composition(geom, rng, tol):
    n = geom.n
    sigma = _rand_jet(rng, n, min(geom.order, 6))
    comp = detour.op_MT(tractor.op_D(sigma, geom), geom).comps
    pred = detour.einstein_detour_expected(sigma, geom).comps
    k = min(comp.flat[0].order, pred.flat[0].order)
    residual = _values_max(comp)
    gap = _values_max(truncate_array(comp, k) - truncate_array(pred, k))
    pred_norm = _values_max(pred)
    return residual, pred_norm, gap


def _kernel_bound(geom, rng, tol, entry):
    listed = len(entry.killing_fields) if entry is not None else 0
    dim = prolong.kernel_dimension(killing_connection(geom))
    return float(max(0, listed - dim))


def _scale_kernel_bound(geom, rng, tol, entry):
    listed = 1 if entry is not None and entry.einstein_scale is not None else 0
    dim = prolong.kernel_dimension(tractor_connection(geom))
    return float(max(0, listed - dim))


def _transport_roundtrip(spec, box, rng, tol):
    p0 = np.array([rng.uniform(lo, hi) for lo, hi in box])
    p1 = p0 + 0.4 * (np.array([rng.uniform(lo, hi) for lo, hi in box]) - p0)
    v0 = rng.standard_normal(spec.dim + 2)
    fwd = prolong.transport(spec, tractor_connection, prolong.segment(p0, p1), v0,
                            rtol=1e-9, atol=1e-11, refine=False)
    back = prolong.transport(spec, tractor_connection, prolong.segment(p1, p0), fwd.end,
                             rtol=1e-9, atol=1e-11, refine=False)
    return float(np.max(np.abs(back.end - v0)))


def _gauge_linearization(geom, rng, tol):
    n = geom.n
    k = geom.order
    v = np.empty(n, dtype=object)
    for a in range(n):
        v[a] = _rand_jet(rng, n, 3, scale=0.5).padded(k)
    h = detour.op_K0(v, geom)
    bp = detour.linearized_bach(h.comps, geom)

    border = geom.order - 4
    bach = geom.bach
    db = geom.covd_array(bach, ("d", "d"))
    gam = truncate_array(geom.gamma, border - 1)
    vt = truncate_array(v, border - 1)
    divv = v[0].truncated(border).partial(0) * 0.0
    dv = np.empty((n, n), dtype=object)
    for a in range(n):
        divv = divv + v[a].truncated(border).partial(a)
        for e in range(n):
            divv = divv + gam[a, a, e] * vt[e]
        for c in range(n):
            acc = v[c].truncated(border).partial(a)
            for e in range(n):
                acc = acc + gam[c, a, e] * vt[e]
            dv[a, c] = acc.truncated(border - 1)
    worst = 0.0
    scale = 0.0
    for a in range(n):
        for b in range(n):
            acc = (2.0 / n) * divv * bach[a, b].truncated(border - 1)
            for c in range(n):
                acc = acc + vt[c] * db[c, a, b].truncated(border - 1)
                acc = acc + bach[c, b].truncated(border - 1) * dv[a, c]
                acc = acc + bach[a, c].truncated(border - 1) * dv[b, c]
            worst = max(worst, abs(bp[a, b].value - acc.value))
            scale = max(scale, abs(bp[a, b].value), abs(acc.value))
    return worst / max(1.0, scale)


# ---------------------------------------------------------------------------
# suite tables: (check id, statement, function, needs dim 4)

_CURVATURE = [
    ("algebraic-bianchi", "curvature satisfies R_[abc]d = 0", _check_algebraic_bianchi, False),
    ("contracted-bianchi", "div Ric = d(scal)/2", _check_contracted_bianchi, False),
    ("weyl-trace", "Weyl tensor is totally trace-free", _check_weyl_trace, True),
    ("cotton-trace", "Cotton tensor vanishes under both metric traces", _check_cotton_trace, False),
    ("bach-shape", "obstruction tensor is symmetric and trace-free", _check_bach_shape, True),
]

_TRACTOR = [
    ("tractor-metric-parallel", "connection coefficients are skew for the tractor metric",
     _check_tractor_metric_parallel, False),
    ("splitting-commutation",
     "connection applied to the canonical splitting equals the injected "
     "second-order operator", _check_splitting_commutation, False),
    ("adjoint-factorization",
     "divergence adjoint of the splitting factors through the form adjoints",
     _check_adjoint_factorization, False),
    ("curvature-skew", "tractor curvature is antisymmetric and metric skew",
     _check_tractor_curvature_skew, False),
    ("signature", "tractor metric signature is (p+1, q+1)", _check_signature, False),
]

_DETOUR = [
    ("ym-source-exterior", "composition with the twisted differential returns "
     "the source current", _ym_exterior, False),
    ("ym-source-interior", "twisted divergence of the operator returns minus "
     "the contracted current", _ym_interior, False),
]


def run(config: RunConfig) -> Report:
    spec, box, entry = resolve_metric(config.metric)
    order = config.resolved_order()
    if "deformation" in config.suites and spec.dim != 4:
        raise ConfigError("deformation suite requires a four dimensional metric")

    rng = np.random.default_rng(config.seed)
    points = [tuple(float(rng.uniform(lo, hi)) for lo, hi in box)
              for _ in range(config.points)]
    geoms = [Geometry(spec, pt, order=order) for pt in points]

    suites = tuple(s for s in SUITES if s in config.suites)
    report = Report(
        config={
            "metric": config.metric,
            "suites": list(suites),
            "points": config.points,
            "seed": config.seed,
            "tol": config.tol,
            "jet_order": order,
            "format": config.fmt,
        },
        environment={
            "jet_order": order,
            "seed": config.seed,
            "prng": "numpy PCG64",
            "versions": {
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "detourcert": __version__,
            },
        },
    )

    def plain(suite, table):
        for check_id, statement, fn, dim4_only in table:
            if dim4_only and spec.dim != 4:
                continue
            worst = 0.0
            for geom in geoms:
                worst = max(worst, fn(geom, rng, config.tol))
            report.checks.append(CheckRecord(
                check_id, suite, statement, worst, config.tol,
                worst <= config.tol, config.points))

    for suite in suites:
        if suite == "curvature":
            plain(suite, _CURVATURE)
        elif suite == "tractor":
            plain(suite, _TRACTOR)
        elif suite == "detour":
            plain(suite, _DETOUR)
            worst = 0.0
            pred_norm = 0.0
            gap = 0.0
            for geom in geoms:
                r, p, g = _complex_composition(geom, rng, config.tol)
                worst, pred_norm, gap = max(worst, r), max(pred_norm, p), max(gap, g)
            negative = pred_norm > 10.0 * config.tol
            if negative:
                ok = worst > config.tol and gap <= OBSTRUCTION_MATCH_TOL * max(1.0, pred_norm)
            else:
                ok = worst <= config.tol
            report.checks.append(CheckRecord(
                "complex-composition", suite,
                "translated operator composed with the splitting operator "
                "reproduces the curvature obstruction",
                worst, config.tol, ok, config.points,
                expected_negative=negative, prediction_gap=gap))
        elif suite == "prolong":
            for check_id, statement, fn in [
                ("kernel-bound",
                 "stacked obstruction kernel admits every listed Killing field",
                 _kernel_bound),
                ("scale-kernel-bound",
                 "parallel scale kernel admits the recorded Einstein scale",
                 _scale_kernel_bound),
            ]:
                worst = 0.0
                for geom in geoms:
                    worst = max(worst, fn(geom, rng, config.tol, entry))
                report.checks.append(CheckRecord(
                    check_id, suite, statement, worst, config.tol,
                    worst <= config.tol, config.points))
            worst = 0.0
            for _ in range(config.points):
                worst = max(worst, _transport_roundtrip(spec, box, rng, config.tol))
            report.checks.append(CheckRecord(
                "transport-roundtrip", suite,
                "forward and reverse parallel transport return the fiber",
                worst, config.tol, worst <= config.tol, config.points))
        elif suite == "deformation":
            worst = 0.0
            for geom in geoms:
                worst = max(worst, _gauge_linearization(geom, rng, config.tol))
            report.checks.append(CheckRecord(
                "gauge-linearization", suite,
                "linearized obstruction along gauge directions equals the "
                "transported obstruction",
                worst, config.tol, worst <= config.tol, config.points))
    return report


# ---------------------------------------------------------------------------
# entry point


def _cmd_verify(args) -> int:
    suites = tuple(SUITES) if args.suite == "all" else tuple(
        s.strip() for s in args.suite.split(",") if s.strip())
    try:
        config = RunConfig(args.metric, suites, points=args.points, seed=args.seed,
                           tol=args.tol, jet_order=args.jet_order, fmt=args.fmt)
        report = run(config)
    except (ConfigError, MetricSyntaxError, MetricValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = report.to_json() if config.fmt == "json" else report.to_text()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if report.passed else 1


def _cmd_catalog(args) -> int:
    if args.subcommand == "list":
        head = f"{'name':18s} {'dim':>3s} {'signature':12s} facts"
        print(head)
        print("-" * len(head))
        for entry in catalog.entries():
            spec = entry.spec()
            sig = "".join("+" if s > 0 else "-" for s in spec.signature)
            facts = " ".join(f"{k}={'y' if v else 'n'}" for k, v in entry.facts.items())
            print(f"{entry.name:18s} {spec.dim:3d} {sig:12s} {facts}")
        return 0
    if args.subcommand == "export":
        try:
            entry = catalog.get(args.name)
        except KeyError as exc:
            print(f"error: {exc.args[0]}", file=sys.stderr)
            return 2
        if args.path == "-":
            sys.stdout.write(entry.text)
        else:
            with open(args.path, "w") as fh:
                fh.write(entry.text)
        return 0
    return 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="detourcert",
        description="Pointwise verification of conformal tractor operators "
                    "and detour complexes on explicit metrics.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run identity suites on a metric")
    v.add_argument("--metric", required=True,
                   help="catalog name or path to a metric file")
    v.add_argument("--suite", default="all",
                   help="comma separated subset of: " + ", ".join(SUITES))
    v.add_argument("--points", type=int, default=3)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=float, default=1e-8)
    v.add_argument("--jet-order", type=int, default=None, dest="jet_order")
    v.add_argument("--format", choices=("text", "json"), default="text", dest="fmt")
    v.add_argument("--out", default=None)
    v.set_defaults(fn=_cmd_verify)

    c = sub.add_parser("catalog", help="inspect built-in metrics")
    csub = c.add_subparsers(dest="subcommand", required=True)
    csub.add_parser("list", help="list catalog entries and facts")
    e = csub.add_parser("export", help="write a catalog metric to a file")
    e.add_argument("name")
    e.add_argument("path", help="output path, or - for stdout")
    c.set_defaults(fn=_cmd_catalog)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
