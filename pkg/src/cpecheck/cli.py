"""Batch driver: run selected checks against a case, emit reports, set exit codes.

Usage:

    verify --case sphere3 --checks all --order 32 --out report.json
    verify --checks lemma31 --n 3..8 --samples 1000000 --seed 7
    verify list

Exit codes: 0 when every selected check passes or is not applicable,
1 on any failure, 2 on configuration errors (unknown checks, malformed
manifests). Environment variables with the CPECHECK_ prefix override
defaults for CI (CPECHECK_ORDER, CPECHECK_SAMPLES, CPECHECK_SEED,
CPECHECK_JOBS, CPECHECK_TOLERANCE_SCALE, CPECHECK_FORMAT, CPECHECK_OUT).
"""

from __future__ import annotations

import argparse
import fnmatch
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import catalog, cpe, identities as idn, tensors as tn
from . import geometry as geo
from .curvature import (
    bianchi_residuals,
    commutator_residual,
    evaluate_bundle,
    weyl_residual,
)
from .errors import ManifestError

ENV_PREFIX = "CPECHECK_"
GROUPS = ("curvature", "matrix", "lemma31")
POINTWISE_SAMPLES = 200


@dataclass
class RunConfig:
    case: str | None
    checks: list
    order: int
    samples: int
    seed: int
    out: str | None
    fmt: str
    jobs: int
    tolerance_scale: float
    lemma_range: tuple


def _env(name: str, cast, default):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError:
        return default


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="verify", description="run CPE identity verification checks")
    p.add_argument("--case", help="catalog case name or path to a manifest JSON")
    p.add_argument("--checks", default="all",
                   help="comma list of check ids/globs: identity ids, "
                        "'curvature', 'matrix', 'lemma31', 'all'")
    p.add_argument("--order", type=int, default=_env("ORDER", int, 32),
                   help="quadrature order per axis (4..128)")
    p.add_argument("--samples", type=int, default=_env("SAMPLES", int, 100_000),
                   help="Monte Carlo sample count for matrix/lemma31 sweeps")
    p.add_argument("--seed", type=int, default=_env("SEED", int, 0))
    p.add_argument("--out", default=_env("OUT", str, None),
                   help="report file path (atomic write); stdout when absent")
    p.add_argument("--format", dest="fmt", default=_env("FORMAT", str, "json"),
                   choices=["json", "csv-summary"])
    p.add_argument("--jobs", type=int,
                   default=_env("JOBS", int, os.cpu_count() or 1))
    p.add_argument("--tolerance-scale", dest="tolerance_scale", type=float,
                   default=_env("TOLERANCE_SCALE", float, 1.0),
                   help="multiply every tolerance by this factor")
    p.add_argument("--n", dest="lemma_range", default="3..8",
                   help="dimension range n_lo..n_hi for the lemma31 sweep")
    return p


def _parse_range(text: str) -> tuple:
    lo, _, hi = text.partition("..")
    try:
        lo_i = int(lo)
        hi_i = int(hi) if hi else lo_i
    except ValueError as exc:
        raise ManifestError(f"--n expects lo..hi, got {text!r}") from exc
    if not 3 <= lo_i <= hi_i <= 8:
        raise ManifestError("--n range must sit inside 3..8")
    return lo_i, hi_i


def expand_checks(spec: str) -> list:
    """Glob expansion against the known check ids; unknown patterns reject."""
    wanted: list = []
    for raw in spec.split(","):
        pat = raw.strip()
        if not pat:
            continue
        if pat == "all":
            wanted.extend(idn.IDENTITY_IDS)
            wanted.extend(GROUPS)
            continue
        if pat in GROUPS:
            wanted.append(pat)
            continue
        hits = fnmatch.filter(idn.IDENTITY_IDS, pat)
        if not hits and pat in ("prop21",):
            hits = [i for i in idn.IDENTITY_IDS if i.startswith("prop21:")]
        if not hits:
            raise ManifestError(f"unknown check id or pattern {pat!r}")
        wanted.extend(hits)
    seen = set()
    out = []
    for c in wanted:
        if c not in seen:
            seen.add(c)
            out.append(c)
    return out


# ---------------------------------------------------------------------------
# check blocks


def _block(check: str, kind: str, verdict: str, value: float, tolerance: float,
           **extra) -> dict:
    b = {"check": check, "kind": kind, "verdict": verdict,
         "value": value, "tolerance": tolerance}
    b.update(extra)
    return b


def _verdict(ok: bool) -> str:
    return "pass" if ok else "fail"


def matrix_blocks(samples: int, seed: int, ts: float) -> list:
    rng = np.random.default_rng(seed)
    blocks = []

    t = tn.sample_traceless(rng, max(samples // 10, 1000), 3)
    r4, r5, r6 = tn.trace_identity_residuals(t)
    nrm = np.sqrt(np.einsum("bij,bij->b", t, t))
    worst = max(
        float(np.max(np.abs(r4) / (1 + nrm) ** 4)),
        float(np.max(np.abs(r5) / (1 + nrm) ** 5)),
        float(np.max(np.abs(r6) / (1 + nrm) ** 6)),
    )
    tol = 1e-10 * ts
    blocks.append(_block("matrix:trace_identities3", "matrix",
                         _verdict(worst <= tol), worst, tol,
                         samples=int(t.shape[0])))

    ts310 = tn.sample_traceless(rng, samples, 3)
    vs = rng.standard_normal((samples, 3))
    margins = tn.contraction_margins(ts310, vs)
    tol = 1e-9 * ts
    blocks.append(_block("matrix:contraction_bound", "matrix",
                         _verdict(float(margins.min()) >= -tol),
                         float(margins.min()), tol, samples=samples))

    margins = tn.signed_triple_margins(rng, samples)
    blocks.append(_block("matrix:contraction_bound_signed", "matrix",
                         _verdict(float(margins.min()) >= -tol),
                         float(margins.min()), tol, samples=samples))

    worst = 0.0
    for n in (2, 3, 4, 6):
        a = rng.standard_normal((50, n, n))
        a = 0.5 * (a + np.swapaxes(a, 1, 2))
        s = [tn.sym(m) for m in a]
        for m in s:
            once = tn.traceless_part(m)
            twice = tn.traceless_part(once)
            scale = 1.0 + m.norm()
            worst = max(worst,
                        float(np.max(np.abs(twice.entries - once.entries))) / scale,
                        abs(once.trace()) / scale)
    tol = 1e-12 * ts
    blocks.append(_block("matrix:traceless_projection", "matrix",
                         _verdict(worst <= tol), worst, tol))

    worst = 0.0
    for n in (2, 3, 4, 6):
        for _ in range(25):
            s = tn.sym(rng.standard_normal((n, n)))
            w = tn.eigenvalues(s).values
            q = tn.random_rotation(rng, n)
            conj = tn.sym(q @ s.entries @ q.T)
            for p in range(1, 9):
                a = tn.trace_power(s, p)
                b = float(np.sum(w**p))
                c = tn.trace_power(conj, p)
                scale = 1.0 + abs(a)
                worst = max(worst, abs(a - b) / scale, abs(a - c) / scale)
    tol = 1e-11 * ts
    blocks.append(_block("matrix:trace_power_oracle", "matrix",
                         _verdict(worst <= tol), worst, tol))
    return blocks


def lemma31_blocks(samples: int, seed: int, n_range: tuple, ts: float) -> list:
    rng = np.random.default_rng(seed)
    blocks = []
    for n in range(n_range[0], n_range[1] + 1):
        a = tn.sample_zero_sum(rng, samples, n)
        margins = tn.cubic_bound_margins(a)
        false_equality = int(np.sum(tn.cluster_equality_mask(a)))
        gap = 0.0
        for sign in (-1, 1):
            for scale in (1.0, 3.0):
                v = tn.cube_sum_extremal(n, sign=sign, scale=scale)
                s2 = float(np.sum(v**2))
                gap = max(gap, abs(
                    tn.cube_sum_bound_constant(n) * s2**1.5 - abs(float(np.sum(v**3)))))
        ok = (float(margins.min()) >= -1e-9 * ts and gap <= 1e-12 * ts
              and false_equality == 0)
        blocks.append(_block(
            f"lemma31:n{n}", "lemma31", _verdict(ok),
            float(margins.min()), 1e-9 * ts,
            extremal_gap=gap, false_equality_hits=false_equality,
            bound_constant=tn.cube_sum_bound_constant(n), samples=samples))
    n3 = tn.cube_sum_bound_constant(3)
    blocks.append(_block("lemma31:constant", "lemma31",
                         _verdict(abs(n3 - 1 / np.sqrt(6)) <= 1e-15),
                         n3, 1e-15))
    return blocks


def curvature_blocks(t: cpe.CPETriple, meas: idn.CaseMeasurements | None,
                     order: int, seed: int, ts: float) -> list:
    blocks = []
    m = t.manifold
    x = geo.sample_points(m, POINTWISE_SAMPLES, seed=seed)
    b = evaluate_bundle(m, x, potential=t.potential, f_order=3)

    res = commutator_residual(b)
    tol = 1e-8 * ts
    blocks.append(_block("curvature:ricci_identity", "curvature",
                         _verdict(float(np.max(np.abs(res))) <= tol),
                         float(np.max(np.abs(res))), tol))

    full, traceless = bianchi_residuals(b)
    worst = max(float(np.max(np.abs(full))), float(np.max(np.abs(traceless))))
    blocks.append(_block("curvature:contracted_bianchi", "curvature",
                         _verdict(worst <= tol), worst, tol))

    scale = 1.0 + float(np.max(np.abs(b.riem4)))
    sym_res = max(
        float(np.max(np.abs(b.riem4 + np.einsum("pjikl->pijkl", b.riem4)))),
        float(np.max(np.abs(b.riem4 + np.einsum("pijlk->pijkl", b.riem4)))),
        float(np.max(np.abs(b.riem4 - np.einsum("pklij->pijkl", b.riem4)))),
        float(np.max(np.abs(
            b.riem4 + np.einsum("piklj->pijkl", b.riem4)
            + np.einsum("piljk->pijkl", b.riem4)))),
    )
    tol = 1e-10 * scale * ts
    blocks.append(_block("curvature:riemann_symmetries", "curvature",
                         _verdict(sym_res <= tol), sym_res, tol))

    if t.dim >= 3:
        wres = float(np.max(np.abs(weyl_residual(b))))
        tol = 1e-9 * ts
        blocks.append(_block("curvature:weyl_decomposition", "curvature",
                             _verdict(wres <= tol), wres, tol))
        wtrace = float(np.max(np.abs(np.einsum("pmimj->pij", b.weyl))))
        blocks.append(_block("curvature:weyl_traces", "curvature",
                             _verdict(wtrace <= tol), wtrace, tol))
        if t.dim == 3:
            wnorm = float(np.max(np.abs(b.weyl)))
            blocks.append(_block("curvature:weyl_vanishes_3d", "curvature",
                                 _verdict(wnorm <= tol), wnorm, tol))

    r_const = t.scalar_curvature if t.constant_scalar else None
    e_max = float(np.max(np.abs(cpe.cpe_residual_batch(b, r_const))))
    tr_max = float(np.max(np.abs(cpe.trace_residual_batch(b, r_const))))
    expected_exact = t.exactness is cpe.Exactness.EXACT
    tol = 1e-9 * ts
    blocks.append(_block(
        "curvature:cpe_residual", "curvature",
        _verdict(e_max <= tol if expected_exact else True), e_max, tol,
        exactness=t.exactness.value, trace_residual_max=tr_max,
        scalar_curvature=t.scalar_curvature,
        constant_scalar=t.constant_scalar))

    e = cpe.cpe_residual_batch(b, r_const)
    gap = float(np.max(np.abs(np.einsum("pii->p", e)
                              - cpe.trace_residual_batch(b, r_const))))
    tol = 1e-12 * (1.0 + tr_max) * ts
    blocks.append(_block("curvature:trace_consistency", "curvature",
                         _verdict(gap <= tol), gap, tol))

    if expected_exact:
        sres = float(np.max(np.abs(cpe.static_operator_batch(b) - b.ro)))
        tol = 1e-9 * ts
        blocks.append(_block("curvature:static_operator", "curvature",
                             _verdict(sres <= tol), sres, tol))
        third = cpe.third_derivative_residual_batch(b, t.scalar_curvature)
        tres = float(np.max(np.abs(third)))
        tol = 1e-8 * ts
        blocks.append(_block("curvature:third_derivative", "curvature",
                             _verdict(tres <= tol), tres, tol))

    try:
        rep = cpe.besse_spectral_check(m, t.scalar_curvature, t.dim)
        ok = rep.in_spectrum or t.exactness is cpe.Exactness.NON_SOLUTION
        blocks.append(_block("curvature:besse_spectral", "curvature",
                             _verdict(ok), rep.value, 1e-9 * ts,
                             nearest_eigenvalue=rep.nearest_eigenvalue,
                             gap=rep.gap, in_spectrum=rep.in_spectrum))
    except Exception:
        blocks.append(_block("curvature:besse_spectral", "curvature",
                             "not-applicable", float("nan"), float("nan"),
                             reason="no analytic spectrum"))

    if meas is not None and m.closed:
        for fid, val in meas.div_integrals.items():
            tol = (1e-6 * meas.volume * meas.field_max[fid]
                   * meas.curvature_scale * ts + 1e-12)
            blocks.append(_block(f"divergence:{fid}", "curvature",
                                 _verdict(abs(val) <= tol), val, tol,
                                 field_max=meas.field_max[fid],
                                 volume=meas.volume))

    pipeline = idn.theorem_pipeline(t, order=order, samples=POINTWISE_SAMPLES,
                                    seed=seed)
    for name, audit in pipeline["audits"].items():
        if not audit["applicable"]:
            verdict = "not-applicable"
        else:
            verdict = _verdict(bool(audit.get("consistent", True)))
        blocks.append({"check": f"audit:{name}", "kind": "curvature",
                       "verdict": verdict, **audit})
    return blocks


def identity_blocks(t: cpe.CPETriple, case_name: str, ids: list, order: int,
                    manifest: dict, ts: float) -> list:
    if case_name in catalog.MANIFESTS:
        reports = idn.identity_reports(case_name, order, ids)
    else:
        rule = geo.build_rule(t.manifold, order)
        reports = {cid: idn.check_identity(cid, t, rule) for cid in ids}
    blocks = []
    for cid in ids:
        rep = reports[cid]
        scaled_tols = {k: v * ts for k, v in rep.tolerances.items()}
        verdict = rep.verdict
        if verdict == "fail" and ts > 1.0:
            ok_total = abs(rep.total) <= scaled_tols.get("total", 0.0)
            ok_div = abs(rep.divergence_check) <= scaled_tols.get("divergence", 0.0)
            if ok_total and ok_div:
                verdict = "pass"
        blocks.append({
            "check": cid, "kind": "identity", "case": case_name,
            "manifest": manifest, "terms": rep.terms, "total": rep.total,
            "divergence_check": rep.divergence_check,
            "cpe_residual_l2": rep.cpe_residual_l2, "verdict": verdict,
            "volume": rep.volume, "tolerances": scaled_tols,
            "diagnostics": rep.diagnostics,
        })
    return blocks


# ---------------------------------------------------------------------------
# listing


def list_cases(stream=None) -> int:
    stream = stream or sys.stdout
    print("catalog cases:", file=stream)
    for name in catalog.case_names():
        man = catalog.get_manifest(name)
        pot = man["potential"]
        pot_desc = (f"height(axis={pot['axis']}, amplitude={pot['amplitude']})"
                    if pot["kind"] == "height" else "zero")
        kind = man["manifold"]["kind"]
        print(f"  {name:<22} manifold={kind:<17} potential={pot_desc}", file=stream)
    print("\nidentity checks:", file=stream)
    for cid in idn.IDENTITY_IDS:
        base = cid.split(":")[0]
        print(f"  {cid:<10} {idn.IDENTITY_LABELS[base]}", file=stream)
    print("\ncheck groups: curvature, matrix, lemma31, all", file=stream)
    print("vector fields: " + ", ".join(
        ("grad", "zk:0..4", "fz", "p31", "p32", "x314", "y315", "z316",
         "killing (sphere2)", "ambient_poly (sphere2)")), file=stream)
    return 0


# ---------------------------------------------------------------------------
# report assembly


def run_checks(cfg: RunConfig) -> dict:
    identity_ids = [c for c in cfg.checks if c not in GROUPS]
    need_case = bool(identity_ids) or "curvature" in cfg.checks
    manifest = None
    triple = None
    case_name = cfg.case
    if need_case:
        if cfg.case is None:
            raise ManifestError("--case is required for identity/curvature checks")
        if cfg.case in catalog.MANIFESTS:
            manifest = catalog.get_manifest(cfg.case)
            triple = catalog.get_triple(cfg.case)
        elif os.path.exists(cfg.case):
            with open(cfg.case) as fh:
                try:
                    manifest = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise ManifestError(f"manifest parse error: {exc}") from exc
            case_name = os.path.splitext(os.path.basename(cfg.case))[0]
            triple = catalog.triple_from_manifest(manifest, name=case_name)
        else:
            raise ManifestError(
                f"unknown case {cfg.case!r}; use a catalog name "
                f"({', '.join(catalog.case_names())}) or a manifest path")
        if manifest is not None:
            cfg = RunConfig(**{**cfg.__dict__,
                               "order": cfg.order or manifest.get("quadrature_order", 32)})

    meas = None
    if triple is not None and case_name in catalog.MANIFESTS and (
            "curvature" in cfg.checks):
        meas = idn.measure_catalog_case(case_name, cfg.order)
    elif triple is not None and "curvature" in cfg.checks:
        rule = geo.build_rule(triple.manifold, cfg.order)
        meas = idn.accumulate_case(triple, rule,
                                   idn.applicable_identities(triple),
                                   idn.field_ids_for(triple))

    jobs: list = []
    if identity_ids:
        jobs.append(("identity", lambda: identity_blocks(
            triple, case_name, identity_ids, cfg.order, manifest,
            cfg.tolerance_scale)))
    if "curvature" in cfg.checks:
        jobs.append(("curvature", lambda: curvature_blocks(
            triple, meas, cfg.order, cfg.seed, cfg.tolerance_scale)))
    if "matrix" in cfg.checks:
        jobs.append(("matrix", lambda: matrix_blocks(
            cfg.samples, cfg.seed, cfg.tolerance_scale)))
    if "lemma31" in cfg.checks:
        jobs.append(("lemma31", lambda: lemma31_blocks(
            cfg.samples, cfg.seed, cfg.lemma_range, cfg.tolerance_scale)))

    if cfg.jobs > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = [(name, pool.submit(fn)) for name, fn in jobs]
            results = [(name, f.result()) for name, f in futures]
    else:
        results = [(name, fn()) for name, fn in jobs]

    blocks: list = []
    for _, bs in results:
        blocks.extend(bs)

    counts = {"pass": 0, "fail": 0, "not-applicable": 0}
    for blk in blocks:
        counts[blk["verdict"]] += 1
    exit_code = 1 if counts["fail"] else 0
    return _scrub({
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "config": {
            "case": case_name, "checks": cfg.checks, "order": cfg.order,
            "samples": cfg.samples, "seed": cfg.seed,
            "tolerance_scale": cfg.tolerance_scale, "format": cfg.fmt,
            "lemma_range": list(cfg.lemma_range),
        },
        "manifest": manifest,
        "checks": blocks,
        "summary": counts,
        "exit_code": exit_code,
    })


def _scrub(obj):
    """Replace non-finite floats with null so reports stay strict JSON."""
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _scrub(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_scrub(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return _scrub(float(obj))
    return obj


def render_csv(report: dict) -> str:
    lines = ["case,check,total,divergence_check,verdict"]
    case = report["config"]["case"] or ""
    for blk in report["checks"]:
        total = blk.get("total", blk.get("value", ""))
        div = blk.get("divergence_check", "")
        total = "" if total is None else total
        div = "" if div is None else div
        lines.append(f"{case},{blk['check']},{total},{div},{blk['verdict']}")
    return "\n".join(lines) + "\n"


def write_report(report: dict, cfg: RunConfig) -> None:
    text = (render_csv(report) if cfg.fmt == "csv-summary"
            else json.dumps(report, indent=2, sort_keys=True) + "\n")
    if cfg.out is None:
        sys.stdout.write(text)
        return
    out_dir = os.path.dirname(os.path.abspath(cfg.out))
    fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=".report-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, cfg.out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "list":
        return list_cases()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig(
            case=args.case, checks=expand_checks(args.checks), order=args.order,
            samples=args.samples, seed=args.seed, out=args.out, fmt=args.fmt,
            jobs=args.jobs, tolerance_scale=args.tolerance_scale,
            lemma_range=_parse_range(args.lemma_range),
        )
        if not 4 <= cfg.order <= 128:
            raise ManifestError(f"--order must be in [4, 128], got {cfg.order}")
        if cfg.samples < 1:
            raise ManifestError("--samples must be positive")
        report = run_checks(cfg)
    except ManifestError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    write_report(report, cfg)
    return report["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
