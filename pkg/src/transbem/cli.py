"""Command-line front end.

Usage::

    transbem [--config FILE] [--set key.path=VALUE ...] COMMAND [flags]

Commands: ``mesh-info``, ``scan``, ``beyn``, ``oracle``, ``verify`` and
``cache {list,clear}``.  The configuration is a JSON document (schema in
``DEFAULT_CONFIG`` and the README); ``--set`` and the per-command flags
override it, flags last.

Exit codes: 0 ok, 2 configuration error, 3 mesh error, 4 partial scan
failure, 5 verification failure.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import QuadratureOrders
from .assembly.engine import WORKERS_ENV
from .cache import MatrixCache
from .mesh import MeshError, load_mesh, make_icosphere, make_scene

log = logging.getLogger("transbem")

EXIT_OK, EXIT_CONFIG, EXIT_MESH, EXIT_PARTIAL, EXIT_VERIFY = 0, 2, 3, 4, 5

DEFAULT_CONFIG: dict = {
    "geometry": {
        "mesh": None,
        "generator": {"type": "icosphere", "radius": 1.0, "level": 2, "center": [0.0, 0.0, 0.0]},
        "inner": None,
    },
    "contrast": {"n": 4.0, "n1": None, "n2": None},
    "quadrature": {"regular": 5, "singular": 4, "near_factor": 0.3},
    "scan": {"kmin": 0.5, "kmax": 5.0, "steps": 200, "threshold": 0.1, "ktol": 1e-4},
    "contours": [{"center": [3.18, 0.0], "radius": 0.1, "nodes": 32, "probes": 8}],
    "filter": {"threshold": 0.1, "directions": 64, "baseline_samples": 20, "seed": 2024},
    "oracle": {"lmax": 6, "interval": [0.5, 6.0], "radius": 1.0, "verify": False},
    "verify": {
        "kappas": [2.0, 4.0, 8.0],
        "axis_floor": 1e-5,
        "k": 1.5,
        "kdiff_max": 0.1,
        "combination_max": 0.5,
        "coercivity_kappa": 2.0,
        "coercivity_floor": 1e-5,
        "filter_trials": 50,
    },
    "workers": None,
    "cache_dir": None,
    "output_dir": "transbem-out",
}

# keys that do not influence numerical results and are left out of the hash
_UNHASHED = ("workers", "cache_dir", "output_dir")


class ConfigError(ValueError):
    pass


# ----------------------------------------------------------------------------- configuration

def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict) and isinstance(val, dict):
            out[key] = _merge(base[key], val, path + key + ".")
        else:
            out[key] = val
    return out


def _set_path(cfg: dict, dotted: str, value):
    parts = dotted.split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ConfigError(f"unknown config key {dotted!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {dotted!r}")
    node[parts[-1]] = value


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path=None, overrides=()) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {str(p)!r} does not exist")
        try:
            user = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg = _merge(cfg, user)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, val = item.split("=", 1)
        _set_path(cfg, key.strip(), _parse_value(val))
    return cfg


def _num(x, name, lo=None, hi=None, integer=False):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{name} must be a number")
    if integer and int(x) != x:
        raise ConfigError(f"{name} must be an integer")
    if not np.isfinite(x) or (lo is not None and x < lo) or (hi is not None and x > hi):
        raise ConfigError(f"{name} = {x} outside [{lo}, {hi}]")
    return int(x) if integer else float(x)


def _check_contrast(value, name):
    v = _num(value, name, lo=0.0)
    if v <= 0.0:
        raise ConfigError(f"{name} must be positive")
    if v == 1.0:
        raise ConfigError("contrast must differ from 1")
    return v


def validate_config(cfg: dict, need_contrast: bool = True) -> dict:
    g = cfg["geometry"]
    for label, spec in (("geometry.mesh", g["mesh"]),
                        ("geometry.inner.mesh", (g["inner"] or {}).get("mesh"))):
        if spec is not None and not Path(spec).is_file():
            raise ConfigError(f"{label}: file {spec!r} does not exist")
    gen = g["generator"]
    if g["mesh"] is None:
        _check_generator(gen, "geometry.generator")
    if g["inner"] is not None:
        inner = g["inner"]
        if not isinstance(inner, dict):
            raise ConfigError("geometry.inner must be an object")
        if inner.get("mesh") is None:
            _check_generator(inner.get("generator"), "geometry.inner.generator")
    if need_contrast:
        c = cfg["contrast"]
        if g["inner"] is not None:
            for key in ("n1", "n2"):
                if c[key] is None:
                    c[key] = c["n"]
            c["n1"] = _check_contrast(c["n1"], "contrast.n1")
            c["n2"] = _check_contrast(c["n2"], "contrast.n2")
        else:
            c["n"] = _check_contrast(c["n"], "contrast.n")
    q = cfg["quadrature"]
    _num(q["regular"], "quadrature.regular", 1, 10, integer=True)
    _num(q["singular"], "quadrature.singular", 1, 12, integer=True)
    _num(q["near_factor"], "quadrature.near_factor", 0.0, 10.0)
    s = cfg["scan"]
    kmin = _num(s["kmin"], "scan.kmin", 0.0)
    kmax = _num(s["kmax"], "scan.kmax", 0.0)
    if not 0.0 < kmin < kmax:
        raise ConfigError("scan window must satisfy 0 < kmin < kmax")
    _num(s["steps"], "scan.steps", 2, 100000, integer=True)
    _num(s["threshold"], "scan.threshold", 0.0, 1.0)
    _num(s["ktol"], "scan.ktol", 1e-12, 1.0)
    f = cfg["filter"]
    _num(f["threshold"], "filter.threshold", 0.0, 1.0)
    _num(f["directions"], "filter.directions", 1, 100000, integer=True)
    _num(f["baseline_samples"], "filter.baseline_samples", 1, 100000, integer=True)
    if not isinstance(cfg["contours"], list):
        raise ConfigError("contours must be a list")
    o = cfg["oracle"]
    _num(o["lmax"], "oracle.lmax", 1, 60, integer=True)
    _num(o["radius"], "oracle.radius", 1e-12)
    if len(o["interval"]) != 2 or not 0 < o["interval"][0] < o["interval"][1]:
        raise ConfigError("oracle.interval must be [a, b] with 0 < a < b")
    if cfg["workers"] is not None:
        _num(cfg["workers"], "workers", 1, 1024, integer=True)
    return cfg


def _check_generator(gen, label):
    if not isinstance(gen, dict) or gen.get("type") != "icosphere":
        raise ConfigError(f"{label} must be {{'type': 'icosphere', ...}}")
    _num(gen.get("radius", 1.0), label + ".radius", 1e-12)
    _num(gen.get("level", 0), label + ".level", 0, 6, integer=True)


def config_hash(cfg: dict) -> str:
    body = {k: v for k, v in cfg.items() if k not in _UNHASHED}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]


def metadata(cfg: dict, command: str) -> dict:
    return {"tool": "transbem", "version": __version__, "command": command,
            "config_hash": config_hash(cfg)}


# ----------------------------------------------------------------------------- output

def write_atomic(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _stamp(meta: dict) -> str:
    return "".join(f"# {k}: {meta[k]}\n" for k in sorted(meta))


def _json(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


# ----------------------------------------------------------------------------- geometry

def _mesh_from(spec: dict):
    if spec.get("mesh") is not None:
        return load_mesh(spec["mesh"], spec.get("format"))
    gen = spec["generator"]
    return make_icosphere(float(gen.get("radius", 1.0)), int(gen.get("level", 0)),
                          tuple(gen.get("center", (0.0, 0.0, 0.0))))


def build_geometry(cfg: dict):
    """Return ``(outer_mesh, inner_mesh or None, scene or None)``."""
    g = cfg["geometry"]
    outer = _mesh_from(g)
    if g["inner"] is None:
        return outer, None, None
    inner = _mesh_from(g["inner"])
    return outer, inner, make_scene(outer, inner)


def _orders(cfg):
    q = cfg["quadrature"]
    return QuadratureOrders(int(q["regular"]), int(q["singular"]), float(q["near_factor"]))


def _cache(cfg):
    return MatrixCache(cfg["cache_dir"]) if cfg["cache_dir"] is not None else MatrixCache()


def _family(cfg, outer, inner, cache=None, normalized=True):
    from .solver import SchurFamily, TransmissionFamily
    from .spaces import build_space

    space = build_space(outer)
    c = cfg["contrast"]
    if inner is None:
        fam = TransmissionFamily(space, c["n"], _orders(cfg), cfg["workers"], cache, normalized)
    else:
        fam = SchurFamily(space, build_space(inner), c["n1"], c["n2"], _orders(cfg),
                          cfg["workers"], cache, normalized)
    return fam, space


def _filter(cfg, space):
    from .solver import FarFieldFilter

    f = cfg["filter"]
    return FarFieldFilter(space, float(f["threshold"]), int(f["directions"]),
                          int(f["baseline_samples"]), int(f.get("seed", 2024)))


# ----------------------------------------------------------------------------- commands

def cmd_mesh_info(cfg: dict, out=None) -> int:
    out = out or sys.stdout
    outer, inner, scene = build_geometry(cfg)
    doc = {"meta": metadata(cfg, "mesh-info"), "outer": outer.summary()}
    if inner is not None:
        doc["inner"] = inner.summary()
        doc["gap"] = scene.gap
    out.write(_json(doc))
    return EXIT_OK


def cmd_scan(cfg: dict, out=None) -> int:
    from .solver import apply_filter, candidates_csv, candidates_json, sigma_scan
    out = out or sys.stdout

    outer, inner, _ = build_geometry(cfg)
    cache = _cache(cfg)
    fam, space = _family(cfg, outer, inner, cache)
    s = cfg["scan"]
    t0 = time.perf_counter()
    res = sigma_scan(fam, float(s["kmin"]), float(s["kmax"]), int(s["steps"]),
                     float(s["threshold"]), float(s["ktol"]))
    flt = _filter(cfg, space)
    for cand in res.candidates:
        apply_filter(cand, flt)
    wall = time.perf_counter() - t0
    log.info("scan finished in %.2f s (cache hits %d, misses %d)", wall, cache.hits, cache.misses)

    meta = metadata(cfg, "scan")
    odir = Path(cfg["output_dir"])
    curve = _stamp(meta) + "k,sigma_min\n" + "".join(
        f"{float(k)!r},{float(v)!r}\n" for k, v in zip(res.ks, res.sigmas))
    write_atomic(odir / "scan_curve.csv", curve)
    write_atomic(odir / "scan_candidates.csv", _stamp(meta) + candidates_csv(res.candidates))
    summary = {"median": res.median, "threshold": res.threshold,
               "local_minima": res.local_minima,
               "failures": [{"k": k, "error": m} for k, m in res.failures]}
    if hasattr(fam, "conditions") and fam.conditions:
        summary["max_l21_condition"] = max(fam.conditions.values())
    doc = json.loads(candidates_json(res.candidates, include_vector=False, meta=meta))
    doc["scan"] = summary
    write_atomic(odir / "scan_candidates.json", _json(doc))
    accepted = [c for c in res.candidates if c.accepted]
    out.write(_json({"accepted": [c.k.real for c in accepted],
                     "candidates": len(res.candidates), "failures": len(res.failures),
                     "output_dir": str(odir)}))
    return EXIT_PARTIAL if res.failures else EXIT_OK


def cmd_beyn(cfg: dict, out=None) -> int:
    from .solver import BeynError, ContourSpec, apply_filter, beyn_solve, candidates_csv
    out = out or sys.stdout

    specs = []
    for i, c in enumerate(cfg["contours"]):
        try:
            center = complex(*c["center"]) if isinstance(c["center"], list) else complex(c["center"])
            specs.append(ContourSpec(center, float(c["radius"]), int(c.get("nodes", 32)),
                                     int(c.get("probes", 8)), c.get("rank_tol"),
                                     float(c.get("gap", 10.0)), int(c.get("seed", 12345))))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"contours[{i}]: {exc}") from None
    if not specs:
        raise ConfigError("no contours configured")
    outer, inner, _ = build_geometry(cfg)
    fam, space = _family(cfg, outer, inner, _cache(cfg))
    flt = _filter(cfg, space)
    cands, errors = [], []
    for i, spec in enumerate(specs):
        try:
            found = beyn_solve(fam, spec)
        except BeynError as exc:
            errors.append({"contour": i, "error": str(exc)})
            continue
        for cand in found:
            cand.notes.append(f"contour {i}")
            apply_filter(cand, flt)
        cands.extend(found)
    meta = metadata(cfg, "beyn")
    odir = Path(cfg["output_dir"])
    write_atomic(odir / "beyn_candidates.csv", _stamp(meta) + candidates_csv(cands))
    doc = {"meta": meta, "candidates": [c.to_record(False) for c in cands], "errors": errors}
    write_atomic(odir / "beyn_candidates.json", _json(doc))
    out.write(_json({"accepted": [[c.k.real, c.k.imag] for c in cands if c.accepted],
                     "errors": errors}))
    return EXIT_PARTIAL if errors else EXIT_OK


def cmd_oracle(cfg: dict, out=None) -> int:
    from .mie import oracle_roots, verify_root
    out = out or sys.stdout

    o = cfg["oracle"]
    c = cfg["contrast"]
    n = c["n"] if cfg["geometry"]["inner"] is None else c["n1"]
    roots = oracle_roots(n, float(o["radius"]), tuple(o["interval"]), int(o["lmax"]))
    recs = []
    for r in roots:
        rec = {"k": r.k, "family": r.family, "l": r.l, "grazing": r.grazing}
        if o["verify"]:
            rec["trace_mismatch"] = verify_root(r.family, r.l, n, r.k, float(o["radius"]))
        recs.append(rec)
    doc = {"meta": metadata(cfg, "oracle"), "n": n, "R": float(o["radius"]),
           "interval": list(o["interval"]), "lmax": int(o["lmax"]), "roots": recs}
    path = write_atomic(Path(cfg["output_dir"]) / "oracle_roots.json", _json(doc))
    out.write(_json({"roots": [r.k for r in roots], "file": str(path)}))
    return EXIT_OK


def cmd_verify(cfg: dict, out=None) -> int:
    from .solver import (
        FarFieldFilter,
        compact_combination_ratio,
        coercivity_constant,
        imaginary_axis_check,
        kdiff_ratio,
    )
    from .spaces import build_loop_star
    out = out or sys.stdout

    if cfg["geometry"]["inner"] is not None:
        raise ConfigError("verify runs on a single surface; remove geometry.inner")
    v = cfg["verify"]
    outer, _, _ = build_geometry(cfg)
    fam, space = _family(cfg, outer, None, _cache(cfg))
    n = cfg["contrast"]["n"]
    checks = []

    axis = imaginary_axis_check(fam, v["kappas"], floor=float(v["axis_floor"]))
    checks.append({"name": "imaginary_axis_triviality", "passed": axis.passed,
                   "threshold": float(v["axis_floor"]),
                   "measured": {f"{e.kappa:g}": e.sigma_min for e in axis.entries}})

    k = float(v["k"])
    kd = kdiff_ratio(space, k, n, orders=_orders(cfg))
    checks.append({"name": "kdiff_compactness", "passed": kd < float(v["kdiff_max"]),
                   "threshold": float(v["kdiff_max"]), "measured": kd})
    cc = compact_combination_ratio(fam, k, n)
    checks.append({"name": "compact_combination", "passed": cc < float(v["combination_max"]),
                   "threshold": float(v["combination_max"]), "measured": cc})

    co = coercivity_constant(space, build_loop_star(space), float(v["coercivity_kappa"]), n,
                             _orders(cfg))
    checks.append({"name": "coercivity", "passed": co > float(v["coercivity_floor"]),
                   "threshold": float(v["coercivity_floor"]), "measured": co})

    f = cfg["filter"]
    flt = FarFieldFilter(space, float(f["threshold"]), int(f["directions"]),
                         int(f["baseline_samples"]), int(f.get("seed", 2024)))
    rng = np.random.default_rng(7)
    ratios = []
    for _ in range(int(v["filter_trials"])):
        vec = rng.standard_normal(fam.dimension) + 1j * rng.standard_normal(fam.dimension)
        ratios.append(flt.ratio(vec, k))
    rejected = sum(r > flt.threshold for r in ratios)
    checks.append({"name": "farfield_filter_calibration", "passed": rejected == len(ratios),
                   "threshold": flt.threshold,
                   "measured": {"rejected": int(rejected), "trials": len(ratios),
                                "min_ratio": float(min(ratios))}})

    ok = all(c["passed"] for c in checks)
    doc = {"meta": metadata(cfg, "verify"), "passed": ok, "checks": checks}
    write_atomic(Path(cfg["output_dir"]) / "verify_report.json", _json(doc))
    for c in checks:
        out.write(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: "
                  f"measured {json.dumps(c['measured'])} threshold {c['threshold']:g}\n")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_cache(cfg: dict, action: str, out=None) -> int:
    out = out or sys.stdout
    cache = _cache(cfg)
    if action == "list":
        out.write(_json({"directory": str(cache.directory), "entries": cache.entries()}))
    else:
        out.write(_json({"directory": str(cache.directory), "removed": cache.clear()}))
    return EXIT_OK


# ----------------------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="transbem", description=__doc__.split("\n")[0])
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry, e.g. scan.steps=50 (VALUE parsed as JSON)")
    p.add_argument("--workers", type=int, help="assembly worker threads")
    p.add_argument("--cache-dir", help="matrix cache directory")
    p.add_argument("--output-dir", help="directory for result files")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"transbem {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def geo(sp):
        sp.add_argument("--mesh", help="surface mesh file (.off or .msh)")
        sp.add_argument("--level", type=int, help="icosphere refinement level")
        sp.add_argument("--radius", type=float, help="icosphere radius")

    def contrast(sp):
        sp.add_argument("--n", type=float, help="contrast n (single surface)")

    sp = sub.add_parser("mesh-info", help="print a JSON mesh summary")
    geo(sp)
    sp = sub.add_parser("scan", help="sigma_min scan with refinement and filtering")
    geo(sp)
    contrast(sp)
    sp.add_argument("--kmin", type=float)
    sp.add_argument("--kmax", type=float)
    sp.add_argument("--steps", type=int)
    sp = sub.add_parser("beyn", help="contour-integral eigenvalue search")
    geo(sp)
    contrast(sp)
    sp.add_argument("--center", type=complex, help="contour center, e.g. 3.18+0j")
    sp.add_argument("--contour-radius", type=float)
    sp = sub.add_parser("oracle", help="Mie transmission eigenvalues of the sphere")
    contrast(sp)
    sp.add_argument("--lmax", type=int)
    sp = sub.add_parser("verify", help="property checks with a pass/fail report")
    geo(sp)
    contrast(sp)
    sp = sub.add_parser("cache", help="inspect or clear the matrix cache")
    sp.add_argument("action", choices=("list", "clear"))
    return p


def _apply_flags(cfg: dict, args) -> None:
    if args.workers is not None:
        cfg["workers"] = args.workers
    if args.cache_dir is not None:
        cfg["cache_dir"] = args.cache_dir
    if args.output_dir is not None:
        cfg["output_dir"] = args.output_dir
    if getattr(args, "mesh", None) is not None:
        cfg["geometry"]["mesh"] = args.mesh
    if getattr(args, "level", None) is not None:
        cfg["geometry"]["generator"]["level"] = args.level
    if getattr(args, "radius", None) is not None:
        cfg["geometry"]["generator"]["radius"] = args.radius
    if getattr(args, "n", None) is not None:
        cfg["contrast"]["n"] = args.n
    for flag in ("kmin", "kmax", "steps"):
        if getattr(args, flag, None) is not None:
            cfg["scan"][flag] = getattr(args, flag)
    if getattr(args, "lmax", None) is not None:
        cfg["oracle"]["lmax"] = args.lmax
    if getattr(args, "center", None) is not None or getattr(args, "contour_radius", None) is not None:
        base = dict(cfg["contours"][0]) if cfg["contours"] else {"center": [3.18, 0.0], "radius": 0.1}
        if args.center is not None:
            base["center"] = [args.center.real, args.center.imag]
        if args.contour_radius is not None:
            base["radius"] = args.contour_radius
        cfg["contours"] = [base]


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.set)
        _apply_flags(cfg, args)
        need = args.command in ("scan", "beyn", "verify", "oracle")
        validate_config(cfg, need_contrast=need)
        if cfg["workers"] is not None:
            os.environ[WORKERS_ENV] = str(cfg["workers"])
        if args.command == "mesh-info":
            return cmd_mesh_info(cfg)
        if args.command == "scan":
            return cmd_scan(cfg)
        if args.command == "beyn":
            return cmd_beyn(cfg)
        if args.command == "oracle":
            return cmd_oracle(cfg)
        if args.command == "verify":
            return cmd_verify(cfg)
        return cmd_cache(cfg, args.action)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MeshError as exc:
        print(f"mesh error: {exc}", file=sys.stderr)
        return EXIT_MESH


if __name__ == "__main__":
    sys.exit(main())
