"""Command line interface: ``dwpverify verify | curvature | catalog``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import dwp
from . import exprlang as el
from . import geometry as geo
from . import verify
from .dwp import DwpSpec
from .geometry import ChartManifold, VectorFieldSpec

REPORT_VERSION = 1

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

# checks other than the closed forms, with what they compare
CHECK_DESCRIPTIONS = {
    "oracle.curvature-relation": "R̃ from Γ̃ equals R plus the ∇P, π(P) and π ⊗ P terms built from Levi-Civita data",
    "oracle.torsion": "T̃(X,Y) = π(Y)X − π(X)Y",
    "oracle.metric-compatibility": "∇̃g = 0",
    "oracle.zero-field": "P = 0 gives Γ̃ = Γ",
    "class-a.levi-civita": "cyclic sum of (∇_X S)(Y,Z) and its diagonal (∇_X S)(X,X)",
    "class-a.ssmc": "cyclic sum of (∇̃_X S̃)(Y,Z), its diagonal, and the base reduction where its hypotheses hold",
    "einstein-equivalence": "factor conditions on ^BS̃ and ^FS hold iff S̃ = μ g (μ fitted)",
    "dichotomy": "interval base: S̃(V,P) = (n−2)(Vf/f)(Ph/h − π(P)) and its zero set",
}


class ConfigError(ValueError):
    pass


@dataclass
class SuiteConfig:
    manifolds: dict = field(default_factory=dict)
    include: tuple[str, ...] = ()
    exclude: tuple[str, ...] = ()
    samples: int = 50
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    expected_status: dict = field(default_factory=dict)
    extra_points: dict = field(default_factory=dict)
    output: str | None = None
    format: str = "text"


def all_check_keys() -> list[str]:
    return sorted(list(dwp.CLOSED_FORMS) + list(CHECK_DESCRIPTIONS))


def identity_descriptions() -> dict[str, str]:
    out = {k: cf.formula for k, cf in dwp.CLOSED_FORMS.items()}
    out.update(CHECK_DESCRIPTIONS)
    return dict(sorted(out.items()))


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def default_config_path() -> Path:
    return Path(str(resources.files("dwpverify") / "catalog" / "full.json"))


def _chart(desc: dict, name: str) -> ChartManifold:
    try:
        coords = desc["coords"]
        return ChartManifold.from_strings(coords, desc["metric"], desc["domain"], name)
    except KeyError as exc:
        raise ConfigError(f"{name}: missing field {exc.args[0]!r}") from None


def _manifold(entry: dict):
    if "id" not in entry:
        raise ConfigError("manifold entry without 'id'")
    mid = str(entry["id"])
    kind = entry.get("kind", "dwp")
    try:
        if kind == "manifold":
            m = _chart(entry, mid)
            if entry.get("P") is not None:
                m.P = VectorFieldSpec.from_strings(entry["P"], m.coord_names)
                if m.P.n != m.n:
                    raise ConfigError(f"{mid}: P needs {m.n} components")
            return mid, m
        if kind != "dwp":
            raise ConfigError(f"{mid}: unknown kind {kind!r}")
        base = _chart(entry.get("base", {}), f"{mid}.base")
        fiber = _chart(entry.get("fiber", {}), f"{mid}.fiber")
        h = el.parse(str(entry.get("h", "1")), base.coord_names)
        f = el.parse(str(entry.get("f", "1")), fiber.coord_names)
        side = entry.get("side", "none")
        P = None
        if side in ("B", "F"):
            if entry.get("P") is None:
                raise ConfigError(f"{mid}: side {side} needs P")
            coords = base.coord_names if side == "B" else fiber.coord_names
            P = VectorFieldSpec.from_strings(entry["P"], coords)
        return mid, DwpSpec(base, fiber, h, f, P, side, mid)
    except el.ExprError as exc:
        raise ConfigError(f"{mid}: {exc}") from None
    except (geo.GeometryError, dwp.DwpError) as exc:
        raise ConfigError(f"{mid}: {exc}") from None


def _check_prefixes(prefixes, what: str) -> None:
    keys = all_check_keys()
    for p in prefixes:
        if not any(k.startswith(p) for k in keys):
            raise ConfigError(f"{what} {p!r} matches no identity key")


def parse_config(data: dict) -> SuiteConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    manifolds, extra = {}, {}
    for entry in data.get("manifolds", []):
        mid, m = _manifold(entry)
        if mid in manifolds:
            raise ConfigError(f"duplicate manifold id {mid!r}")
        manifolds[mid] = m
        if entry.get("extra_points"):
            pts = np.asarray(entry["extra_points"], dtype=float)
            n = m.n
            if pts.ndim != 2 or pts.shape[1] != n:
                raise ConfigError(f"{mid}: extra_points must be a list of {n}-component points")
            extra[mid] = pts
    ids = data.get("identities", {}) or {}
    include = tuple(ids.get("include", ()))
    exclude = tuple(ids.get("exclude", ()))
    _check_prefixes(include, "include prefix")
    _check_prefixes(exclude, "exclude prefix")
    tolerances = {str(k): float(v) for k, v in (data.get("tolerances") or {}).items()}
    _check_prefixes([k for k in tolerances if k], "tolerance key")
    status = dict(data.get("expected_status") or {})
    for k, v in status.items():
        if k not in dwp.CLOSED_FORMS:
            raise ConfigError(f"expected_status for unknown identity {k!r}")
        if v not in ("verified", "errata-candidate"):
            raise ConfigError(f"expected_status must be 'verified' or 'errata-candidate', got {v!r}")
    out = data.get("output") or {}
    return SuiteConfig(
        manifolds=manifolds,
        include=include,
        exclude=exclude,
        samples=int(data.get("samples", 50)),
        seed=int(data.get("seed", 0)),
        tolerances=tolerances,
        expected_status=status,
        extra_points=extra,
        output=out.get("path"),
        format=out.get("format", "text"),
    )


def load_config(path) -> SuiteConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(data)


# ---------------------------------------------------------------------------
# report formatting
# ---------------------------------------------------------------------------


def report_json(reports, cfg: SuiteConfig) -> str:
    counts: dict[str, int] = {}
    for r in reports:
        counts[r.verdict] = counts.get(r.verdict, 0) + 1
    doc = {
        "version": REPORT_VERSION,
        "seed": cfg.seed,
        "samples": cfg.samples,
        "summary": counts,
        "exit_status": verify.exit_status(reports),
        "records": [r.to_dict() for r in reports],
    }
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def report_text(reports) -> str:
    header = ("identity", "manifold", "residual", "tolerance", "verdict")
    rows = [(r.identity, r.manifold, f"{r.max_residual:.3e}", f"{r.tolerance:.1e}", r.verdict) for r in reports]
    widths = [max(len(x) for x in col) for col in zip(header, *rows)] if rows else [len(h) for h in header]
    lines = ["  ".join(c.ljust(w) for c, w in zip(header, widths)).rstrip()]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows]
    counts: dict[str, int] = {}
    for r in reports:
        counts[r.verdict] = counts.get(r.verdict, 0) + 1
    lines.append("")
    lines.append(", ".join(f"{k}: {v}" for k, v in sorted(counts.items())) or "no checks selected")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _parse_tol(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--tol expects KEY=VALUE, got {item!r}")
        try:
            out[key] = float(val)
        except ValueError:
            raise ConfigError(f"--tol value for {key!r} is not a number: {val!r}") from None
    _check_prefixes([k for k in out if k], "tolerance key")
    return out


def cmd_verify(args) -> int:
    cfg = load_config(args.config or default_config_path())
    if args.seed is not None:
        cfg.seed = args.seed
    if args.samples is not None:
        if args.samples < 1:
            raise ConfigError("--samples must be positive")
        cfg.samples = args.samples
    if args.only:
        _check_prefixes(args.only, "--only prefix")
        cfg.include = tuple(args.only)
    cfg.tolerances.update(_parse_tol(args.tol))
    reports = verify.run_suite(cfg)
    out = args.out or cfg.output
    as_json = args.json or (out is not None and str(out).endswith(".json")) or (args.out is None and cfg.format == "json")
    body = report_json(reports, cfg) if as_json else report_text(reports)
    if out:
        Path(out).write_text(body)
        print(report_text(reports).splitlines()[-1])
    else:
        sys.stdout.write(body)
    return verify.exit_status(reports)


def _point_arg(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.replace(",", " ").split()], dtype=float)
    except ValueError:
        raise ConfigError(f"--point must be comma-separated numbers, got {text!r}") from None


def _tolist(a):
    return np.asarray(a, dtype=float).tolist()


def curvature_dump(entry, p) -> dict:
    """Oracle tensors for both connections at ``p``, plus closed-form residuals."""
    m = dwp.assemble(entry) if isinstance(entry, DwpSpec) else entry
    pts = np.atleast_2d(p)
    P = verify._lifted_P(entry)
    out = {"version": REPORT_VERSION, "manifold": m.name, "coords": list(m.coord_names), "point": _tolist(p)}
    g = m.metric_jet(pts, 0)[0]
    out["metric"] = _tolist(g[0])
    for label, fld in (("levi_civita", geo.LeviCivitaField(m)), ("ssmc", geo.SSMCField(m, P))):
        gamma = fld.jet(pts, 0)[0]
        R = geo.riemann_batch(fld, pts)
        S = geo.ricci_batch(R)
        out[label] = {
            "christoffel": _tolist(gamma[0]),
            "riemann": _tolist(R[0]),
            "ricci": _tolist(S[0]),
            "scalar": float(geo.scalar_batch(S, g)[0]),
        }
    if isinstance(entry, DwpSpec):
        forms = {}
        for key, cf in dwp.CLOSED_FORMS.items():
            if cf.case not in verify._applicable_cases(entry):
                continue
            oracle = dwp.Oracle(entry, pts, dwp._p_side(cf))
            value = dwp.evaluate_closed_form(key, entry, pts)
            target = dwp.oracle_block(cf, oracle)
            rec = {"residual": verify._maxabs(value - target), "status": cf.status}
            if cf.output == "scalar":
                rec["closed_form"] = float(value[0])
                rec["oracle"] = float(target[0])
            forms[key] = rec
        out["closed_forms"] = forms
    return out


def _fmt_matrix(a, indent="  ") -> str:
    a = np.asarray(a)
    if a.ndim <= 2:
        return "\n".join(indent + np.array2string(np.atleast_1d(row), precision=6, suppress_small=True) for row in np.atleast_2d(a))
    return "\n".join(f"{indent}[{i}]\n" + _fmt_matrix(a[i], indent + "  ") for i in range(a.shape[0]))


def curvature_text(d: dict) -> str:
    lines = [f"manifold {d['manifold']} at {dict(zip(d['coords'], d['point']))}", "metric:", _fmt_matrix(d["metric"])]
    for label in ("levi_civita", "ssmc"):
        blk = d[label]
        lines.append(f"{label}: scalar {blk['scalar']:.12g}")
        lines.append(" christoffel [k][i][j]:")
        lines.append(_fmt_matrix(blk["christoffel"], "  "))
        lines.append(" ricci [j][k]:")
        lines.append(_fmt_matrix(blk["ricci"], "  "))
        nz = float(np.max(np.abs(blk["riemann"]))) if np.size(blk["riemann"]) else 0.0
        lines.append(f" riemann max |R^l_ijk| = {nz:.6g}")
    if "closed_forms" in d:
        lines.append("closed forms (max |closed − oracle| at this point):")
        width = max(len(k) for k in d["closed_forms"])
        for key, rec in d["closed_forms"].items():
            extra = ""
            if "closed_form" in rec:
                extra = f"  closed {rec['closed_form']:.12g}  oracle {rec['oracle']:.12g}"
            lines.append(f"  {key.ljust(width)}  {rec['residual']:.3e}  {rec['status']}{extra}")
    return "\n".join(lines) + "\n"


def cmd_curvature(args) -> int:
    cfg = load_config(args.config or default_config_path())
    if args.manifold not in cfg.manifolds:
        raise ConfigError(f"unknown manifold {args.manifold!r}; known: {', '.join(cfg.manifolds)}")
    entry = cfg.manifolds[args.manifold]
    m = dwp.assemble(entry) if isinstance(entry, DwpSpec) else entry
    p = _point_arg(args.point)
    if p.shape != (m.n,):
        raise ConfigError(f"--point needs {m.n} coordinates ({', '.join(m.coord_names)})")
    if not m.contains(p):
        raise ConfigError(f"point {p.tolist()} is outside the domain box {list(m.domain_box)}")
    try:
        d = curvature_dump(entry, p)
    except el.DomainError as exc:
        raise ConfigError(f"cannot evaluate at {p.tolist()}: {exc}") from None
    if args.json:
        sys.stdout.write(json.dumps(d, sort_keys=True, indent=2, ensure_ascii=False) + "\n")
    else:
        sys.stdout.write(curvature_text(d))
    return EXIT_OK


def cmd_catalog(args) -> int:
    show_ids = args.identities or not args.manifolds
    prefix = args.filter or ""
    if show_ids:
        descr = {k: v for k, v in identity_descriptions().items() if k.startswith(prefix)}
        width = max((len(k) for k in descr), default=0)
        for key, text in descr.items():
            status = dwp.CLOSED_FORMS[key].status if key in dwp.CLOSED_FORMS else "check"
            print(f"{key.ljust(width)}  [{status}]  {text}")
    if args.manifolds:
        cfg = load_config(args.config or default_config_path())
        for mid, entry in cfg.manifolds.items():
            if not show_ids and not mid.startswith(prefix):
                continue
            if isinstance(entry, DwpSpec):
                P = "0" if entry.P is None else "(" + ", ".join(el.to_string(c) for c in entry.P.components) + ")"
                print(
                    f"{mid}: dwp n1={entry.n1} n2={entry.n2} h={el.to_string(entry.h)} "
                    f"f={el.to_string(entry.f)} P{'∈' + entry.side if entry.side != 'none' else ''}={P}"
                )
            else:
                print(f"{mid}: manifold n={entry.n} coords={','.join(entry.coord_names)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dwpverify", description="Check doubly warped product curvature identities against a coordinate oracle.")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the identity suite")
    v.add_argument("--config", help="suite config (JSON); defaults to the shipped catalog")
    v.add_argument("--seed", type=int)
    v.add_argument("--samples", type=int)
    v.add_argument("--only", action="append", metavar="PREFIX", help="keep identity keys with this prefix (repeatable)")
    v.add_argument("--tol", action="append", metavar="KEY=VAL", help="absolute tolerance for a key prefix (repeatable)")
    v.add_argument("--out", help="write the report here")
    v.add_argument("--json", action="store_true", help="JSON report")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("curvature", help="dump oracle tensors and closed-form residuals at a point")
    c.add_argument("--config")
    c.add_argument("--manifold", required=True)
    c.add_argument("--point", required=True, help="comma-separated coordinates")
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_curvature)

    k = sub.add_parser("catalog", help="list identity keys and shipped manifolds")
    k.add_argument("--identities", action="store_true")
    k.add_argument("--manifolds", action="store_true")
    k.add_argument("--filter", metavar="PREFIX")
    k.add_argument("--config")
    k.set_defaults(func=cmd_catalog)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
