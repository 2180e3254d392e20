"""Command-line front end.

Settings resolve as flags > config file > built-in defaults. The resolved
settings and the package version are embedded in every output file.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .montecarlo import (THREADS_ENV, ExperimentPlan, PlanValidationError, load_plan, region_diagnostic,
                         run_plan)
from .regions import besov_threshold, in_Ea, region_boundary_polyline

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CHECK = 3

DEFAULTS: dict[str, dict] = {
    "regions": {"region": "ea", "d": 1, "p": 2.0, "resolution": 201, "out": "regions.csv", "plot": False},
    "verify-scaling": {"beta": ["0.7071067811865476i"], "epsilon": 0.25, "M": 5000, "N": 256,
                       "phi_radius": 1 / 16, "alpha": 0.01, "seed": 0, "out_dir": "scaling_out",
                       "chunk_size": 250},
    "estimate-moments": {"beta": ["0.8i"], "p_list": [2.0, 4.0], "f": "bump", "radius": 0.25, "d": 1,
                         "m": 12, "N": 1024, "M": 10000, "seed": 0, "out_dir": "moments_out",
                         "chunk_size": 250},
    "estimate-besov": {"beta": ["0.8i"], "p": 2.0, "levels": None, "d": 1, "m": 12, "N": 1024, "M": 200,
                       "seed": 0, "filter": None, "out_dir": "besov_out", "chunk_size": 25},
    "selftest": {"seed": 0},
    "run": {"plan": None, "resume": True, "out_dir": None, "chunk_size": None},
}


def parse_beta(text: str) -> complex:
    """Parse complex literals such as '0.5+0.5i', '0.8i', 'i' or '1'."""
    t = str(text).strip().replace(" ", "").replace("I", "i")
    if t.endswith("i") and t[:-1] in ("", "+", "-"):
        t = t[:-1] + "1i"
    return complex(t.replace("i", "j"))


def parse_window(text):
    if text is None or isinstance(text, (list, tuple)):
        return None if text is None else tuple(int(v) for v in text)
    lo, hi = str(text).split(":")
    return int(lo), int(hi)


def _read_config(path) -> dict:
    if path is None:
        return {}
    path = Path(path)
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(path.read_text())
    return json.loads(path.read_text())


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, the config file and explicitly given flags."""
    cfg = dict(DEFAULTS[command])
    file_cfg = _read_config(getattr(args, "config", None))
    file_cfg = {k.replace("-", "_"): v for k, v in file_cfg.items()}
    unknown = set(file_cfg) - set(cfg) - {"threads"}
    if unknown:
        raise PlanValidationError(f"unknown config keys for {command}: {sorted(unknown)}")
    cfg.update(file_cfg)
    for key in list(cfg) + ["threads"]:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if "beta" in cfg and not isinstance(cfg["beta"], list):
        cfg["beta"] = [cfg["beta"]]
    return cfg


def _threads(cfg: dict) -> int:
    t = cfg.get("threads")
    return int(t) if t is not None else int(os.environ.get(THREADS_ENV, "1"))


def _provenance(command: str, cfg: dict) -> str:
    clean = {k: v for k, v in cfg.items() if k not in ("threads", "out_dir", "out")}
    return "# " + json.dumps({"command": command, "config": clean, "version": __version__},
                             sort_keys=True, default=str) + "\n"


def _betas(cfg: dict) -> list[complex]:
    return [parse_beta(b) for b in cfg["beta"]]


# ---------------------------------------------------------------------------
# regions


def _svg_polyline(path: Path, pts: np.ndarray, header: str) -> None:
    x0, x1 = pts[:, 0].min(), pts[:, 0].max()
    y0, y1 = pts[:, 1].min(), pts[:, 1].max()
    pad = 0.05 * max(x1 - x0, y1 - y0)
    w, h = x1 - x0 + 2 * pad, y1 - y0 + 2 * pad
    coords = " ".join(f"{x:.6f},{-y:.6f}" for x, y in pts)
    path.write_text(
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0 - pad:.6f} {-y1 - pad:.6f} {w:.6f} {h:.6f}" '
        f'width="480" height="{480 * h / w:.0f}">\n<!-- {header.strip()[2:]} -->\n'
        f'<polyline points="{coords}" fill="#cde" stroke="black" stroke-width="{w / 300:.6f}"/>\n</svg>\n')


def _svg_raster(path: Path, rows: list[tuple[float, float, float]], step: tuple[float, float],
                header: str) -> None:
    vals = [s for _, _, s in rows if math.isfinite(s)]
    lo, hi = min(vals), max(vals)
    xs = [r[0] for r in rows]
    ys = [r[1] for r in rows]
    x0, y0, x1, y1 = min(xs), min(ys), max(xs), max(ys)
    parts = []
    for x, y, s in rows:
        if not math.isfinite(s):
            continue
        t = (s - lo) / (hi - lo) if hi > lo else 0.5
        c = f"rgb({int(255 * t)},{int(80 + 100 * (1 - abs(2 * t - 1)))},{int(255 * (1 - t))})"
        parts.append(f'<rect x="{x - step[0] / 2:.6f}" y="{-y - step[1] / 2:.6f}" width="{step[0]:.6f}" '
                     f'height="{step[1]:.6f}" fill="{c}"/>')
    w, h = x1 - x0 + step[0], y1 - y0 + step[1]
    path.write_text(
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0 - step[0] / 2:.6f} {-y1 - step[1] / 2:.6f} '
        f'{w:.6f} {h:.6f}" width="480" height="{480 * h / w:.0f}">\n<!-- {header.strip()[2:]} -->\n'
        + "\n".join(parts) + "\n</svg>\n")


def besov_raster(d: int, p: float, resolution: int) -> tuple[list[tuple[float, float, float]], tuple]:
    """Threshold values on a regular grid covering E_a (nan outside)."""
    xs = np.linspace(-math.sqrt(2 * d), math.sqrt(2 * d), resolution)
    ys = np.linspace(-math.sqrt(d), math.sqrt(d), resolution)
    rows = []
    for y in ys:
        for x in xs:
            b = complex(float(x), float(y))
            s = besov_threshold(b, p, d) if in_Ea(b, d) else math.nan
            rows.append((float(x), float(y), s))
    return rows, (xs[1] - xs[0], ys[1] - ys[0])


def cmd_regions(cfg: dict) -> int:
    d, p, res = int(cfg["d"]), float(cfg["p"]), int(cfg["resolution"])
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    header = _provenance("regions", cfg)
    region = cfg["region"]
    if region in ("ea", "eap"):
        pts = region_boundary_polyline("Ea" if region == "ea" else "Eap", p, d, res)
        with open(out, "w") as fh:
            fh.write(header)
            fh.write("re,im\n")
            for x, y in pts:
                fh.write(f"{float(x)!r},{float(y)!r}\n")
        if cfg["plot"]:
            _svg_polyline(out.with_suffix(".svg"), pts, header)
        print(f"wrote {len(pts)} boundary vertices to {out}")
    else:
        rows, step = besov_raster(d, p, res)
        with open(out, "w") as fh:
            fh.write(header)
            fh.write("re,im,s_star\n")
            for x, y, s in rows:
                fh.write(f"{float(x)!r},{float(y)!r},{float(s)!r}\n")
        if cfg["plot"]:
            _svg_raster(out.with_suffix(".svg"), rows, step, header)
        print(f"wrote {len(rows)} raster cells to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Monte Carlo commands


def _check_betas(betas: list[complex], d: int) -> None:
    for b in betas:
        if not in_Ea(b, d):
            raise PlanValidationError(region_diagnostic(b, d))


def cmd_verify_scaling(cfg: dict) -> int:
    betas = _betas(cfg)
    _check_betas(betas, 1)
    eps = float(cfg["epsilon"])
    N = int(cfg["N"])
    ell = round(-math.log2(eps)) if eps > 0 else 0
    m = max(4, math.ceil(math.log2(max(1, N * 2**ell))) + 1)
    plan = ExperimentPlan(kind="scaling", betas=betas, d=1, m=m, N=N, M=int(cfg["M"]), seed=int(cfg["seed"]),
                          epsilon=eps, phi_radius=float(cfg["phi_radius"]), chunk_size=int(cfg["chunk_size"]),
                          out_dir=str(cfg["out_dir"]))
    paths = run_plan(plan, workers=_threads(cfg), config=cfg)
    report = json.loads(Path(paths["report"]).read_text())
    n_tests = 3 * len(betas)
    level = float(cfg["alpha"]) / n_tests
    ok = True
    print(f"{'beta':>16} {'part':>4} {'KS stat':>9} {'p-value':>10}")
    for entry in report["results"]:
        b = complex(*entry["beta"])
        for part, res in sorted(entry["ks"].items()):
            fail = res["p_value"] < level
            ok &= not fail
            print(f"{b!s:>16} {part:>4} {res['statistic']:9.4f} {res['p_value']:10.4g}{'  FAIL' if fail else ''}")
    print(f"Bonferroni level {level:.3g} over {n_tests} tests: {'pass' if ok else 'FAIL'}")
    report["check"] = {"bonferroni_level": level, "passed": ok}
    Path(paths["report"]).write_text(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK if ok else EXIT_CHECK


def _test_function_spec(cfg: dict) -> dict:
    f = cfg["f"]
    if f == "bump":
        return {"kind": "SmoothBump", "center": 0.5, "radius": float(cfg["radius"])}
    if f == "indicator":
        return {"kind": "Indicator", "center": 0.5, "radius": float(cfg["radius"])}
    if f == "torus":
        return {"kind": "Indicator", "center": 0.5, "radius": None}
    raise PlanValidationError(f"unknown test function {f!r}")


def cmd_estimate_moments(cfg: dict) -> int:
    plan = ExperimentPlan(kind="moments", betas=_betas(cfg), d=int(cfg["d"]), m=int(cfg["m"]), N=int(cfg["N"]),
                          M=int(cfg["M"]), seed=int(cfg["seed"]), test_function=_test_function_spec(cfg),
                          p_list=[float(p) for p in cfg["p_list"]], chunk_size=int(cfg["chunk_size"]),
                          out_dir=str(cfg["out_dir"]))
    paths = run_plan(plan, workers=_threads(cfg), config=cfg)
    report = json.loads(Path(paths["report"]).read_text())
    print(f"{'beta':>16} {'p':>5} {'estimate':>12} {'95% CI':>27} {'tail index':>11} in_Eap")
    for e in report["results"]:
        b = complex(*e["beta"])
        tail = e.get("tail_index")
        if tail is None:
            ti = "n/a"
        elif tail["plateau"]:
            ti = f"{tail['alpha_hat']:.3g}"
        else:
            ti = "none"
        print(f"{b!s:>16} {e['p']:5g} {e['estimate']:12.6g} [{e['ci'][0]:12.6g}, {e['ci'][1]:12.6g}] "
              f"{ti:>11} {e['in_Eap']}")
    return EXIT_OK


def cmd_estimate_besov(cfg: dict) -> int:
    plan = ExperimentPlan(kind="besov", betas=_betas(cfg), d=int(cfg["d"]), m=int(cfg["m"]), N=int(cfg["N"]),
                          M=int(cfg["M"]), seed=int(cfg["seed"]), p_list=[float(cfg["p"])],
                          filter_id=cfg["filter"], window=parse_window(cfg["levels"]),
                          chunk_size=int(cfg["chunk_size"]), out_dir=str(cfg["out_dir"]))
    paths = run_plan(plan, workers=_threads(cfg), config=cfg)
    report = json.loads(Path(paths["report"]).read_text())
    print(f"{'beta':>16} {'p':>5} {'s_hat':>9} {'stderr':>8} {'s_pred':>8} window note")
    for e in report["results"]:
        b = complex(*e["beta"])
        print(f"{b!s:>16} {e['p']:5g} {e['s_hat']:9.4f} {e['stderr']:8.4f} {e['s_predicted']:8.4f} "
              f"{e['window'][0]}:{e['window'][1]} {e['note']}")
    return EXIT_OK


def cmd_run(cfg: dict) -> int:
    if cfg["plan"] is None:
        raise PlanValidationError("run needs --plan")
    plan = load_plan(cfg["plan"])
    if cfg["out_dir"]:
        plan.out_dir = str(cfg["out_dir"])
    if cfg["chunk_size"]:
        plan.chunk_size = int(cfg["chunk_size"])
    paths = run_plan(plan, workers=_threads(cfg), resume=bool(cfg["resume"]), config=plan.to_dict())
    for k, v in sorted(paths.items()):
        print(f"{k}: {v}")
    return EXIT_OK


def cmd_selftest(cfg: dict) -> int:
    from .selftest import run_selftest

    results = run_selftest(seed=int(cfg["seed"]))
    ok = True
    for name, passed, detail in results:
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {
    "regions": cmd_regions,
    "verify-scaling": cmd_verify_scaling,
    "estimate-moments": cmd_estimate_moments,
    "estimate-besov": cmd_estimate_besov,
    "selftest": cmd_selftest,
    "run": cmd_run,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmclab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gmclab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, mc=True):
        p.add_argument("--config", help="JSON or TOML file with default settings")
        p.add_argument("--verbose", action="store_true", help="print the resolved configuration")
        p.add_argument("--seed", type=int)
        if mc:
            p.add_argument("--threads", type=int, help=f"worker processes (default ${THREADS_ENV} or 1)")
            p.add_argument("--out-dir", dest="out_dir")
            p.add_argument("--chunk-size", dest="chunk_size", type=int)

    p = sub.add_parser("regions", help="boundary polylines and threshold raster")
    p.add_argument("--config")
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--region", choices=["ea", "eap", "besov-map"])
    p.add_argument("--d", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--resolution", type=int)
    p.add_argument("--out")
    p.add_argument("--plot", action="store_true", default=None, help="also write an SVG next to the CSV")

    p = sub.add_parser("verify-scaling", help="KS tests of the scaling relation")
    common(p)
    p.add_argument("--beta", action="append")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--M", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--phi-radius", dest="phi_radius", type=float)
    p.add_argument("--alpha", type=float, help="family-wise significance level")

    p = sub.add_parser("estimate-moments", help="absolute moments with CIs and tail index")
    common(p)
    p.add_argument("--beta", action="append")
    p.add_argument("--p-list", dest="p_list", type=float, nargs="+")
    p.add_argument("--f", choices=["bump", "indicator", "torus"])
    p.add_argument("--radius", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--m", type=int, help="grid exponent (2**m points per axis)")
    p.add_argument("--N", type=int)
    p.add_argument("--M", type=int)

    p = sub.add_parser("estimate-besov", help="wavelet estimate of the Besov threshold")
    common(p)
    p.add_argument("--beta", action="append")
    p.add_argument("--p", type=float)
    p.add_argument("--levels", help="regression window lo:hi")
    p.add_argument("--d", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--filter")

    p = sub.add_parser("selftest", help="fast property checks")
    p.add_argument("--seed", type=int)
    p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("run", help="execute an experiment plan")
    common(p)
    p.add_argument("--plan")
    p.add_argument("--no-resume", dest="resume", action="store_false", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = resolve_config(args.command, args)
        if args.verbose:
            print(json.dumps(cfg, indent=2, sort_keys=True, default=str), file=sys.stderr)
        code = COMMANDS[args.command](cfg)
    except (PlanValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.verbose:
        print(f"elapsed {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
