"""Command-line surface: evaluate functions, run experiments, verify.

Exit codes: 0 success, 2 usage (argparse), 3 config, 4 numeric/convergence,
5 acceptance failure.  Randomised commands either take --seed or record the
generated one in the manifest that accompanies every artifact file.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__, a2lab, acceptance, stochastic as st, whittaker as wh
from .errors import WhittakerLabError
from .rootsys import SimpleSystem
from .specfun import (bessel_i, bessel_k, gamma_ln, parabolic_d, theta_hw,
                      whittaker_m, whittaker_w)
from .whittaker import GeneralFunctionalFamily

FORMAT_VERSION = 1

_CONFIG_KEYS = {"seed", "paths", "dt", "horizon", "tail_tol", "mu", "theta",
                "x", "depth", "kappa", "y"}


def _atomic_write(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _manifest(args, seed, t0) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "command": " ".join(sys.argv[1:]),
        "config": {k: v for k, v in sorted(vars(args).items())
                   if not callable(v) and k != "func"},
        "seed": seed,
        "tool_version": __version__,
        "wall_time_s": round(time.time() - t0, 3),
    }


def _emit(args, payload: dict, manifest: dict):
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        _atomic_write(args.out, text + "\n")
        _atomic_write(args.out + ".manifest.json",
                      json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    else:
        print(text)


def _xvec(args, system=None):
    xs = args.x if args.x is not None else [0.0]
    if args.preset == "A2":
        return wh.a2_x_from_alphas(xs[0], xs[1] if len(xs) > 1 else xs[0])
    return np.asarray(xs, dtype=float)


# -- eval --------------------------------------------------------------------

def cmd_eval(args) -> int:
    t0 = time.time()
    fid = args.function
    rows = []

    def table(headers, data):
        if args.json:
            payload = {"format_version": FORMAT_VERSION, "function": fid,
                       "columns": headers, "rows": data}
            _emit(args, payload, _manifest(args, None, t0))
        else:
            lines = [",".join(headers)]
            lines += [",".join(f"{v:.12g}" for v in row) for row in data]
            text = "\n".join(lines)
            if args.out:
                _atomic_write(args.out, text + "\n")
                _atomic_write(args.out + ".manifest.json",
                              json.dumps(_manifest(args, None, t0), indent=2) + "\n")
            else:
                print(text)

    if fid == "w":
        nu = args.nu if args.nu is not None else [0.7]
        if args.preset == "A1":
            p = wh.WhittakerParams(SimpleSystem.preset("A1"), [0.5],
                                   np.asarray(nu, dtype=float))
        elif args.preset == "A2":
            p = wh.a2_params(nu[0], nu[1] if len(nu) > 1 else nu[0])
        else:
            raise WhittakerLabError(f"eval w: unsupported preset {args.preset}")
        xs = args.x if args.x is not None else [0.0]
        if args.preset == "A2":
            pts = [(xs[0], xs[1] if len(xs) > 1 else xs[0])]
            data = [[u1, u2, wh.w_normalized(p, wh.a2_x_from_alphas(u1, u2))]
                    for (u1, u2) in pts]
            table(["alpha1_x", "alpha2_x", "w"], data)
        else:
            data = [[x, wh.w_normalized(p, np.array([x]))] for x in xs]
            table(["x", "w"], data)
    elif fid == "phi-ratio":
        table(["d", "phi"], [[d, wh.phi_ratio_asymp(d)] for d in (args.d or [1.0])])
    elif fid == "phi-alt":
        nu = np.asarray(args.nu, dtype=float)
        sys_ = SimpleSystem.preset(args.preset)
        x = _xvec(args)
        table(["phi_alt"], [[wh.phi_alt(sys_, nu, x)]])
    elif fid == "vt-integral":
        a, b = args.nu[:2]
        y1, y2 = args.y[:2]
        table(["a", "b", "y1", "y2", "w"], [[a, b, y1, y2, wh.a2_vt_integral(a, b, y1, y2)]])
    elif fid == "closed23":
        y1, y2 = args.y[:2]
        table(["y1", "y2", "W"], [[y1, y2, wh.a2_closed_23(y1, y2)]])
    elif fid == "leading":
        y1, y2 = args.y[:2]
        table(["y1", "y2", "leading"], [[y1, y2, wh.a2_leading(y1, y2)]])
    elif fid == "laplace":
        y1, y2 = args.y[:2] if args.y else (2.0, 2.0)
        a, b = (args.nu[:2] if args.nu else (1.0, 1.0))
        table(["y1", "y2", "laplace"],
              [[y1, y2, a2lab.a2_joint_laplace(y1, y2, ab=(a, b))]])
    elif fid == "gamma-ln":
        table(["z", "gamma_ln"], [[z, gamma_ln(z)] for z in args.z])
    elif fid == "bessel-i":
        table(["nu", "z", "I"], [[args.nu[0], z, bessel_i(args.nu[0], z)] for z in args.z])
    elif fid == "bessel-k":
        table(["nu", "z", "K"], [[args.nu[0], z, bessel_k(args.nu[0], z)] for z in args.z])
    elif fid == "whittaker-w":
        k, m = args.nu[:2]
        table(["k", "mu", "x", "W"], [[k, m, z, whittaker_w(k, m, z)] for z in args.z])
    elif fid == "whittaker-m":
        k, m = args.nu[:2]
        table(["k", "mu", "x", "M"], [[k, m, z, whittaker_m(k, m, z)] for z in args.z])
    elif fid == "parabolic-d":
        table(["nu", "x", "D"], [[args.nu[0], z, parabolic_d(args.nu[0], z)] for z in args.z])
    elif fid == "theta":
        r, t = args.z[:2]
        table(["r", "t", "theta"], [[r, t, theta_hw(r, t)]])
    elif fid == "kernel-grid":
        x = _xvec(args)
        lo, hi, cnt = args.grid
        grid = a2lab.kernel_grid(x, (lo, hi, int(cnt)), (lo, hi, int(cnt)))
        import io
        buf = io.StringIO()
        grid.to_csv(buf)
        if args.out:
            _atomic_write(args.out, buf.getvalue())
            side = dict(grid.sidecar())
            side.update(_manifest(args, None, t0))
            _atomic_write(args.out + ".manifest.json", json.dumps(side, indent=2) + "\n")
        else:
            print(buf.getvalue(), end="")
    else:
        print(f"error: unknown function id {fid!r}", file=sys.stderr)
        return 2
    return 0


# -- mc ----------------------------------------------------------------------

def _load_config_file(path: str):
    with open(path) as fh:
        doc = json.load(fh)
    bad = sorted(set(doc) - _CONFIG_KEYS)
    if bad:
        raise _ConfigError(f"unknown config keys: {', '.join(bad)}")
    return doc


class _ConfigError(Exception):
    pass


def cmd_mc(args) -> int:
    t0 = time.time()
    cfgdoc = {}
    if args.config:
        cfgdoc = _load_config_file(args.config)
    seed = args.seed if args.seed is not None else cfgdoc.get("seed")
    if seed is None:
        seed = int.from_bytes(os.urandom(4), "little")
    n_paths = args.paths or cfgdoc.get("paths", 10_000)
    dt = args.dt or cfgdoc.get("dt", 1e-3)
    horizon = args.horizon or cfgdoc.get("horizon", 25.0)
    tail_tol = cfgdoc.get("tail_tol", 1e-3)
    cfg = st.McConfig(seed=seed, n_paths=n_paths, dt=dt, horizon=horizon,
                      tail_tol=tail_tol)
    exp = args.experiment

    if exp == "laplace":
        mu = args.mu if args.mu is not None else 1.0
        x = args.x[0] if args.x else 0.0
        if args.preset == "A1":
            fam = GeneralFunctionalFamily([[1.0]], [math.sqrt(0.5)])
            est = st.mc_laplace(fam, np.array([mu]), fam.theta, np.array([x]), cfg)
        elif args.preset == "Morse":
            fam = GeneralFunctionalFamily.morse()
            est = st.mc_laplace(fam, np.array([mu]), fam.theta, np.array([x]), cfg)
        elif args.preset == "A2":
            B = st.A2DriftField.plane_basis()
            coords = a2lab.A2Coordinates.from_ab(1.0, 1.0)
            fam = GeneralFunctionalFamily(SimpleSystem.preset("A2").alphas @ B.T,
                                          [math.sqrt(2.0)] * 2)
            xs = args.x if args.x else [0.0, 0.0]
            x3 = wh.a2_x_from_alphas(xs[0], xs[1] if len(xs) > 1 else xs[0])
            est = st.mc_laplace(fam, B @ coords.mu, fam.theta, B @ x3, cfg)
        else:
            raise WhittakerLabError(f"mc laplace: unsupported preset {args.preset}")
        payload = {"format_version": FORMAT_VERSION, "experiment": exp,
                   **est.to_dict(), "seed": seed,
                   "config": {"paths": n_paths, "dt": dt, "horizon": horizon,
                              "tail_tol": tail_tol}}
        _emit(args, payload, _manifest(args, seed, t0))
        return 0 if est.tail_bound <= tail_tol else 4
    if exp == "entrance-limit":
        depth = args.depth if args.depth is not None else 6.0
        kappa = args.kappa if args.kappa is not None else 0.0
        e1, e2, targets = a2lab.entrance_limit_mc(depth, kappa, cfg)
        payload = {"format_version": FORMAT_VERSION, "experiment": exp,
                   "estimates": [e1.to_dict(), e2.to_dict()],
                   "targets": list(targets), "seed": seed,
                   "config": {"paths": n_paths, "dt": dt, "depth": depth,
                              "kappa": kappa}}
        _emit(args, payload, _manifest(args, seed, t0))
        return 0
    if exp == "a1-exact":
        mu = args.mu if args.mu is not None else 1.0
        samples = st.sample_a1_exact(mu, cfg)
        payload = {"format_version": FORMAT_VERSION, "experiment": exp,
                   "mean": float(samples.mean()),
                   "std_error": float(samples.std(ddof=1) / math.sqrt(len(samples))),
                   "n": len(samples), "tail_bound": 0.0, "seed": seed,
                   "config": {"paths": n_paths}}
        _emit(args, payload, _manifest(args, seed, t0))
        return 0
    print(f"error: unknown experiment {exp!r}", file=sys.stderr)
    return 2


# -- verify --------------------------------------------------------------------

def cmd_verify(args) -> int:
    t0 = time.time()
    results = acceptance.run_suite(args.suite, printer=print)
    payload = {
        "format_version": FORMAT_VERSION,
        "suite": args.suite,
        "criteria": [{"id": r.cid, "name": r.name, "passed": r.passed,
                      "metric": r.metric, "tol": r.tol, "detail": r.detail}
                     for r in results],
        "all_passed": all(r.passed for r in results),
    }
    if args.out:
        _atomic_write(args.out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
        _atomic_write(args.out + ".manifest.json",
                      json.dumps(_manifest(args, None, t0), indent=2, sort_keys=True) + "\n")
    return 0 if payload["all_passed"] else 5


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="whittakerlab",
        description="Class-one Whittaker functions and the exponential-functional lab")
    sub = p.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("eval", help="evaluate a function on a small grid")
    pe.add_argument("function", help="function id (w, phi-ratio, phi-alt, vt-integral, "
                                     "closed23, leading, laplace, gamma-ln, bessel-i, "
                                     "bessel-k, whittaker-w, whittaker-m, parabolic-d, "
                                     "theta, kernel-grid)")
    pe.add_argument("--preset", default="A1",
                    choices=["A1", "A2", "Morse", "rank1-embedded-R2"])
    pe.add_argument("--nu", type=float, nargs="*", default=None)
    pe.add_argument("--x", type=float, nargs="*", default=None)
    pe.add_argument("--y", type=float, nargs="*", default=None)
    pe.add_argument("--z", type=float, nargs="*", default=None)
    pe.add_argument("--d", type=float, nargs="*", default=None)
    pe.add_argument("--grid", type=float, nargs=3, default=(-6.0, 6.0, 61),
                    metavar=("MIN", "MAX", "COUNT"))
    pe.add_argument("--json", action="store_true")
    pe.add_argument("--out", default=None)
    pe.set_defaults(func=cmd_eval)

    pm = sub.add_parser("mc", help="run a Monte Carlo experiment")
    pm.add_argument("experiment", choices=["laplace", "entrance-limit", "a1-exact"])
    pm.add_argument("--preset", default="A1",
                    choices=["A1", "A2", "Morse", "rank1-embedded-R2"])
    pm.add_argument("--mu", type=float, default=None)
    pm.add_argument("--theta", type=float, nargs="*", default=None)
    pm.add_argument("--x", type=float, nargs="*", default=None)
    pm.add_argument("--depth", type=float, default=None)
    pm.add_argument("--kappa", type=float, default=None)
    pm.add_argument("--seed", type=int, default=None)
    pm.add_argument("--paths", type=int, default=None)
    pm.add_argument("--dt", type=float, default=None)
    pm.add_argument("--horizon", type=float, default=None)
    pm.add_argument("--config", default=None, help="JSON config file")
    pm.add_argument("--json", action="store_true")
    pm.add_argument("--out", default=None)
    pm.set_defaults(func=cmd_mc)

    pv = sub.add_parser("verify", help="run the acceptance suite")
    pv.add_argument("suite", choices=["fast", "full"])
    pv.add_argument("--out", default=None)
    pv.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except WhittakerLabError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
