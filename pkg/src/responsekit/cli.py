"""Config-driven command line runner.

``responsekit <command> --config FILE [--seed N] [--out DIR]``

Every command reads a JSON config, writes its reports into ``--out`` and a
canonical copy of the config as ``config.json``. Files are staged in a
temporary directory and renamed into place once the command succeeds.
Failures print one JSON object on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
import traceback
from pathlib import Path as FsPath

import numpy as np

from . import acceptance
from .kernels import KernelSpec, gram, write_gram_csv
from .learn import fit, load_model, rmse, save_model, training_residual
from .paths import PathError, read_path_csv
from .response import (ImpulseSpec, VolterraKernels, compose_kernels, fdt_report,
                       volterra_eval, write_fdt_csv)
from .rng import derive_seed, max_workers
from .signature import signature, words, coeff
from .srnn import InitialState, SrnnParams, euler_maruyama, output_functional

COMMANDS = ("sig", "kernel", "simulate", "respond", "volterra", "fit", "predict", "repro")
_MISSING = object()


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field or '<root>'}: {message}")
        self.field = field
        self.message = message


class Section:
    """A JSON object plus its dotted location, for error messages."""

    def __init__(self, data, where: str = "", base: FsPath = FsPath(".")):
        if not isinstance(data, dict):
            raise ConfigError(where, "expected a JSON object")
        self.data = data
        self.where = where
        self.base = base

    def _loc(self, key: str) -> str:
        return f"{self.where}.{key}" if self.where else key

    def get(self, key: str, kind=None, default=_MISSING):
        if key not in self.data:
            if default is _MISSING:
                raise ConfigError(self._loc(key), "required field missing")
            return default
        value = self.data[key]
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if kind is not None and not isinstance(value, kind):
            names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
            raise ConfigError(self._loc(key), f"expected {names}, got {type(value).__name__}")
        return value

    def positive(self, key: str, kind=float, default=_MISSING):
        value = self.get(key, kind, default)
        if value is not None and value <= 0:
            raise ConfigError(self._loc(key), "must be positive")
        return value

    def section(self, key: str, default=_MISSING) -> "Section":
        return Section(self.get(key, dict, default), self._loc(key), self.base)

    def file(self, key: str) -> FsPath:
        p = FsPath(self.get(key, str))
        p = p if p.is_absolute() else self.base / p
        if not p.exists():
            raise ConfigError(self._loc(key), f"no such file or directory: {p}")
        return p

    def build(self, key: str, fn, *args):
        """Run a constructor, reporting its ValueError under this field."""
        try:
            return fn(*args)
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(self._loc(key), str(exc)) from exc


def canonical_config(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, indent=2) + "\n"


# --- config pieces -----------------------------------------------------------

def parse_srnn(sec: Section) -> SrnnParams:
    preset = sec.get("preset", str, None)
    if preset == "scalar_ou":
        p = sec.build("preset", SrnnParams.scalar_ou, sec.get("gamma", float, 1.0),
                      sec.get("sigma", float, 0.5), sec.get("c", float, 1.0))
    elif preset == "random_tanh":
        p = sec.build("preset", SrnnParams.random_tanh, sec.get("n", int),
                      sec.get("m", int), sec.get("sigma", float), sec.get("seed", int, 0))
    elif preset is None:
        body = {k: v for k, v in sec.data.items() if k != "stationary"}
        p = sec.build("", SrnnParams.from_dict, body)
    else:
        raise ConfigError(sec._loc("preset"), f"unknown preset {preset!r}")
    if sec.get("stationary", bool, False):
        if not p.is_linear:
            raise ConfigError(sec._loc("stationary"), "stationary start needs activation 'zero'")
        p = p.stationary()
    elif "init" in sec.data and preset is not None:
        init = sec.section("init")
        p = p.replace(init=init.build("", InitialState, init.get("kind", str, "point"),
                                      init.get("mean", list, None), init.get("cov", list, None)))
    return p


def parse_kernel(sec: Section) -> KernelSpec:
    return sec.build("", KernelSpec.from_dict, sec.data)


def path_files(sec: Section, key: str) -> list[FsPath]:
    """A directory of CSVs (sorted by name) or an explicit list of files."""
    value = sec.get(key, (str, list))
    loc = sec._loc(key)
    if isinstance(value, str):
        d = sec.file(key)
        files = sorted(d.glob("*.csv")) if d.is_dir() else [d]
    else:
        files = []
        for i, item in enumerate(value):
            if not isinstance(item, str):
                raise ConfigError(f"{loc}[{i}]", "expected a file name")
            f = FsPath(item) if FsPath(item).is_absolute() else sec.base / item
            if not f.exists():
                raise ConfigError(f"{loc}[{i}]", f"no such file: {f}")
            files.append(f)
    if not files:
        raise ConfigError(loc, "no path files found")
    return files


def load_paths(sec: Section, key: str):
    files = path_files(sec, key)
    out = []
    for f in files:
        try:
            out.append(read_path_csv(f))
        except (PathError, ValueError) as exc:
            raise ConfigError(sec._loc(key), f"{f.name}: {exc}") from exc
    return files, out


# --- commands ---------------------------------------------------------------

def cmd_sig(cfg: Section, seed: int, out: FsPath) -> dict:
    p = load_paths(cfg, "path")[1][0]
    level = cfg.get("level", int)
    s = cfg.build("level", signature, p, level)
    coeffs = {",".join(map(str, w)): coeff(s, w)
              for n in range(1, level + 1) for w in words(p.dim, n)}
    doc = json.loads(s.to_json())
    doc["coefficients"] = coeffs
    (out / "signature.json").write_text(json.dumps(doc, indent=1) + "\n")
    return {"dim": p.dim, "level": level}


def cmd_kernel(cfg: Section, seed: int, out: FsPath) -> dict:
    files, paths = load_paths(cfg, "paths")
    spec = parse_kernel(cfg.section("kernel", {}))
    g = cfg.build("paths", gram, paths, spec)
    write_gram_csv(g, out / "gram.csv")
    (out / "paths.txt").write_text("".join(f"{f.name}\n" for f in files))
    ev = np.linalg.eigvalsh(g)
    return {"n": len(paths), "min_eig": float(ev[0]), "max_eig": float(ev[-1])}


def _optional_input(cfg: Section):
    return load_paths(cfg, "input")[1][0] if "input" in cfg.data else None


def cmd_simulate(cfg: Section, seed: int, out: FsPath) -> dict:
    params = parse_srnn(cfg.section("srnn"))
    u = _optional_input(cfg)
    T, dt = cfg.positive("T"), cfg.positive("dt")
    K = cfg.get("K", int, 1000)
    keep = cfg.get("trajectories", int, 0)
    mc_seed = derive_seed(seed, "simulate")
    mean, se = cfg.build("", output_functional, params, u, T, dt, K, mc_seed)
    for k in range(keep):
        euler_maruyama(params, u, T, dt, mc_seed, k).to_csv(out / f"trajectory_{k}.csv")
    report = {"T": T, "dt": dt, "K": K, "mean": mean, "stderr": se}
    (out / "output.json").write_text(json.dumps(report, indent=1) + "\n")
    return report


def _linear_impulse(params: SrnnParams, direction, tau) -> float | None:
    """Exact response ``f . exp(-Gamma tau) C d`` for linear SRNNs with linear readouts."""
    from scipy.linalg import expm
    if not params.is_linear or params.readout.kind == "tanh":
        return None
    return float(params.readout.vector(params.n) @ expm(-params.gamma * tau)
                 @ params.C @ np.asarray(direction, dtype=float))


def cmd_respond(cfg: Section, seed: int, out: FsPath) -> dict:
    srnn_sec = cfg.section("srnn")
    params = parse_srnn(srnn_sec)
    direction = cfg.get("direction", list, [1.0] * params.m)
    if len(direction) != params.m:
        raise ConfigError(cfg._loc("direction"), f"need {params.m} components")
    taus = cfg.get("taus", list)
    imp = cfg.section("impulse", {})
    spec = imp.build("", ImpulseSpec, imp.get("eps", float, 0.05),
                     imp.get("width", float, None), imp.get("shape", str, "box"))
    rows = cfg.build("", fdt_report, params, direction, taus,
                     cfg.positive("s", float, 0.05), spec, cfg.positive("dt", float, 0.005),
                     cfg.get("K", int, 10_000), derive_seed(seed, "respond"))
    if params.is_linear:
        for r in rows:
            exact = _linear_impulse(params, direction, r["tau"])
            if exact is not None:
                r["analytic"] = exact
    write_fdt_csv(rows, out / "fdt.csv")
    return {"lags": len(rows)}


def cmd_volterra(cfg: Section, seed: int, out: FsPath) -> dict:
    if "compose" in cfg.data:
        comp = cfg.section("compose")
        F = comp.build("outer", VolterraKernels.load, comp.file("outer"))
        G = comp.build("inner", VolterraKernels.load, comp.file("inner"))
        H = comp.build("", compose_kernels, F, G)
        H.save(out / "composed.json")
        return {"orders": H.orders, "grid_points": len(H.grid)}
    k = cfg.build("kernels", VolterraKernels.load, cfg.file("kernels"))
    u = load_paths(cfg, "input")[1][0]
    if u.dim != 1:
        raise ConfigError(cfg._loc("input"), f"Volterra input must be scalar, got {u.dim} channels")
    times = cfg.get("times", list, None)
    ts = k.grid if times is None else np.asarray(times, dtype=float)
    vals = [cfg.build("times", volterra_eval, k, u, float(t)) for t in ts]
    np.savetxt(out / "volterra.csv", np.column_stack([ts, vals]), delimiter=",",
               header="t,value", comments="", fmt="%.17g")
    return {"points": len(ts)}


def _targets(cfg: Section, paths, seed: int, label: str) -> np.ndarray:
    if "targets" in cfg.data:
        y = np.asarray(cfg.get("targets", list), dtype=float)
        if len(y) != len(paths):
            raise ConfigError(cfg._loc("targets"), f"{len(y)} targets for {len(paths)} paths")
        return y
    teacher_sec = cfg.section("teacher")
    teacher = parse_srnn(teacher_sec.section("srnn"))
    T = teacher_sec.positive("T", float, paths[0].t1)
    dt = teacher_sec.positive("dt", float, 0.02)
    K = teacher_sec.get("K", int, 10_000)
    return np.array([teacher_sec.build("", output_functional, teacher, p, T, dt, K,
                                       derive_seed(seed, f"{label}-{i}"))[0]
                     for i, p in enumerate(paths)])


def cmd_fit(cfg: Section, seed: int, out: FsPath) -> dict:
    _, paths = load_paths(cfg, "paths")
    y = _targets(cfg, paths, seed, "target")
    spec = parse_kernel(cfg.section("kernel")) if "kernel" in cfg.data else None
    ridge = cfg.get("ridge", float, 0.0)
    model = cfg.build("", fit, paths, y, spec, ridge)
    save_model(model, out / "model.json")
    res = training_residual(model, y)
    report = {"n": len(paths), "ridge": ridge, "jitter": model.jitter,
              "train_rmse": float(np.sqrt(np.mean(res ** 2)))}
    if "test_paths" in cfg.data:
        _, test = load_paths(cfg, "test_paths")
        sub = Section({k: v for k, v in cfg.data.items() if k != "targets"}
                      | ({"targets": cfg.data["test_targets"]}
                         if "test_targets" in cfg.data else {}), cfg.where, cfg.base)
        yt = _targets(sub, test, seed, "test-target")
        report["test_rmse"] = rmse(model.predict_many(test), yt)
    (out / "fit.json").write_text(json.dumps(report, indent=1) + "\n")
    return report


def cmd_predict(cfg: Section, seed: int, out: FsPath) -> dict:
    model = cfg.build("model", load_model, cfg.file("model"))
    files, paths = load_paths(cfg, "paths")
    pred = model.predict_many(paths)
    with open(out / "predictions.csv", "w") as fh:
        fh.write("path,prediction\n")
        for f, v in zip(files, pred):
            fh.write(f"{f.name},{float(v)!r}\n")
    return {"n": len(paths)}


def cmd_repro(cfg: Section, seed: int, out: FsPath) -> dict:
    only = cfg.get("criteria", list, None)
    if only is not None:
        bad = [c for c in only if c not in {n for n, *_ in acceptance.CRITERIA}]
        if bad:
            raise ConfigError(cfg._loc("criteria"), f"unknown criteria {bad}")
        only = set(only)
    results = acceptance.run(seed, only, echo=lambda s: print(s, flush=True))
    with open(out / "acceptance.csv", "w") as fh:
        fh.write("criterion,name,passed,seconds,budget\n")
        for r in results:
            fh.write(f"{r.number},{r.name},{int(r.ok)},{r.seconds:.3f},{r.budget:g}\n")
    details = {str(r.number): r.details for r in results}
    (out / "acceptance.json").write_text(json.dumps(details, indent=1, default=float) + "\n")
    failed = [r.number for r in results if not r.ok]
    return {"passed": len(results) - len(failed), "failed": failed}


HANDLERS = {"sig": cmd_sig, "kernel": cmd_kernel, "simulate": cmd_simulate,
            "respond": cmd_respond, "volterra": cmd_volterra, "fit": cmd_fit,
            "predict": cmd_predict, "repro": cmd_repro}


# --- plumbing ---------------------------------------------------------------

def _gnuplot_copies(stage: FsPath) -> None:
    for f in list(stage.glob("*.csv")):
        lines = f.read_text().splitlines()
        if not lines:
            continue
        body = [ln.replace(",", " ") for ln in lines]
        if any(c.isalpha() for c in lines[0]):
            body[0] = "# " + body[0]
        (stage / (f.stem + ".dat")).write_text("\n".join(body) + "\n")


def _publish(stage: FsPath, out: FsPath) -> list[str]:
    names = []
    for f in sorted(stage.iterdir()):
        os.replace(f, out / f.name)
        names.append(f.name)
    return names


def _fail(kind: str, message: str, field: str | None = None, code: int = 1) -> int:
    err = {"error": kind, "message": message}
    if field is not None:
        err["field"] = field
    print(json.dumps(err), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="responsekit", description=__doc__.splitlines()[0])
    ap.add_argument("command", help="one of: " + ", ".join(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON config file")
    ap.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--gnuplot", action="store_true",
                    help="also write whitespace-separated .dat copies of CSV reports")
    ap.add_argument("--traceback", action="store_true", help=argparse.SUPPRESS)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command not in HANDLERS:
        return _fail("UnknownCommand", f"unknown command {args.command!r}; "
                     f"expected one of {', '.join(COMMANDS)}", code=2)
    cfg_path = FsPath(args.config)
    try:
        raw = json.loads(cfg_path.read_text())
    except OSError as exc:
        return _fail("ConfigError", str(exc), "", code=2)
    except json.JSONDecodeError as exc:
        return _fail("ConfigError", f"invalid JSON: {exc}", "", code=2)
    out = FsPath(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stage = FsPath(tempfile.mkdtemp(prefix=".staging-", dir=out))
    try:
        cfg = Section(raw, "", cfg_path.parent)
        seed = args.seed if args.seed is not None else cfg.get("seed", int, 0)
        report = HANDLERS[args.command](cfg, seed, stage)
        if args.gnuplot:
            _gnuplot_copies(stage)
        canon = dict(raw)
        canon["seed"] = seed
        (stage / "config.json").write_text(canonical_config(canon))
        files = _publish(stage, out)
    except ConfigError as exc:
        return _fail("ConfigError", exc.message, exc.field, code=2)
    except Exception as exc:  # noqa: BLE001 - every failure becomes a JSON error
        if args.traceback:
            traceback.print_exc()
        return _fail(type(exc).__name__, str(exc))
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    summary = {"command": args.command, "seed": seed, "threads": max_workers(),
               "files": files, "report": report}
    print(json.dumps(summary, default=float))
    if args.command == "repro" and report["failed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
