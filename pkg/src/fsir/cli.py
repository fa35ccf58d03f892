"""Command line entry point ``fsir``.

Subcommands::

    fsir simulate          write a synthetic dataset in long CSV format
    fit                    estimate directions from a long CSV file
    replicate-table1       Monte Carlo accuracy table for complete/sparse designs
    rate-check             integrated-variance ratios across sample sizes
    link                   directions plus a local linear link surface

Every mode reads an optional JSON config (``--config``); command-line flags
override config fields.  Outputs go to ``--out`` and always include
``results.json``.  Failures exit nonzero and write ``error.json``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from .data import uniform_grid
from .edr import fit_edr, project
from .exceptions import ConfigInvalid, FsirError
from .experiments import RunSettings, rate_check, replicate_table1
from .io import ingest_csv, write_csv
from .kernels import SmootherSpec, bandwidth_rule
from .link import fit_link, surface_grid
from .simulation import SimConfig, simulate_dataset

log = logging.getLogger("fsir")

MODES = ("simulate", "fit", "replicate-table1", "rate-check", "link")
STOCHASTIC = ("simulate", "replicate-table1", "rate-check")
BANDWIDTHS = ("h_t", "h_y", "h_mu", "h_phi")


@dataclass
class ExperimentConfig:
    mode: str
    seed: int | None = None
    output_dir: str = "out"
    sim: dict = field(default_factory=dict)
    smoother: str | dict = "auto"
    bandwidth_constant: float = 1.0
    kernel: str = "epanechnikov"
    grid_size: int = 31
    fve_threshold: float = 0.95
    k: int = 1
    n_runs: int = 100
    ns: list | None = None
    designs: list = field(default_factory=lambda: ["complete", "sparse"])
    fixed_n_obs: int = 6
    n_eval: int = 1000
    workers: int = 1
    input: str | None = None
    interval: list | None = None
    surface_size: int = 20

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigInvalid(sorted(unknown)[0], "unknown config field")
        return cls(**d)

    def validate(self):
        if self.mode not in MODES:
            raise ConfigInvalid("mode", f"must be one of {MODES}")
        stochastic = self.mode in STOCHASTIC or (self.mode == "link" and self.input is None)
        if stochastic and self.seed is None:
            raise ConfigInvalid("seed", f"mode {self.mode!r} needs an explicit seed")
        if self.seed is not None and not 0 <= int(self.seed) < 2**64:
            raise ConfigInvalid("seed", "must be a 64-bit unsigned integer")
        if int(self.k) < 1:
            raise ConfigInvalid("k", "must be at least 1")
        if self.mode == "link" and self.k not in (1, 2):
            raise ConfigInvalid("k", "link mode supports one or two directions")
        if not 0 < float(self.fve_threshold) <= 1:
            raise ConfigInvalid("fve_threshold", "must lie in (0, 1]")
        if int(self.grid_size) < 3:
            raise ConfigInvalid("grid_size", "must be at least 3")
        if int(self.n_runs) < 2 and self.mode in ("replicate-table1", "rate-check"):
            raise ConfigInvalid("n_runs", "need at least 2 runs")
        if int(self.workers) < 1:
            raise ConfigInvalid("workers", "must be at least 1")
        if self.mode == "fit" and not self.input:
            raise ConfigInvalid("input", "fit mode needs an input CSV")
        bad = [d for d in self.designs if d not in ("complete", "sparse")]
        if bad:
            raise ConfigInvalid("designs", f"unknown design {bad[0]!r}")
        if isinstance(self.smoother, dict):
            missing = [b for b in BANDWIDTHS if b not in self.smoother]
            if missing:
                raise ConfigInvalid("smoother", f"missing bandwidth {missing[0]}")
            SmootherSpec(**{b: float(self.smoother[b]) for b in BANDWIDTHS})
        elif self.smoother != "auto":
            raise ConfigInvalid("smoother", "must be 'auto' or a mapping of bandwidths")

    def sim_config(self, **overrides):
        d = {"grid_size": self.grid_size, "seed": self.seed or 0}
        d.update(self.sim)
        d.update(overrides)
        return SimConfig(**d)

    def run_settings(self):
        sim = self.sim_config(n=2)
        return RunSettings(
            grid_size=self.grid_size,
            fve=self.fve_threshold,
            k=self.k,
            bandwidth_constant=self.bandwidth_constant,
            bandwidths=self.smoother if isinstance(self.smoother, dict) else None,
            noise_sd=sim.noise_sd,
            n_obs_range=sim.n_obs_range,
            n_eval=self.n_eval,
        )

    def spec_for(self, data):
        spec = bandwidth_rule(data, self.bandwidth_constant, self.kernel)
        if isinstance(self.smoother, dict):
            spec = SmootherSpec(**{b: float(self.smoother[b]) for b in BANDWIDTHS}, kernel=spec.kernel)
        return spec


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _version():
    try:
        return version("fsir")
    except PackageNotFoundError:
        return "unknown"


def _write_results(out, cfg, results):
    payload = {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "software_version": _version(),
        "config": asdict(cfg),
        "results": results,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    (out / "results.json").write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _g6(v):
    return f"{float(v):.6g}"


def _write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fit_payload(fit):
    return {
        "grid": fit.grid,
        "eigenvalues": fit.eigenvalues,
        "index_eigenvalues": fit.all_eigenvalues,
        "index_fve": fit.index_fve,
        "beta": fit.beta,
        "eta": fit.eta,
        "retained_rank": fit.retained_rank,
        "fve": fit.fve,
        "k": fit.k,
        "bandwidths": fit.spec.as_dict() if fit.spec else None,
        "diagnostics": fit.diagnostics,
    }


def _write_directions(path, fit):
    k = fit.k
    header = ["t"] + [f"beta{j + 1}" for j in range(k)] + [f"eta{j + 1}" for j in range(k)]
    rows = [[_g6(t)] + [_g6(v) for v in fit.beta[:, i]] + [_g6(v) for v in fit.eta[:, i]]
            for i, t in enumerate(fit.grid)]
    _write_table(path, header, rows)


def run_simulate(cfg, out):
    sim = cfg.sim_config()
    data, _ = simulate_dataset(sim)
    write_csv(data, out / "dataset.csv")
    return {"sim": asdict(sim), "n_subjects": data.n_subjects, "n_obs": data.n_obs}


def _load_input(cfg):
    return ingest_csv(cfg.input, tuple(cfg.interval) if cfg.interval else None)


def run_fit(cfg, out):
    data = _load_input(cfg)
    grid = uniform_grid(data.interval, cfg.grid_size)
    fit = fit_edr(data, cfg.spec_for(data), grid, cfg.fve_threshold, cfg.k)
    _write_directions(out / "directions.csv", fit)
    return _fit_payload(fit)


def run_table1(cfg, out):
    ns = cfg.ns or [100, 200]
    res = replicate_table1(ns, tuple(cfg.designs), cfg.n_runs, cfg.seed, cfg.run_settings(), cfg.workers)
    # full precision so that IMSE = ISB + IVAR survives the round trip
    _write_table(out / "table1.csv", ["n", "data_type", "correlation", "ISB", "IVAR", "IMSE"],
                 [[r["n"], r["data_type"]] + [repr(float(r[c])) for c in ("correlation", "ISB", "IVAR", "IMSE")]
                  for r in res["rows"]])
    cols = [f"{m['data_type'].lower()}_n{m['n']}" for m in res["beta_mean"]]
    rows = [[_g6(t), _g6(b)] + [_g6(m["values"][i]) for m in res["beta_mean"]]
            for i, (t, b) in enumerate(zip(res["grid"], res["true_beta"]))]
    _write_table(out / "beta_mean.csv", ["t", "true_beta"] + cols, rows)
    return res


def run_rate(cfg, out):
    ns = cfg.ns or [100, 200, 400]
    res = rate_check(ns, cfg.fixed_n_obs, cfg.n_runs, cfg.seed, cfg.run_settings(), cfg.workers)
    ns_sorted = res["ns"]
    _write_table(out / "ratios.csv", ["n_from", "n_to", "ivar_from", "ivar_to", "ratio"],
                 [[a, b, repr(res["ivar"][i]), repr(res["ivar"][i + 1]), repr(r)]
                  for i, (a, b, r) in enumerate(zip(ns_sorted[:-1], ns_sorted[1:], res["ratios"]))])
    return res


def _dense_on_grid(data, grid):
    """Per-subject linear interpolation of the observations onto the grid."""
    return np.vstack([np.interp(grid, t, x) for t, x in zip(data.times, data.values)])


def run_link(cfg, out):
    if cfg.input:
        data = _load_input(cfg)
        grid = uniform_grid(data.interval, cfg.grid_size)
        dense = _dense_on_grid(data, grid)
    else:
        sim = cfg.sim_config()
        data, dense = simulate_dataset(sim)
        grid = sim.grid
    fit = fit_edr(data, cfg.spec_for(data), grid, cfg.fve_threshold, cfg.k)
    indices = project(fit, dense)
    link = fit_link(indices, data.response)
    surf = surface_grid(link, cfg.surface_size)
    header = [f"index{j + 1}" for j in range(cfg.k)] + ["fitted"]
    _write_table(out / "surface.csv", header, [[_g6(v) for v in row] for row in surf])
    _write_directions(out / "directions.csv", fit)
    payload = _fit_payload(fit)
    payload.update({"fitted_error": link.fitted_error, "link_bandwidths": link.bandwidths})
    return payload


RUNNERS = {
    "simulate": run_simulate,
    "fit": run_fit,
    "replicate-table1": run_table1,
    "rate-check": run_rate,
    "link": run_link,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="fsir", description=__doc__.splitlines()[0])
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", dest="output_dir")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--fve", dest="fve_threshold", type=float)
    parser.add_argument("--k", type=int)
    parser.add_argument("--grid-size", dest="grid_size", type=int)
    parser.add_argument("--n-runs", dest="n_runs", type=int)
    parser.add_argument("--ns", type=int, nargs="+", help="sample sizes")
    parser.add_argument("--input", help="long-format CSV input")
    parser.add_argument("--n", type=int, help="subjects for simulate/link")
    parser.add_argument("--sparse", action="store_true", help="sparse design for simulate/link")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def load_config(args):
    d = {}
    if args.config:
        d = json.loads(Path(args.config).read_text())
    d["mode"] = args.mode
    for name in ("seed", "output_dir", "workers", "fve_threshold", "k", "grid_size", "n_runs", "ns", "input"):
        v = getattr(args, name)
        if v is not None:
            d[name] = v
    if args.n is not None or args.sparse:
        sim = dict(d.get("sim", {}))
        if args.n is not None:
            sim["n"] = args.n
        if args.sparse:
            sim["sparse"] = True
        d["sim"] = sim
    return ExperimentConfig.from_dict(d)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.output_dir or "out")
    try:
        cfg = load_config(args)
        out = Path(cfg.output_dir)
        cfg.validate()
        out.mkdir(parents=True, exist_ok=True)
        results = RUNNERS[cfg.mode](cfg, out)
        _write_results(out, cfg, results)
    except (FsirError, ValueError, OSError, json.JSONDecodeError, TypeError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc),
                  "field": getattr(exc, "field", None)}
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(json.dumps(record, indent=2) + "\n")
        except OSError:
            pass
        print(json.dumps(record), file=sys.stderr)
        return 2 if isinstance(exc, ConfigInvalid) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
