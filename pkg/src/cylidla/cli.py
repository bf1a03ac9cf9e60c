"""Command-line interface.

    cylidla spectrum --config run.toml --out out/
    cylidla simulate --config run.toml --out out/
    cylidla experiment gff_clt --config run.toml --out out/ --threads 4
    cylidla validate --config run.toml --out out/
    cylidla export-geometry out/snapshot.txt --out out/
    cylidla bounds --N 64 --T 4096 --nu 1 --C 1
"""

import argparse
import csv
import datetime as dt
import hashlib
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__, _rng, experiments, graphs, idla, observables, spectral
from .config import experiment_config, load_config
from .errors import (BudgetExceeded, ConfigError, CylidlaError, InvalidParameter, MissingInput,
                     NumericFailure)

EXIT_CODES = {
    ConfigError: 3,
    MissingInput: 4,
    InvalidParameter: 5,
    NumericFailure: 6,
    BudgetExceeded: 7,
}
EXIT_FAILED_CHECKS = 1


def exit_code_for(exc):
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            return code
    return 8


def _now():
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)
    return path


@dataclass
class RunManifest:
    command: str
    config: dict
    config_hash: str
    started: str
    version: str = __version__
    finished: str = None
    outputs: list = field(default_factory=list)

    def add(self, path):
        self.outputs.append({"path": str(path), "sha256": _sha256(path)})

    def write(self, out_dir):
        self.finished = _now()
        doc = {"tool": "cylidla", **self.__dict__}
        return write_atomic(Path(out_dir) / "manifest.json",
                            json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def config_hash(doc):
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def _graph_from(doc):
    if "graph" not in doc:
        raise InvalidParameter("config needs a [graph] table")
    spec = dict(doc["graph"])
    return graphs.build_graph(spec.pop("family", None), **spec)


def _rows_to_csv(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def cmd_spectrum(doc, out, args):
    g = _graph_from(doc)
    opts = doc.get("spectrum", {})
    method = opts.get("method", "closed-form")
    if method == "closed-form":
        spec = spectral.spectrum_for(g)
    else:
        spec = spectral.decompose(g, method=method)
    a_N = opts.get("a_N", spectral.default_a_N(g, spec))
    rows = spectral.spectrum_rows(spec, a_N, opts.get("K"))
    cols = ("k", "lambda_k", "nu_k", "q_k", "q_k_rescaled", "gamma_k_estimate")
    p = write_atomic(out / "spectrum.csv", _rows_to_csv(cols, [[r[c] for c in cols] for r in rows]))
    bundle = spectral.scaling_bundle(g, K=min(opts.get("K", 4) or 4, g.N), a_N=a_N, spectrum=spec)
    q = write_atomic(out / "scaling.json", json.dumps(bundle.to_dict(), indent=2, sort_keys=True) + "\n")
    return [p, q], 0


def cmd_simulate(doc, out, args):
    g = _graph_from(doc)
    sim = doc.get("simulate", {})
    rng = doc.get("rng", {})
    seed = args.seed if args.seed is not None else rng.get("master_seed", 0)
    T = sim.get("T")
    if T is None:
        raise InvalidParameter("[simulate] needs T")
    opts = idla.EngineOptions(sim.get("mode", "layered"), rng.get("fastforward_eps", 1e-9),
                              rng.get("exact_excursions", False))
    if "stop_height" in sim:
        c, ledger, _ = idla.run_stopped(g, T, sim["stop_height"], seed, opts)
    else:
        c, _ = idla.run(g, T, seed, opts)
    p = out / "snapshot.txt"
    out.mkdir(parents=True, exist_ok=True)
    idla.write_snapshot(p, c, g, T)
    return [p], 0


def cmd_experiment(doc, out, args):
    cfg = experiment_config(doc, args.name, args.seed)
    res = experiments.run_experiment(cfg, threads=args.threads)
    p = write_atomic(out / f"{cfg.name}.csv", res.csv_text())
    q = write_atomic(out / f"{cfg.name}_summary.json", res.summary_json() + "\n")
    return [p, q], 0


def cmd_validate(doc, out, args):
    """Graph checks plus reduced abelian and hitting-law suites."""
    seed = args.seed if args.seed is not None else doc.get("rng", {}).get("master_seed", 0)
    ledger = []
    if "graph" in doc:
        rep = graphs.validate(_graph_from(doc))
        ledger.append({"check": "graph", "passed": rep.ok, "detail": rep.to_dict()})
    ab = experiments.exp_abelian_suite(experiments.ExperimentConfig(
        name="abelian", replicates=50, permutations=20, master_seed=seed))
    ledger.append({"check": "abelian", "passed": ab.passed, "detail": ab.summary})
    hz = experiments.exp_hzeta_validation(experiments.ExperimentConfig(
        name="hzeta", graph={"family": "cycle", "N": 8}, walks=20000, master_seed=seed))
    ledger.append({"check": "hzeta", "passed": hz.passed, "detail": hz.summary})
    ok = all(e["passed"] for e in ledger)
    p = write_atomic(out / "validate.json",
                     json.dumps({"passed": ok, "checks": ledger}, indent=2, sort_keys=True,
                                default=experiments._json_default) + "\n")
    return [p], 0 if ok else EXIT_FAILED_CHECKS


def geometry_records(cluster, g):
    emb = graphs.embedding(g)
    return [{"x": int(x), "y": int(y), **emb[x]} for x, y in cluster.sites().tolist()]


def cmd_export_geometry(doc, out, args):
    c, family, params, T = idla.read_snapshot(args.snapshot)
    g = graphs.build_graph(family, **params)
    doc_out = {"graph": g.label, "N": g.N, "T": T, "sites": geometry_records(c, g)}
    p = write_atomic(out / "geometry.json", json.dumps(doc_out, indent=1) + "\n")
    return [p], 0


def cmd_bounds(args):
    rep = observables.bound_report(args.N, args.T, args.nu, args.C, args.tau_mix)
    print(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker processes (0 = auto)")
    common.add_argument("--seed", type=int, default=None, help="override the master seed")
    p = argparse.ArgumentParser(prog="cylidla", description=__doc__.splitlines()[0] if __doc__ else None)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="eigen-data table of the base graph")
    sub.add_parser("simulate", parents=[common], help="grow one cluster and write a snapshot")
    e = sub.add_parser("experiment", parents=[common], help="run a Monte Carlo experiment")
    e.add_argument("name", choices=experiments.EXPERIMENTS)
    sub.add_parser("validate", parents=[common], help="run the property suite")
    g = sub.add_parser("export-geometry", parents=[common], help="per-site geometry JSON")
    g.add_argument("snapshot", type=Path)
    b = sub.add_parser("bounds", help="closed-form bounds for given N, T")
    b.add_argument("--N", type=int, required=True)
    b.add_argument("--T", type=int, required=True)
    b.add_argument("--nu", type=float, default=1.0)
    b.add_argument("--C", type=float, default=1.0)
    b.add_argument("--tau-mix", type=float, default=None)
    return p


COMMANDS = {
    "spectrum": cmd_spectrum,
    "simulate": cmd_simulate,
    "experiment": cmd_experiment,
    "validate": cmd_validate,
    "export-geometry": cmd_export_geometry,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "bounds":
            return cmd_bounds(args)
        if args.threads < 0:
            raise InvalidParameter("--threads must be >= 0")
        doc = load_config(args.config) if args.config is not None else {}
        if args.command not in ("export-geometry", "validate") and args.config is None:
            raise InvalidParameter(f"{args.command} needs --config")
        if args.seed is not None:
            doc.setdefault("rng", {})["master_seed"] = args.seed
        out = args.out
        if "output" in doc and args.out == Path("out"):
            out = Path(doc["output"].get("dir", out))
        manifest = RunManifest(args.command, doc, config_hash(doc), _now())
        paths, code = COMMANDS[args.command](doc, out, args)
        for path in paths:
            manifest.add(path)
        manifest.write(out)
        return code
    except CylidlaError as exc:
        code = exit_code_for(exc)
        record = {"error": exc.kind, "message": str(exc), "exit_code": code}
        print(json.dumps(record), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
