"""Command-line interface: ``tndpc {cluster,baseline,entropy,sweep,generate}``.

Every option can also come from a flat ``key = value`` config file passed with
``--config``; flags on the command line win over the file. Exit codes: 0 on
success, 1 for configuration errors, 2 for data errors, 3 for numerical
failures. Errors are reported as a single line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .baseline import DpcBaselineParams, dpc_cluster
from .datasets import SYNTHETIC_SHAPES, LabeledDataset, generate_synthetic, load_csv, save_dataset, save_result
from .dpclus import MODES, DpcParams, build_connectivity, merge_clusters, run_pipeline
from .encoding import encode_rows, minmax_normalize
from .exceptions import ContractError, DataError, NumericalError, ParameterError, StageError
from .metrics import evaluate
from .plotting import line_svg, scatter_svg
from .train import TrainConfig, train_mps

logger = logging.getLogger("tndpc")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


def _flag(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _float_list(value: str) -> list:
    return [float(v) for v in value.split(",") if v.strip()]


def _int_list(value: str) -> list:
    return [int(v) for v in value.split(",") if v.strip()]


# key -> (parser, default); the keys double as config-file keys
OPTIONS = {
    "data": (str, None),
    "generate": (str, None),
    "seed": (int, 0),
    "label_col": (str, None),
    "header": (str, "auto"),
    "dc_percent": (float, None),  # command-specific default, see _dc_default
    "fd": (float, 0.99),
    "bond": (int, 8),
    "mode": (str, "dpc-consistent"),
    "sweeps": (int, 30),
    "lr": (float, 0.1),
    "tol": (float, 1e-6),
    "out": (str, "tndpc-out"),
    "plot": (_flag, False),
    "jobs": (int, None),
    "k": (int, 2),
    "kernel": (str, "gaussian"),
    "bonds": (_int_list, None),
    "dc_grid": (_float_list, None),
    "fd_grid": (_float_list, None),
}
_DC_DEFAULT = {"baseline": 0.02}


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    out = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}, line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in OPTIONS:
            raise ParameterError(f"{path}, line {lineno}: unknown key {key!r}")
        out[key] = _convert(key, value)
    return out


def _convert(key, value):
    parser = OPTIONS[key][0]
    try:
        return parser(value)
    except ValueError as exc:
        raise ParameterError(f"bad value for {key}: {value!r}") from exc


def resolve_config(args) -> dict:
    """Merge defaults, config file and command-line flags (in rising priority)."""
    cfg = {key: default for key, (_, default) in OPTIONS.items()}
    cfg["dc_percent"] = _DC_DEFAULT.get(args.command, 0.001)
    if getattr(args, "config", None):
        cfg.update(read_config(args.config))
    for key in OPTIONS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = _convert(key, value) if isinstance(value, str) else value
    return cfg


def _sniff_header(path) -> bool:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            first = next(csv.reader(fh), [])
    except (OSError, UnicodeDecodeError):
        return False
    try:
        [float(c) for c in first]
    except ValueError:
        return True
    return False


def load_dataset(cfg) -> LabeledDataset:
    if (cfg["data"] is None) == (cfg["generate"] is None):
        raise ParameterError("give exactly one of --data or --generate")
    if cfg["generate"] is not None:
        ds = generate_synthetic(cfg["generate"], cfg["seed"])
    else:
        header = cfg["header"]
        if header not in ("auto", "yes", "no"):
            raise ParameterError(f"header must be auto, yes or no, got {header!r}")
        has_header = _sniff_header(cfg["data"]) if header == "auto" else header == "yes"
        label_col = cfg["label_col"]
        if label_col is None and has_header:
            with open(cfg["data"], newline="", encoding="utf-8") as fh:
                names = [c.strip() for c in next(csv.reader(fh), [])]
            label_col = "label" if "label" in names else None
        ds = load_csv(cfg["data"], has_header=has_header, label_column=label_col)
    if ds.n < 2:
        raise DataError(f"dataset has {ds.n} point(s); need at least 2")
    return ds


def train_config(cfg, bond=None) -> TrainConfig:
    return TrainConfig(bond_cap=cfg["bond"] if bond is None else bond, max_sweeps=cfg["sweeps"],
                       learning_rate=cfg["lr"], convergence_tol=cfg["tol"], seed=cfg["seed"])


def dpc_params(cfg, bond=None, dc=None, fd=None) -> DpcParams:
    if cfg["mode"] not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {cfg['mode']!r}")
    return DpcParams(cfg["dc_percent"] if dc is None else dc, cfg["fd"] if fd is None else fd,
                     cfg["mode"], train_config(cfg, bond))


def _record(cfg, keys):
    return {k: cfg[k] for k in keys}


_CLUSTER_KEYS = ("data", "generate", "label_col", "dc_percent", "fd", "bond", "mode",
                 "sweeps", "lr", "tol")
_BASELINE_KEYS = ("data", "generate", "label_col", "dc_percent", "kernel", "k")


class _Labels:
    def __init__(self, final_labels, is_core=None):
        self.final_labels = final_labels
        self.is_core = is_core


def _metrics(labels, ds):
    out = {"num_clusters": int(np.unique(labels).size)}
    if ds.labels is not None:
        out.update(evaluate(labels, ds.labels))
    return out


def cmd_cluster(cfg) -> int:
    ds = load_dataset(cfg)
    out = run_pipeline(ds.features, dpc_params(cfg), n_jobs=cfg["jobs"])
    metrics = _metrics(out.result.final_labels, ds)
    metrics["sweeps_run"] = out.log.sweeps_run
    params = _record(cfg, _CLUSTER_KEYS) | {"provenance": ds.provenance}
    path = save_result(out.result, out.profile, metrics, cfg["out"], params, cfg["seed"])
    if cfg["plot"] and ds.m == 2:
        scatter_svg(ds.features, out.result.final_labels, path / "scatter.svg",
                    centers=out.result.centers, title=f"{ds.name}: {metrics['num_clusters']} clusters")
    _report(metrics)
    return EXIT_OK


def cmd_baseline(cfg) -> int:
    ds = load_dataset(cfg)
    params = DpcBaselineParams(cfg["dc_percent"], cfg["kernel"], cfg["k"])
    labels, centers = dpc_cluster(ds.features, params)
    metrics = _metrics(labels, ds)
    record = _record(cfg, _BASELINE_KEYS) | {"provenance": ds.provenance, "method": "dpc"}
    path = save_result(_Labels(labels), None, metrics, cfg["out"], record, cfg["seed"])
    if cfg["plot"] and ds.m == 2:
        scatter_svg(ds.features, labels, path / "scatter.svg", centers=centers,
                    title=f"{ds.name}: DPC, k={params.k}")
    _report(metrics)
    return EXIT_OK


def cmd_entropy(cfg) -> int:
    ds = load_dataset(cfg)
    bonds = cfg["bonds"] if cfg["bonds"] is not None else [cfg["bond"]]
    if not bonds:
        raise ParameterError("empty list of bond dimensions")
    states = encode_rows(minmax_normalize(ds.features).rows)
    runs = []
    for bond in bonds:
        try:
            _, log = train_mps(states, train_config(cfg, bond))
        except (NumericalError, ContractError) as exc:
            raise StageError(f"train D={bond}", exc) from exc
        runs.append({"bond": bond, "entropy": log.final_entropy_mid_bond,
                     "final_loss": log.loss_per_sweep[-1], "seed": cfg["seed"],
                     "params": _record(cfg, ("data", "generate", "sweeps", "lr", "tol"))})
        logger.info("D=%d: entropy %.6g", bond, log.final_entropy_mid_bond)
    path = Path(cfg["out"])
    path.mkdir(parents=True, exist_ok=True)
    (path / "entropy.json").write_text(json.dumps(runs, indent=2) + "\n", encoding="utf-8")
    if cfg["plot"]:
        line_svg([r["bond"] for r in runs], [r["entropy"] for r in runs], path / "entropy.svg",
                 title=f"{ds.name}: mid-bond entanglement entropy", xlabel="bond dimension D",
                 ylabel="entropy")
    for r in runs:
        print(f"D={r['bond']}\tentropy={r['entropy']:.6g}\tloss={r['final_loss']:.6g}")
    return EXIT_OK


SWEEP_COLUMNS = ("bond", "dc_percent", "f_d", "fmi", "ari", "nmi", "acc", "num_clusters",
                 "seed", "mode", "status")


def cmd_sweep(cfg) -> int:
    if cfg["bonds"] is None and cfg["dc_grid"] is None and cfg["fd_grid"] is None:
        raise ParameterError("sweep needs at least one of --bonds, --dc-grid, --fd-grid")
    bonds = cfg["bonds"] if cfg["bonds"] is not None else [cfg["bond"]]
    dcs = cfg["dc_grid"] if cfg["dc_grid"] is not None else [cfg["dc_percent"]]
    fds = cfg["fd_grid"] if cfg["fd_grid"] is not None else [cfg["fd"]]
    if not (bonds and dcs and fds):
        raise ParameterError("empty parameter grid")
    ds = load_dataset(cfg)
    rows, last_error = [], None
    for bond in bonds:
        for dc in dcs:
            # everything up to the merge is independent of f_d
            try:
                out = run_pipeline(ds.features, dpc_params(cfg, bond, dc, fds[0]), n_jobs=cfg["jobs"])
            except (StageError, ParameterError) as exc:
                last_error = exc
                rows += [_sweep_row(cfg, bond, dc, fd, status=f"error: {exc}") for fd in fds]
                continue
            r = out.result
            for fd in fds:
                try:
                    DpcParams(dc, fd, cfg["mode"])
                except ParameterError as exc:
                    last_error = exc
                    rows.append(_sweep_row(cfg, bond, dc, fd, status=f"error: {exc}"))
                    continue
                adj = build_connectivity(r.is_core, r.local_labels, out.fidelities, fd, cfg["mode"])
                _, labels = merge_clusters(adj, r.local_labels)
                rows.append(_sweep_row(cfg, bond, dc, fd, _metrics(labels, ds)))
    path = Path(cfg["out"])
    path.mkdir(parents=True, exist_ok=True)
    with (path / "sweep.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    for row in rows:
        print("\t".join(f"{k}={row[k]}" for k in SWEEP_COLUMNS if row[k] != ""))
    if all(row["status"] != "ok" for row in rows):
        raise last_error
    return EXIT_OK


def _sweep_row(cfg, bond, dc, fd, metrics=None, status="ok"):
    metrics = metrics or {}
    row = {"bond": bond, "dc_percent": repr(dc), "f_d": repr(fd), "seed": cfg["seed"],
           "mode": cfg["mode"], "status": status}
    for key in ("fmi", "ari", "nmi", "acc", "num_clusters"):
        value = metrics.get(key, "")
        row[key] = repr(value) if isinstance(value, float) else value
    return row


def cmd_generate(cfg) -> int:
    kind = cfg["generate"]
    if kind is None:
        raise ParameterError(f"--generate is required; choose from {sorted(SYNTHETIC_SHAPES)}")
    ds = generate_synthetic(kind, cfg["seed"])
    path = Path(cfg["out"])
    path.mkdir(parents=True, exist_ok=True)
    target = save_dataset(ds, path / f"{kind}.csv")
    print(target)
    return EXIT_OK


def _report(metrics):
    print("\t".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                    for k, v in metrics.items()))


COMMANDS = {"cluster": cmd_cluster, "baseline": cmd_baseline, "entropy": cmd_entropy,
            "sweep": cmd_sweep, "generate": cmd_generate}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--data", help="CSV file with one point per row")
    common.add_argument("--generate", metavar="KIND",
                        help=f"synthetic dataset: {', '.join(SYNTHETIC_SHAPES)}")
    common.add_argument("--seed", help="seed for generators and MPS initialization")
    common.add_argument("--label-col", dest="label_col",
                        help="label column name or index (default: 'label' if present)")
    common.add_argument("--header", choices=("auto", "yes", "no"), help="CSV header row")
    common.add_argument("--out", help="output directory")
    common.add_argument("--plot", action="store_const", const=True, help="write SVG plots")
    common.add_argument("-v", "--verbose", action="store_true")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--dc-percent", dest="dc_percent", help="cutoff quantile, as a fraction")
    model.add_argument("--fd", help="fidelity threshold for merging local clusters")
    model.add_argument("--bond", help="maximum bond dimension D")
    model.add_argument("--mode", choices=MODES, help="orientation of delta and connectivity")
    model.add_argument("--sweeps", help="maximum training sweeps")
    model.add_argument("--lr", help="gradient step size")
    model.add_argument("--tol", help="relative loss change that stops training")
    model.add_argument("--jobs", help="parallel workers for per-cluster training")

    parser = argparse.ArgumentParser(prog="tndpc", description=__doc__.split("\n", 1)[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("cluster", parents=[common, model], help="run the MPS clustering pipeline")
    base = sub.add_parser("baseline", parents=[common], help="classical density-peak clustering")
    base.add_argument("--dc-percent", dest="dc_percent", help="distance quantile for d_c")
    base.add_argument("--k", help="number of centers")
    base.add_argument("--kernel", choices=("cutoff", "gaussian"))
    ent = sub.add_parser("entropy", parents=[common, model], help="mid-bond entropy per D")
    ent.add_argument("--bonds", help="comma-separated bond dimensions")
    sweep = sub.add_parser("sweep", parents=[common, model], help="grid over D, d_c and f_d")
    sweep.add_argument("--bonds", help="comma-separated bond dimensions")
    sweep.add_argument("--dc-grid", dest="dc_grid", help="comma-separated d_c fractions")
    sweep.add_argument("--fd-grid", dest="fd_grid", help="comma-separated f_d values")
    sub.add_parser("generate", parents=[common], help="write a synthetic dataset as CSV")
    return parser


def exit_code_for(exc: BaseException) -> int:
    cause = exc.cause if isinstance(exc, StageError) else exc
    if isinstance(cause, DataError):
        return EXIT_DATA
    if isinstance(cause, (NumericalError, ContractError, FloatingPointError, np.linalg.LinAlgError)):
        return EXIT_NUMERIC
    return EXIT_CONFIG


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (StageError, ParameterError, DataError, NumericalError, ContractError,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        message = " ".join(str(exc).split())
        print(f"tndpc {args.command}: error: {message}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
