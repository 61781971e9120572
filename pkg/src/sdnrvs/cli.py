"""Batch command line: ``sdnrvs <command> [flags]``.

Commands are ``enumerate``, ``pf``, ``gendata``, ``train``, ``reconfigure``
and ``oracle``.  Every flag may also come from a JSON manifest given with
``--manifest``; flags on the command line win.  Each output file records
the tool version and a hash of the effective manifest, which covers the
parameters and the contents of every input file.

Exit codes: 0 success, 2 missing or unreadable input, 3 failed
precondition, 4 degenerate data, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (CaseFormatError, DimensionError, EmptyDatasetError, EnumerationTruncated,
                     InfeasibleTopologyError, IngestionError, NoFeasibleTopologyError, NumericError,
                     PreconditionError, TopologyError, TrainingError)
from .network import enumerate_radial, is_radial, load_network, opened_ids, random_radial
from .powerflow import SolverOptions, check_limits, jacobian, sigma_min, solve_pf, write_solution_json, write_summary_csv
from .scenario import ScenarioSet, case_profile, ingest_timeseries, kmedoids_reduce, load_scenarios
from .stability import Evaluator

EXIT_OK, EXIT_MISSING, EXIT_PRECONDITION, EXIT_DEGENERATE, EXIT_NUMERIC = 0, 2, 3, 4, 5

DEFAULTS = {
    "network": None,
    "scenarios": None,
    "k": None,
    "kl": 0.5,
    "kv": -0.5,
    "kr": 1.0,
    "nmax": 5,
    "seed": 0,
    "evaluator": "exact",
    "model": None,
    "dataset": None,
    "out": None,
    "power_factor": 0.95,
    "tolerance": 1e-8,
    "hours": 168,
    "open": None,
    "meshed": False,
    "cap": None,
    "list": False,
    "configs": 250,
    "samples_per_config": 20,
    "epochs": 30,
    "batch_size": 20,
    "learning_rate": 1e-3,
    "arch": "cnn",
    "c_l_max": None,
    "i_v_max": None,
}

# manifest entries naming files whose contents enter the hash
FILE_KEYS = ("network", "scenarios", "model", "dataset")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


# --- manifest -------------------------------------------------------------

def _file_digest(path) -> str | None:
    p = Path(path)
    if p.is_file():
        return hashlib.sha256(p.read_bytes()).hexdigest()
    if p.with_suffix(".bin").is_file() and p.with_suffix(".json").is_file():
        h = hashlib.sha256(p.with_suffix(".json").read_bytes())
        h.update(p.with_suffix(".bin").read_bytes())
        return h.hexdigest()
    return None


def manifest_hash(command: str, params: dict) -> str:
    """SHA-256 of the command, its parameters and its input file contents."""
    doc = {"command": command, "params": {k: v for k, v in params.items() if k != "out"}}
    doc["inputs"] = {k: _file_digest(params[k]) for k in FILE_KEYS if params.get(k)}
    blob = json.dumps(doc, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def resolve_params(args: argparse.Namespace) -> dict:
    """Defaults, then the manifest file, then explicit flags."""
    params = dict(DEFAULTS)
    if args.manifest:
        mpath = Path(args.manifest)
        if not mpath.is_file():
            raise CliError(f"manifest not found: {mpath}", EXIT_MISSING)
        with open(mpath) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise CliError(f"{mpath}: line {exc.lineno}: {exc.msg}", EXIT_MISSING) from exc
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise CliError(f"{mpath}: unknown manifest keys {sorted(unknown)}", EXIT_PRECONDITION)
        params.update(doc)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    return params


def _provenance(command, params):
    return {"tool": "sdnrvs", "version": __version__, "command": command,
            "manifest_hash": manifest_hash(command, params), "seed": params["seed"]}


def _comment(prov):
    return f"sdnrvs {prov['version']} {prov['command']} manifest {prov['manifest_hash']}"


# --- input helpers ----------------------------------------------------------

def _require(params, key):
    if params.get(key) in (None, ""):
        raise CliError(f"--{key.replace('_', '-')} is required", EXIT_MISSING)
    return params[key]


def _network(params):
    src = _require(params, "network")
    p = Path(src)
    bundled = Path(__file__).parent / "cases" / f"{src}.json"
    if not p.exists() and not bundled.exists():
        raise CliError(f"network file not found: {src}", EXIT_MISSING)
    return load_network(src)


def _samples(params, net):
    """Samples from a time-series CSV, a scenario JSON, or a bundled profile.

    ``--scenarios synthetic`` draws ``--hours`` hourly samples from the
    bundled profile of the network; ``nominal`` is its peak-load sample.
    """
    src = _require(params, "scenarios")
    kr = float(params["kr"])
    if src in ("synthetic", "nominal"):
        from .scenario import nominal_sample
        from .synthetic import synthetic_timeseries

        try:
            prof = case_profile(net.name)
        except FileNotFoundError as exc:
            raise CliError(f"no bundled profile for network {net.name!r}", EXIT_MISSING) from exc
        if src == "nominal":
            return [nominal_sample(net, prof)], None
        return synthetic_timeseries(net, prof, int(params["hours"]), int(params["seed"]),
                                    float(params["power_factor"]), kr), None
    p = Path(src)
    if not p.is_file():
        raise CliError(f"scenario file not found: {src}", EXIT_MISSING)
    if p.suffix == ".json":
        scen = load_scenarios(p)
        samples = [s.scaled(renewable=kr) for s in scen.scenarios]
        return samples, np.asarray(scen.pi)
    return ingest_timeseries(p, net, float(params["power_factor"]), kr), None


def _scenario_set(params, net) -> ScenarioSet:
    samples, pi = _samples(params, net)
    k = params.get("k")
    if k is not None and int(k) < len(samples):
        if pi is not None:
            raise CliError("--k cannot re-cluster a weighted scenario file", EXIT_PRECONDITION)
        return kmedoids_reduce(samples, int(k), int(params["seed"]))
    if pi is not None:
        return ScenarioSet(tuple(samples), pi)
    return ScenarioSet.uniform(samples)


def _alpha(params, net):
    open_arg = params.get("open")
    if open_arg in (None, ""):
        return net.all_closed()
    if open_arg == "normal":
        try:
            return net.with_open(case_profile(net.name)["normally_open"])
        except FileNotFoundError as exc:
            raise CliError(f"no normally-open list for network {net.name!r}", EXIT_MISSING) from exc
    ids = [int(x) for x in str(open_arg).replace(",", " ").split()]
    if any(not 0 <= e < net.n_branch for e in ids):
        raise CliError(f"--open names a branch outside 0..{net.n_branch - 1}", EXIT_PRECONDITION)
    return net.with_open(ids)


def _opts(params):
    return SolverOptions(tolerance=float(params["tolerance"]))


def _weights(params):
    from .reconfig import ObjectiveWeights

    return ObjectiveWeights(float(params["kl"]), float(params["kv"]), params.get("c_l_max"), params.get("i_v_max"))


def _evaluator(params):
    mode = params["evaluator"]
    if mode == "exact":
        return Evaluator.exact()
    if mode == "surrogate":
        from .surrogate import load_model

        path = Path(_require(params, "model"))
        if not path.is_file():
            raise CliError(f"model file not found: {path}", EXIT_MISSING)
        return Evaluator.surrogate(load_model(path))
    raise CliError(f"unknown evaluator {mode!r}", EXIT_PRECONDITION)


def _outdir(params):
    out = Path(params["out"] or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


# --- commands -------------------------------------------------------------

def cmd_enumerate(params, out=None):
    net = _network(params)
    cap = params.get("cap")
    configs = []
    count = 0
    for alpha in enumerate_radial(net, None if cap is None else int(cap)):
        count += 1
        if params["list"]:
            configs.append(opened_ids(alpha))
    print(count, file=out)
    if params.get("out"):
        d = _outdir(params)
        prov = _provenance("enumerate", params)
        _write_json(d / "enumerate.json", {**prov, "network": net.name, "count": count})
        if params["list"]:
            with open(d / "configs.csv", "w") as fh:
                fh.write(f"# {_comment(prov)}\nconfig,opened\n")
                for k, ids in enumerate(configs):
                    fh.write(f"{k},{' '.join(map(str, ids))}\n")
    return EXIT_OK


def cmd_pf(params, out=None):
    net = _network(params)
    scen = _scenario_set(params, net)
    alpha = _alpha(params, net)
    meshed = bool(params["meshed"])
    if not meshed and not is_radial(net, alpha):
        raise PreconditionError("configuration is not radial; pass --meshed to solve it anyway")
    d = _outdir(params)
    prov = _provenance("pf", params)
    sol_dir = d / "solutions"
    sol_dir.mkdir(exist_ok=True)
    rows = []
    for w, (p, sample) in enumerate(scen):
        sol = solve_pf(net, alpha, sample, _opts(params), meshed)
        if sol.converged:
            idx = sigma_min(jacobian(net, alpha, sol))
            nviol = len(check_limits(sol, net))
        else:
            idx, nviol = float("nan"), -1
        write_solution_json(sol_dir / f"scenario_{w:04d}.json", sol, net,
                            {**prov, "scenario": w, "probability": float(p), "label": sample.label,
                             "sigma_min": idx})
        rows.append((w, sol.loss if sol.converged else float("nan"), idx, nviol))
    write_summary_csv(d / "summary.csv", rows, _comment(prov))
    print(f"{len(rows)} scenarios solved, {sum(r[3] < 0 for r in rows)} not converged", file=out)
    return EXIT_OK


def cmd_gendata(params, out=None):
    from .surrogate import generate_dataset, save_dataset

    net = _network(params)
    samples, _ = _samples(params, net)
    rng = np.random.default_rng(int(params["seed"]))
    configs = [random_radial(net, rng) for _ in range(int(params["configs"]))]
    data = generate_dataset(net, configs, samples, _opts(params), int(params["samples_per_config"]),
                            int(params["seed"]))
    d = _outdir(params)
    prov = _provenance("gendata", params)
    bin_path, json_path = save_dataset(data, d / "dataset", prov)
    print(f"{len(data)} labeled samples written to {json_path}", file=out)
    return EXIT_OK


def cmd_train(params, out=None):
    from .surrogate import Hyperparams, consistency, load_dataset, predict_batch, save_model, train

    path = Path(_require(params, "dataset"))
    if not (path.is_file() or path.with_suffix(".json").is_file()):
        raise CliError(f"dataset not found: {path}", EXIT_MISSING)
    data = load_dataset(path)
    if len(data) == 0:
        raise EmptyDatasetError("dataset holds no rows")
    hp = Hyperparams(learning_rate=float(params["learning_rate"]), epochs=int(params["epochs"]),
                     batch_size=int(params["batch_size"]), arch=params["arch"])
    model = train(data, hp, int(params["seed"]))
    pred = predict_batch(model, data.X[data.test])
    held_out = consistency(data.y[data.test], pred) if data.test.sum() >= 2 else float("nan")
    d = _outdir(params)
    prov = _provenance("train", params)
    save_model(model, d / "model.json", prov)
    meta = model.metadata
    metrics = {**prov, "train_mse": meta["train_mse"], "test_mse": meta["test_mse"],
               "train_rmse": meta["train_rmse"], "test_rmse": meta["test_rmse"],
               "test_consistency": held_out, "n_train": meta["n_train"], "n_test": meta["n_test"]}
    _write_json(d / "metrics.json", metrics)
    print(f"held-out consistency {held_out:.2f} %", file=out)
    return EXIT_OK


def cmd_reconfigure(params, out=None):
    from .reconfig import one_stage_sbr, two_stage_sbr

    net = _network(params)
    scen = _scenario_set(params, net)
    ev = _evaluator(params)
    weights = _weights(params)
    if net.n_redundant == 1:
        res = one_stage_sbr(net, scen, weights, ev, _opts(params))
    else:
        res = two_stage_sbr(net, scen, weights, ev, int(params["nmax"]), _opts(params))
    d = _outdir(params)
    prov = _provenance("reconfigure", params)
    res.write_json(d / "sbr_result.json", {**prov, "evaluator": ev.mode, "scenarios": len(scen)})
    res.write_trace_csv(d / "sbr_trace.csv", _comment(prov))
    print(f"open {list(res.opened)} objective {res.objective:.6g}", file=out)
    return EXIT_OK


def cmd_oracle(params, out=None):
    from .oracle import brute_force_optimum
    from .reconfig import resolve_weights

    net = _network(params)
    scen = _scenario_set(params, net)
    ev = Evaluator.exact()
    weights = _weights(params)
    weights.check_orientation(ev.kind)
    weights = resolve_weights(weights, net, net.all_closed(), scen, ev, _opts(params))
    cap = params.get("cap")
    report = brute_force_optimum(net, scen, weights, ev, _opts(params), None if cap is None else int(cap))
    d = _outdir(params)
    prov = _provenance("oracle", params)
    report.write_csv(d / "oracle.csv", _comment(prov))
    best = None if report.best_alpha is None else list(opened_ids(report.best_alpha))
    _write_json(d / "oracle.json", {**prov, "best_opened": best,
                                    "best_objective": report.best_objective if best is not None else None,
                                    "configurations": len(report.rows), "infeasible": report.infeasible,
                                    "C_l_max": weights.C_l_max, "I_v_max": weights.I_v_max})
    if best is None:
        raise NoFeasibleTopologyError("no radial configuration is feasible")
    print(f"open {best} objective {report.best_objective:.6g} over {len(report.rows)} configurations", file=out)
    return EXIT_OK


COMMANDS = {
    "enumerate": cmd_enumerate,
    "pf": cmd_pf,
    "gendata": cmd_gendata,
    "train": cmd_train,
    "reconfigure": cmd_reconfigure,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="JSON manifest; explicit flags override it")
    common.add_argument("--network", help="case JSON file or bundled case name (ieee33, ieee123)")
    common.add_argument("--scenarios", help="time-series CSV, scenario JSON, 'synthetic' or 'nominal'")
    common.add_argument("--k", type=int, help="number of representative scenarios (k-medoids)")
    common.add_argument("--kl", type=float, help="loss weight")
    common.add_argument("--kv", type=float, help="stability weight (negative for sigma_min)")
    common.add_argument("--kr", type=float, help="renewable scaling factor")
    common.add_argument("--nmax", type=int, help="outer close-and-open iterations")
    common.add_argument("--seed", type=int)
    common.add_argument("--evaluator", choices=("exact", "surrogate"))
    common.add_argument("--model", help="trained model JSON")
    common.add_argument("--out", help="output directory")
    common.add_argument("--power-factor", dest="power_factor", type=float)
    common.add_argument("--tolerance", type=float, help="power-flow mismatch tolerance")
    common.add_argument("--c-l-max", dest="c_l_max", type=float)
    common.add_argument("--i-v-max", dest="i_v_max", type=float)

    parser = argparse.ArgumentParser(prog="sdnrvs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"sdnrvs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", parents=[common], help="count radial configurations")
    p.add_argument("--cap", type=int)
    p.add_argument("--list", action="store_true", default=None, help="also write configs.csv")

    p = sub.add_parser("pf", parents=[common], help="power flow per scenario")
    p.add_argument("--open", help="branch ids to open, comma separated, or 'normal'")
    p.add_argument("--meshed", action="store_true", default=None)
    p.add_argument("--hours", type=int)

    p = sub.add_parser("gendata", parents=[common], help="labeled dataset for the surrogate")
    p.add_argument("--configs", type=int, help="random radial configurations")
    p.add_argument("--samples-per-config", dest="samples_per_config", type=int)
    p.add_argument("--hours", type=int)

    p = sub.add_parser("train", parents=[common], help="train the surrogate")
    p.add_argument("--dataset", help="dataset stem, .bin or .json")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--arch", choices=("cnn", "mlp"))

    p = sub.add_parser("reconfigure", parents=[common], help="stability-aware reconfiguration")
    p.add_argument("--hours", type=int)

    p = sub.add_parser("oracle", parents=[common], help="exhaustive search over radial configurations")
    p.add_argument("--cap", type=int)
    p.add_argument("--hours", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        params = resolve_params(args)
        return COMMANDS[args.command](params)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_MISSING
    except (CaseFormatError, IngestionError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (EmptyDatasetError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (NumericError, InfeasibleTopologyError, NoFeasibleTopologyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (PreconditionError, TopologyError, DimensionError, EnumerationTruncated, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
