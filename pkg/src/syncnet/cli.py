"""Command-line entry point: ``syncnet <experiment> --config PATH [--seed S] [--out DIR]``."""
from __future__ import annotations

import argparse
import json
import sys
import traceback

from .bounds import coupling_bounds
from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment, trace_network
from .io import jsonable


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="syncnet",
                                description="Estimation by synchronization of coupled dynamical systems.")
    p.add_argument("experiment", choices=EXPERIMENTS + ("bounds",),
                   help="experiment to run; 'bounds' prints the critical coupling bounds")
    p.add_argument("--config", required=True, help="YAML experiment description")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="output directory (overrides config 'out')")
    return p


def _error(kind: str, message: str, code: int) -> int:
    record = {"status": "error", "error": kind, "message": message}
    print(json.dumps(record), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    experiment = "trace" if args.experiment == "bounds" else args.experiment
    try:
        cfg = ExperimentConfig.load(args.config, seed=args.seed, out=args.out,
                                    experiment=experiment)
        if args.experiment == "bounds":
            _, net, _, _, _ = trace_network(cfg)
            record = coupling_bounds(net).to_dict()
            record["K"] = net.K
        else:
            if cfg.out is None:
                return _error("ConfigError", "no output directory: pass --out or set 'out'", 2)
            result = run_experiment(cfg)
            record = {"status": "ok", "experiment": cfg.experiment, "out": str(cfg.out),
                      "summary": result.summary}
    except ValueError as exc:  # config, graph and model validation errors
        return _error(type(exc).__name__, str(exc), 2)
    except Exception as exc:  # noqa: BLE001 - report anything else as a failed run
        return _error(type(exc).__name__, f"{exc}\n{traceback.format_exc(limit=3)}", 1)
    print(json.dumps(jsonable(record), indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
