"""Command-line entry point: ``ncsq run | synth | dict``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import stats
from .dictionary import dump_dictionary
from .errors import ConfigInvalid, NumericalError
from .experiments import ExperimentSpec, PRESETS, emit_outputs, preset, run_experiment
from .network import IIDDropout, mss_spectral_radius
from .plant import spectral_radius
from .sim import Design

log = logging.getLogger("ncsq")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def load_spec(preset_name=None, config=None, **overrides) -> ExperimentSpec:
    data = {}
    if preset_name:
        data = preset(preset_name).to_dict()
    if config:
        try:
            with open(config, encoding="utf-8") as fh:
                data.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {config}: {exc}") from exc
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentSpec.from_dict(data)
    except (TypeError, KeyError, ValueError) as exc:
        if isinstance(exc, ConfigInvalid):
            raise
        raise ConfigInvalid(str(exc)) from exc


def cmd_run(args) -> int:
    spec = load_spec(args.preset, args.config, runs=args.runs, steps=args.steps,
                     master_seed=args.seed, out_dir=args.out)
    log.info("running %s: %d runs x %d steps", spec.name, spec.runs, spec.steps)
    table = run_experiment(spec, jobs=args.jobs)
    paths = emit_outputs(table, spec.out_dir)
    for key in ("csv", "json", "plot"):
        print(paths[key])
    return 0


def _fmt(a) -> str:
    return np.array2string(np.asarray(a), precision=6, suppress_small=True, max_line_width=120)


def cmd_synth(args) -> int:
    spec = load_spec(args.preset, args.config)
    plant, weights, channel = spec.build_plant(), spec.build_weights(), spec.build_channel()
    design = Design(plant, weights, channel)
    model = design.model
    print("K =")
    print(_fmt(design.K))
    print(f"rho(Abar0) = {spectral_radius(model.Abar0):.12g}")
    if isinstance(channel, IIDDropout):
        print(f"rho(Psi) = {mss_spectral_radius(model.Abar0, model.Abar1, channel.p_d):.12g}")
        Qu = design.single_state_qu(channel.p_d)
    else:
        for j, pd in enumerate(channel.p_d, start=1):
            print(f"rho(Psi) [state {j}, p_d={pd:g}] = "
                  f"{mss_spectral_radius(model.Abar0, model.Abar1, pd):.12g}")
        Qu = stats.two_state_stats(model, design.K, channel, plant.sigma2_w).Q_u
    print("Q_u =")
    print(_fmt(Qu))
    return 0


def cmd_dict(args) -> int:
    spec = load_spec(args.preset, args.config)
    if not spec.families or not (spec.rates or args.rate):
        raise ConfigInvalid("config needs at least one family and one rate")
    fam = spec.families[0]
    if args.family:
        matches = [f for f in spec.families if f.family == args.family.upper()]
        fam = matches[0] if matches else type(fam)(args.family.upper())
    rate = args.rate if args.rate is not None else spec.rates[0]
    design = Design(spec.build_plant(), spec.build_weights(), spec.build_channel())
    dicts = design.dictionaries(fam.dictionary(rate), spec.master_seed, args.run_index)
    if len(dicts) == 1:
        dump_dictionary(dicts[0], args.out)
        print(args.out)
    else:
        for j, D in enumerate(dicts, start=1):
            path = f"{args.out}.state{j}"
            dump_dictionary(D, path)
            print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ncsq", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write CSV/JSON/gnuplot outputs")
    run.add_argument("--preset", choices=sorted(PRESETS))
    run.add_argument("--config")
    run.add_argument("--runs", type=int)
    run.add_argument("--steps", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--jobs", type=int, default=1)
    run.set_defaults(func=cmd_run)

    synth = sub.add_parser("synth", help="print K, rho(Abar0), rho(Psi) and Q_u")
    synth.add_argument("--config")
    synth.add_argument("--preset", choices=sorted(PRESETS))
    synth.set_defaults(func=cmd_synth)

    dic = sub.add_parser("dict", help="dump a dictionary in the binary format")
    dic.add_argument("--config")
    dic.add_argument("--preset", choices=sorted(PRESETS))
    dic.add_argument("--out", required=True)
    dic.add_argument("--family")
    dic.add_argument("--rate", type=float)
    dic.add_argument("--run-index", type=int, default=0)
    dic.set_defaults(func=cmd_dict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run" and not (args.preset or args.config):
        parser.error("run needs --preset or --config")
    if args.command in ("synth", "dict") and not (args.preset or args.config):
        parser.error(f"{args.command} needs --config or --preset")
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"ncsq: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"ncsq: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
