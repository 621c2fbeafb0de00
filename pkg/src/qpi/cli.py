"""Command-line entry point: ``qpi construct|simulate|sweep|analyze|channel``.

Exit codes: 0 success (including sweeps with no valid alpha), 2 argument or
parameter errors, 3 I/O errors. Any option can also come from a
``--config`` file of ``key=value`` lines; flags given on the command line win.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional

from . import __version__
from .automorphism import MonomialSet, blta_size, block_profile, is_decreasing_monomial
from .channels import DEFAULT_MU, ResourceError, make_bsc, virtual_channel_params
from .construction import POLAR, RM, CodeSpec, build_code, interpolation_fractions, mixing_factor
from .simulator import (
    SIM_COLUMNS, SIM_SCHEMA, SWEEP_COLUMNS, SimConfig, alpha_sweep,
    estimate_logical_error_rate, random_alphas, write_rows,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3

ANALYZE_SCHEMA = "qpi-analyze/1"
ANALYZE_COLUMNS = ("alpha", "q", "n", "k1", "k2", "decreasing", "profile", "aut_size",
                   "mixing_factor", "f_polar", "f_rm")
SWEEP_SCHEMA = "qpi-sweep/1"

_SIM_HELP = f"CSV schema {SIM_SCHEMA}: " + ", ".join(SIM_COLUMNS)
_SWEEP_HELP = (f"CSV schema {SWEEP_SCHEMA}: " + ", ".join(SWEEP_COLUMNS)
               + "; a closing '#alpha_star=<value|none>' line echoes the best alpha")
_ANALYZE_HELP = (f"CSV schema {ANALYZE_SCHEMA}: " + ", ".join(ANALYZE_COLUMNS)
                 + "; profile parts are dash-separated, aut_size is an exact integer")
_CHANNEL_HELP = "CSV schema qpi-channel/1: index, p_err[, bhattacharyya]"


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


@dataclass
class RunManifest:
    command: str
    parameters: dict
    master_seed: Optional[int]
    version: str = __version__
    started: str = ""
    finished: str = ""
    outputs: list[str] = field(default_factory=list)

    def write(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2)
            fh.write("\n")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _on_off(text: str) -> bool:
    value = text.strip().lower()
    if value in ("on", "true", "1", "yes"):
        return True
    if value in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def _alpha_list(text: str) -> list[float]:
    try:
        return [float(a) for a in text.split(",") if a.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad alpha list {text!r}") from None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file supplying defaults for any option")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpi", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="build a code and write its JSON spec")
    _add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k1", type=int, required=True)
    p.add_argument("--k2", type=int, required=True)
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--method", choices=(POLAR, RM), default=POLAR)
    p.add_argument("--mu", type=int, default=DEFAULT_MU, help="channel output budget")
    p.add_argument("--out", help="CodeSpec JSON path")

    p = sub.add_parser("simulate", help="Monte Carlo logical X error rate of one spec",
                       epilog=_SIM_HELP)
    _add_common(p)
    p.add_argument("--spec", required=True, help="CodeSpec JSON")
    p.add_argument("--q", type=float, help="physical error rate (default: the spec's q)")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--list-size", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--coset", type=_on_off, default=True, help="on|off")
    p.add_argument("--max-failures", type=int, help="stop early after this many failures")
    p.add_argument("--threads", type=int, help="worker threads (default QPI_THREADS or CPU count)")
    p.add_argument("--out", help="CSV path; the row is appended")

    p = sub.add_parser("sweep", help="simulate a grid of alpha values and report alpha*",
                       epilog=_SWEEP_HELP)
    _add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k1", type=int, required=True)
    p.add_argument("--k2", type=int, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--alphas", type=_alpha_list, help="comma-separated alpha grid")
    p.add_argument("--random-alphas", type=int, help="draw this many alphas from (0, 1]")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--list-size", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--coset", type=_on_off, default=True, help="on|off")
    p.add_argument("--mu", type=int, default=DEFAULT_MU)
    p.add_argument("--max-failures", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="CSV path")

    p = sub.add_parser("analyze", help="mixing factor, interpolation fractions, automorphisms",
                       epilog=_ANALYZE_HELP)
    _add_common(p)
    p.add_argument("--spec", required=True)
    p.add_argument("--ref-polar", help="alpha=1 spec for f_polar")
    p.add_argument("--ref-rm", help="RM spec for f_rm")
    p.add_argument("--fractions", action="store_true",
                   help="require both reference specs and report f_polar/f_rm")
    p.add_argument("--out", help="CSV path")

    p = sub.add_parser("channel", help="virtual-channel error probabilities of BSC(alpha q)",
                       epilog=_CHANNEL_HELP)
    _add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--mu", type=int, default=DEFAULT_MU)
    p.add_argument("--bhattacharyya", action="store_true", help="also emit Bhattacharyya bounds")
    p.add_argument("--out", help="CSV path (default: standard output)")
    return parser


def read_config(path: str) -> dict[str, str]:
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            values[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return values


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv[1:])
    if not known.config or not argv or argv[0] not in _COMMANDS:
        return parser.parse_args(argv)
    try:
        values = read_config(known.config)
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}", EXIT_IO) from exc
    subparser = parser._subparsers._group_actions[0].choices[argv[0]]
    actions = {a.dest: a for a in subparser._actions}
    extra = []
    for key, value in values.items():
        action = actions.get(key)
        if action is None or key in ("help", "config"):
            raise CliError(f"unknown config key {key!r} for {argv[0]}")
        if action.nargs == 0:
            if _on_off(value):
                extra.append(action.option_strings[0])
        else:
            extra.extend([action.option_strings[0], value])
    # config values go first so that later command-line flags override them
    return parser.parse_args(argv[:1] + extra + argv[1:])


def _load_spec(path: str) -> CodeSpec:
    try:
        return CodeSpec.from_json(path)
    except OSError as exc:
        raise CliError(f"cannot read spec: {exc}", EXIT_IO) from exc
    except ValueError as exc:
        raise CliError(f"invalid spec {path}: {exc}") from exc


def _summary(spec: CodeSpec) -> str:
    return f"valid={str(spec.valid).lower()} k={spec.k} mixing_factor={mixing_factor(spec)}"


def cmd_construct(args) -> list[str]:
    spec = build_code(args.n, args.k1, args.k2, q=args.q, alpha=args.alpha,
                      method=args.method, mu=args.mu)
    outputs = []
    if args.out:
        spec.to_json(args.out, indent=1)
        outputs.append(args.out)
    print(_summary(spec))
    return outputs


def cmd_simulate(args) -> list[str]:
    spec = _load_spec(args.spec)
    if not spec.valid:
        raise CliError("spec is not a valid CSS code (F_Z and F_X intersect)")
    q = spec.q if args.q is None else args.q
    config = SimConfig(spec=spec, q=q, list_size=args.list_size, trials=args.trials,
                       master_seed=args.seed, coset_aggregation=args.coset,
                       max_failures=args.max_failures)
    result = estimate_logical_error_rate(config, args.threads)
    row = result.row()
    if args.out:
        write_rows(args.out, [row], SIM_COLUMNS, SIM_SCHEMA, append=True)
    else:
        print(",".join(SIM_COLUMNS))
    print(",".join(str(row[c]) for c in SIM_COLUMNS))
    return [args.out] if args.out else []


def cmd_sweep(args) -> list[str]:
    if (args.alphas is None) == (args.random_alphas is None):
        raise CliError("give exactly one of --alphas or --random-alphas")
    alphas = args.alphas if args.alphas is not None else random_alphas(args.random_alphas, args.seed)
    sweep = alpha_sweep(args.n, args.k1, args.k2, args.q, alphas=alphas, trials=args.trials,
                        list_size=args.list_size, seed=args.seed, coset_aggregation=args.coset,
                        mu=args.mu, max_failures=args.max_failures, threads=args.threads)
    star = sweep.alpha_star
    star_text = "none" if star is None else repr(star)
    rows = sweep.rows()
    if args.out:
        write_rows(args.out, rows, SWEEP_COLUMNS, SWEEP_SCHEMA)
        with open(args.out, "a") as fh:
            fh.write(f"#alpha_star={star_text}\n")
    else:
        print(",".join(SWEEP_COLUMNS))
        for row in rows:
            print(",".join(str(row[c]) for c in SWEEP_COLUMNS))
    print(f"alpha_star={star_text}")
    return [args.out] if args.out else []


def cmd_analyze(args) -> list[str]:
    spec = _load_spec(args.spec)
    want_fractions = args.fractions or args.ref_polar or args.ref_rm
    if want_fractions and not (args.ref_polar and args.ref_rm):
        raise CliError("interpolation fractions need both --ref-polar and --ref-rm")
    mset = MonomialSet.from_spec(spec)
    decreasing = is_decreasing_monomial(mset)
    row = {
        "alpha": spec.alpha, "q": spec.q, "n": spec.n, "k1": spec.k1, "k2": spec.k2,
        "decreasing": decreasing, "profile": "", "aut_size": "",
        "mixing_factor": mixing_factor(spec), "f_polar": "", "f_rm": "",
    }
    if decreasing:
        profile = block_profile(mset)
        row["profile"] = str(profile)
        row["aut_size"] = str(blta_size(profile))
    if want_fractions:
        f_polar, f_rm = interpolation_fractions(spec, _load_spec(args.ref_polar),
                                                _load_spec(args.ref_rm))
        row["f_polar"], row["f_rm"] = f_polar, f_rm
    if args.out:
        write_rows(args.out, [row], ANALYZE_COLUMNS, ANALYZE_SCHEMA)
    else:
        print(",".join(ANALYZE_COLUMNS))
    print(",".join(str(row[c]) for c in ANALYZE_COLUMNS))
    return [args.out] if args.out else []


def cmd_channel(args) -> list[str]:
    p = args.alpha * args.q
    if not 0 <= args.alpha <= 1:
        raise CliError(f"alpha must lie in [0, 1], got {args.alpha}")
    if not 0 <= p <= 0.5:
        raise CliError(f"alpha * q = {p} must lie in [0, 1/2]")
    params = virtual_channel_params(make_bsc(p), args.n, args.mu,
                                    with_bhattacharyya=args.bhattacharyya)
    params = dataclasses.replace(params, alpha=args.alpha)
    if args.out:
        params.to_csv(args.out)
        return [args.out]
    params.to_csv(sys.stdout)
    return []


_COMMANDS = {
    "construct": cmd_construct,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "analyze": cmd_analyze,
    "channel": cmd_channel,
}


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except CliError as exc:
        print(f"qpi: error: {exc}", file=sys.stderr)
        return exc.code
    params = {k: v for k, v in vars(args).items() if k != "config"}
    manifest = RunManifest(command=args.command, parameters=params,
                           master_seed=getattr(args, "seed", None), started=_now())
    try:
        outputs = _COMMANDS[args.command](args)
    except CliError as exc:
        print(f"qpi: error: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, ResourceError) as exc:
        print(f"qpi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"qpi: error: {exc}", file=sys.stderr)
        return EXIT_IO
    if outputs:
        manifest.finished = _now()
        manifest.outputs = [os.path.abspath(o) for o in outputs]
        try:
            manifest.write(outputs[0] + ".manifest.json")
        except OSError as exc:
            print(f"qpi: error: cannot write manifest: {exc}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
