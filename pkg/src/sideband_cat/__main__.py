"""Command line: python -m sideband_cat {spectrum,envelope,simulate,tomo,budget}."""

import argparse
import json
import sys

from . import config, pipeline
from .errors import ConfigError, NonConvergence, SidebandCatError

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_NONCONVERGENCE = 0, 1, 2, 3


def build_parser():
    p = argparse.ArgumentParser(prog="sideband-cat", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI config file (defaults when omitted)")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, help="override run.seed")
        sp.add_argument("--threads", type=int, default=1, help="worker cap for parallel steps")
        return sp

    s = common(sub.add_parser("spectrum", help="squeezing spectrum table"))
    s.add_argument("--f-min-mhz", type=float, default=400.0)
    s.add_argument("--f-max-mhz", type=float, default=600.0)
    s.add_argument("--n-points", type=int, default=2001)
    common(sub.add_parser("envelope", help="cat envelope, trigger response and detector kernel"))
    common(sub.add_parser("simulate", help="synthetic traces and ground truth"))
    t = common(sub.add_parser("tomo", help="ICA and maximum-likelihood tomography"))
    t.add_argument("--data", required=True, help="directory written by simulate")
    common(sub.add_parser("budget", help="efficiency budget"))
    sub.add_parser("default-config", help="print the default config")
    return p


def run(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "default-config":
        sys.stdout.write(config.to_ini(config.ExperimentConfig()))
        return EXIT_OK
    try:
        cfg = config.load(args.config) if args.config else config.ExperimentConfig()
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.command == "spectrum":
            if args.f_max_mhz <= args.f_min_mhz or args.n_points < 2:
                raise ConfigError("empty frequency range")
            rep = pipeline.cmd_spectrum(cfg, args.out, args.f_min_mhz * 1e6,
                                        args.f_max_mhz * 1e6, args.n_points)
        elif args.command == "envelope":
            rep = pipeline.cmd_envelope(cfg, args.out)
        elif args.command == "simulate":
            rep = pipeline.cmd_simulate(cfg, args.out)
        elif args.command == "tomo":
            rep = pipeline.cmd_tomo(cfg, args.data, args.out, threads=args.threads)
        else:
            rep = pipeline.cmd_budget(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergence as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (SidebandCatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    summary = {k: v for k, v in rep.items() if k not in ("config", "rho", "I", "Q")}
    print(json.dumps(summary, indent=2, default=str))
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
