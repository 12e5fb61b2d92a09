"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 I/O or trace-format error.
Set AMBC_LOG_LEVEL (e.g. INFO, DEBUG) for progress logging.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from . import cepstrum as cep
from .config import SystemConfig, load_json
from .errors import ConfigError, TraceParseError
from .harness import SweepSpec, decode_trace, emit, run_ber_sweep
from .receiver import DETECTORS
from .sampling_spectrum import predict_aliases, validate_keys

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3
log = logging.getLogger("ambc")


def _system_config(path):
    return SystemConfig() if path is None else SystemConfig.from_dict(load_json(path))


def _cmd_ber_sweep(args):
    spec = SweepSpec.from_json(args.config)
    if args.workers is not None:
        spec = dataclasses.replace(spec, workers=args.workers)
    table = run_ber_sweep(spec)
    emit(table, args.out)
    log.info("wrote %d rows to %s", len(table), args.out)


def _cmd_spectrum(args):
    config = _system_config(args.config)
    table = predict_aliases(args.key, config, l_harm_max=args.harmonics, t0=args.t0)
    emit(table, args.out, "csv" if args.out.endswith(".csv") else None)


def _demo_truth(k, n, delta_f):
    ratios = [0.1 * 0.75**i for i in range(k)]
    bins = sorted({max(1, round((i + 1) * n / (2 * (k + 1)))) for i in range(k)})
    if len(bins) != k:
        raise ConfigError(f"cannot place {k} distinct devices in N={n} bins")
    rng = np.random.default_rng(1)
    phases = tuple(rng.uniform(-np.pi, np.pi, k + 1))
    return cep.DeviceGroundTruth.from_bins(ratios, bins, n, delta_f, phases=phases, tau0=2e-6)


def _cmd_cepstrum_demo(args):
    if args.devices < 0 or args.n < 3:
        raise ConfigError("need --devices >= 0 and --n >= 3")
    delta_f = 15e3
    truth = _demo_truth(args.devices, args.n, delta_f)
    noise_var = truth.amplitudes[0] ** 2 / 10 ** (args.snr_db / 10)
    frame = cep.synthesize_channel(truth, args.n, delta_f, noise_var, np.random.default_rng(args.seed))
    try:
        result = cep.process_frame(frame)
    except cep.OutOfRegimeError as exc:
        raise ConfigError(f"--snr-db too low for the log-noise series: {exc}") from exc
    if args.out.endswith(".csv"):
        result.to_csv(args.out)
        return
    bins = [int(round(q)) for q in truth.bins(args.n, delta_f)]
    found = cep.detect_devices(result.y, bins, result.effective_snr) if bins else []
    doc = {
        "n": args.n,
        "rho": result.effective_snr,
        "beta": list(result.trend),
        "devices": [
            {"q": d.q, "re": d.amplitude.real, "im": d.amplitude.imag, "gamma": d.gamma, "true_ratio": r}
            for d, r in zip(found, truth.ratios)
        ],
        "y": [[v.real, v.imag] for v in result.y],
    }
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _cmd_decode(args):
    config = _system_config(args.config)
    results = decode_trace(args.trace, config, args.detector)
    json.dump([r.to_dict() for r in results], sys.stdout, indent=2)
    sys.stdout.write("\n")


def _cmd_validate_keys(args):
    config = _system_config(args.config)
    report = validate_keys((args.f0, args.f1), config)
    doc = {
        "ok": report.ok,
        "out_of_band": list(report.out_of_band),
        "integer_ratio": report.integer_ratio,
        "cross_aliases": [
            {"source_hz": s, "alias_hz": f, "relative_magnitude": m, "victim_hz": v}
            for s, f, m, v in report.cross_aliases
        ],
    }
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")


def build_parser():
    p = argparse.ArgumentParser(prog="ambc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ber-sweep", help="Monte Carlo BER sweep from a JSON SweepSpec")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help=".csv or .json")
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=_cmd_ber_sweep)

    s = sub.add_parser("spectrum", help="predicted alias lines of one key")
    s.add_argument("--key", type=float, required=True, help="key frequency, Hz")
    s.add_argument("--out", required=True)
    s.add_argument("--config", default=None, help="SystemConfig JSON")
    s.add_argument("--harmonics", type=int, default=999)
    s.add_argument("--t0", type=float, default=0.0, help="wave phase offset, s")
    s.set_defaults(func=_cmd_spectrum)

    s = sub.add_parser("cepstrum-demo", help="synthesise K devices and run the complex cepstrum")
    s.add_argument("--devices", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--snr-db", type=float, required=True, help="direct-path SNR a0^2/sigma_z^2")
    s.add_argument("--out", required=True, help=".json, or .csv plus .json sidecar")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_cepstrum_demo)

    s = sub.add_parser("decode", help="decode a t_seconds,re,im trace")
    s.add_argument("--trace", required=True)
    s.add_argument("--detector", choices=DETECTORS, default="coherent")
    s.add_argument("--config", default=None)
    s.set_defaults(func=_cmd_decode)

    s = sub.add_parser("validate-keys", help="band, ratio and alias checks for a key pair")
    s.add_argument("--f0", type=float, required=True)
    s.add_argument("--f1", type=float, required=True)
    s.add_argument("--config", default=None)
    s.set_defaults(func=_cmd_validate_keys)
    return p


def main(argv=None) -> int:
    level = os.environ.get("AMBC_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (OSError, TraceParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
