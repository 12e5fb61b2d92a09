"""Where the 300 Hz key lands after irregular CRS sampling.

Samples arrive twice per 0.5 ms slot, the second one 35.6 us late. The late
sample breaks the uniform 4 kHz grid and adds lines shifted by odd multiples
of 2 kHz, the strongest of which sits exactly at 2 kHz. The script simulates
8 s of the key on the grid, takes the spectrum at the true sample instants
and prints it next to the predicted alias table.

    python demos/02_alias_spectrum.py [--key 650]
"""

import argparse

import numpy as np

from ambc.channel import sample_instants
from ambc.config import SystemConfig
from ambc.sampling_spectrum import crs_spectrum, predict_aliases, validate_keys
from ambc.waveforms import square_wave


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--key", type=float, default=300.0)
    ap.add_argument("--t0", type=float, default=1e-4, help="wave phase, s")
    ap.add_argument("--lines", type=int, default=10)
    args = ap.parse_args()

    cfg = SystemConfig()
    t = sample_instants(int(8.0 / cfg.t_slot), cfg)
    x = square_wave(args.key, t - args.t0).astype(float)
    freqs, spec = crs_spectrum(x, cfg)
    df = freqs[1]
    table = predict_aliases(args.key, cfg, t0=args.t0)

    print(f"{'freq Hz':>9} {'predicted':>10} {'measured':>10}  origin")
    for e in table.strongest(args.lines):
        k = int(round(e.freq / df))
        print(f"{e.freq:9.1f} {abs(e.weight):10.2f} {abs(spec[k]):10.2f}  {e.origin}")

    uniform = predict_aliases(args.key, cfg.replace(delta_t=0.0), t0=args.t0)
    print(f"\nlines with dT = 35.6 us: {len(table)}, with uniform sampling: {len(uniform)}")
    print("default key pair check:", validate_keys(cfg.keys, cfg))


if __name__ == "__main__":
    main()
