"""Separating backscatter devices by delay with the complex cepstrum.

Three tags at different extra delays add echoes to the direct-path channel.
The log of the frequency response turns each echo into a single cepstral
peak, at a quefrency equal to the delay in samples, with height equal to the
device-to-direct amplitude ratio. Noise sets a floor of 1/(N rho); the
complex cepstrum keeps twice the peak-to-floor ratio of the real one.

    python demos/03_cepstrum.py
"""

import numpy as np

from ambc import cepstrum as cep

N, DF = 64, 15e3
RATIOS, BINS = (0.1, 0.07, 0.05), (3, 7, 12)


def main():
    truth = cep.DeviceGroundTruth.from_bins(RATIOS, BINS, N, DF, phases=(0.4, -1.3, 2.2, 0.9), tau0=1.7e-6)
    clean = cep.process_frame(cep.synthesize_channel(truth, N, DF, 0.0))
    print("noiseless cepstrum, strongest quefrencies:")
    order = np.argsort(-np.abs(clean.y[1 : N // 2]))[:5] + 1
    for q in order:
        print(f"  q={q:2d} |y|={abs(clean.y[q]):.4f}")
    print("  expected:", dict(zip(BINS, np.round(np.abs(truth.expected_peaks()), 4))))

    rho = 100.0
    nv = cep.noise_var_for_rho(truth, N, DF, rho)
    frames = cep.synthesize_channel(truth, N, DF, nv, np.random.default_rng(0), n_frames=2000)
    y = cep.cepstrum_batch(frames)
    l_i, _ = cep.complex_log(frames)
    y_real, _ = cep.real_cepstrum_baseline(cep.remove_mean(l_i))
    print(f"\nrho = {rho:g}, 2000 frames")
    print(f"{'q':>3} {'Gamma theory':>13} {'complex':>9} {'real':>9}")
    for q, r in zip(BINS, RATIOS):
        print(
            f"{q:3d} {N * rho * r**2:13.1f} {cep.measured_gamma(y[:, q]):9.1f} "
            f"{cep.measured_gamma(y_real[:, q]):9.1f}"
        )
    one = cep.process_frame(cep.FreqChannelFrame(frames[0], DF, nv))
    print("\nsingle-frame detection:")
    for d in cep.detect_devices(one.y, BINS, one.effective_snr, N):
        print(f"  q={d.q:2d} amplitude={abs(d.amplitude):.3f} gamma={d.gamma:.1f}")


if __name__ == "__main__":
    main()
