"""Bias and error-bar coverage of the fringe fit at a chosen signal-to-noise ratio.

Uses band stacks (one uniform horizontal band per height) so the only error
source is the injected readout noise.
"""

import argparse

import numpy as np

from talbotlau import visibility_vs_height
from talbotlau.synthesis import BandStackConfig, band_stack, readout_sigma_for_snr


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--snr", type=float, default=20.0)
    p.add_argument("--visibility", type=float, default=0.3)
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--heights", type=int, default=25)
    args = p.parse_args(argv)

    cfg = BandStackConfig(frame_width=100e-6)
    n_pix = round(cfg.rect_width / cfg.pixel_pitch) * round(cfg.band_height / cfg.pixel_pitch)
    sigma = readout_sigma_for_snr(args.snr, 1.0, n_pix, cfg.illumination)
    h = 100e-6 + np.arange(args.heights) * 36e-6
    v0 = np.full(args.heights, args.visibility)
    phases = np.random.default_rng(0).uniform(-np.pi, np.pi, args.heights)

    est, err = [], []
    for seed in range(args.seeds):
        stack, heights = band_stack(h, v0, phases, config=cfg, readout_sigma=sigma, seed=seed)
        c = visibility_vs_height(stack, heights)
        est.append(c.column("visibility"))
        err.append(c.column("visibility_err"))
    est, err = np.array(est), np.array(err)
    coverage = np.mean(np.abs(est - v0) < err)
    print(f"SNR {args.snr:g}, V = {args.visibility:g}, {args.seeds} seeds x {args.heights} heights")
    print(f"  relative bias      {np.mean(est) / args.visibility - 1:+.4f}")
    print(f"  scatter / mean err {np.std(est) / np.mean(err):.3f}")
    print(f"  1-sigma coverage   {coverage:.3f} (Gaussian 0.683)")


if __name__ == "__main__":
    main()
