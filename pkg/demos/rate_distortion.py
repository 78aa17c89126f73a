"""
Rate/distortion table for one fading scenario.

Simulates a correlated 4-antenna channel, sweeps the codebook size and
prints bits per antenna and MSCD for the uncompressed quantizer, the three
joint strategies and the ideal CTW length, followed by the savings of each
coded strategy at equal MSCD.

    python demos/rate_distortion.py [doppler_hz] [correlation]
"""

import sys

from ctq import pipeline as pl


def main(doppler=5.0, rho=0.9):
    cfg = pl.EvalConfig(n_t=4, n_frames=10_000, doppler_hz=doppler, correlation=rho,
                        level_budgets=(16, 64, 256), seed=1)
    rows = pl.evaluate(cfg)
    print(f"doppler {doppler:g} Hz, rho {rho:g}")
    print(f"{'strategy':<18}{'M_abs':>6}{'M_ang':>6}{'bits/ant':>10}{'mscd':>12}")
    for r in rows:
        print(f"{r.strategy:<18}{r.M_abs:>6}{r.M_ang:>6}{r.bits_per_antenna:>10.3f}{r.mscd:>12.3e}")
    unc = [r for r in rows if r.strategy == "uncompressed"]
    for name in ("ctm_individual", "ctm_simple_joint", "ctm_ct_indicator"):
        pts = pl.equal_mscd_savings([r for r in rows if r.strategy == name], unc)
        print(name, " ".join(f"{100 * s:.0f}%" for *_, s in pts))


if __name__ == "__main__":
    main(*(float(a) for a in sys.argv[1:3]))
