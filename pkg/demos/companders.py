"""
Fit mu-law and beta-law companders to channel amplitudes and phases and
show how they flatten the histogram seen by the uniform quantizer.
"""

import numpy as np

from ctq import FadingConfig, generate
from ctq import compander as cp
from ctq.pipeline import component_samples


def flatness(v, bins=16):
    h = np.histogram(v, bins=bins, range=(0, 1))[0]
    return h.max() / max(h.min(), 1)


def main():
    x = generate(FadingConfig(n_t=4, n_frames=20_000, doppler_hz=30.0, correlation=0.9, seed=3))
    amp, phase = component_samples(x)
    for name, v, M in (("amplitude", amp, 4), ("phase", phase, 16)):
        print(f"{name}: raw max/min bin ratio {flatness(v):.2f}")
        for family in ("mu", "beta"):
            g = cp.fit(v, family)
            adj = cp.adjust(g, v, M)
            print(f"  {cp.format_record(g)}")
            print(f"    ratio after companding {flatness(g.compress(v)):.2f}; "
                  f"adjusted for M={M}: {cp.format_record(adj)}")


if __name__ == "__main__":
    main()
