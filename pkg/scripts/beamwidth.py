"""-3 dB azimuth width of the physical and virtual quadrant arrays under each
weighting and element model, and the virtual/physical ratio."""
import argparse

import numpy as np

from microdoppler.mimo import QuadrantLayout, array_factor, build_virtual_array, physical_array


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--quadrant-wl", type=float, default=12.0)
    args = ap.parse_args()
    layout = QuadrantLayout.pwr(args.quadrant_wl)
    va, pa = build_virtual_array(layout), physical_array(layout)
    angles = np.deg2rad(np.linspace(-5, 5, 100001))
    print(f"{'weighting':<13} {'elements':<9} {'phys_deg':>9} {'virt_deg':>9} {'ratio':>7}")
    for weighting in ("uniform", "multiplicity"):
        for elem in (True, False):
            p = np.rad2deg(array_factor(pa, angles, "uniform", elem).width_3db)
            v = np.rad2deg(array_factor(va, angles, weighting, elem).width_3db)
            print(f"{weighting:<13} {'aperture' if elem else 'point':<9} {p:9.4f} {v:9.4f} {v / p:7.4f}")


if __name__ == "__main__":
    main()
