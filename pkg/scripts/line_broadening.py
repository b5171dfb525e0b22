"""Energy distribution of the escaped electron: FWHM against G0 + Gd."""
import argparse

from zenosim.core import ModelParams
from zenosim.flat_decay import evolve_bloch, line_shape_from_state, steady_time
from zenosim.integrator import default_half_bandwidth, discretize_flat_continuum


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma-d", type=float, nargs="+", default=[0.0, 1.0, 2.0, 5.0])
    args = ap.parse_args()

    p = ModelParams()
    print(f"{'Gd':>6} {'FWHM':>8} {'G0+Gd':>8} {'rel err':>8}")
    for gd in args.gamma_d:
        grid = discretize_flat_continuum(p.gamma0, p.e0, default_half_bandwidth(p.gamma0 + gd))
        state = evolve_bloch(p, grid, gd, [0.0, steady_time(p.gamma0)]).state(1)
        width = line_shape_from_state(state, grid).fwhm
        target = p.gamma0 + gd
        print(f"{gd:6g} {width:8.4f} {target:8.4f} {width / target - 1:8.2%}")


if __name__ == "__main__":
    main()
