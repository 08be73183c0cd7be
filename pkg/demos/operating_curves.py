"""Print how the reflex/beam ratio varies with power for several working distances.

The ratio blows up at P = -1/d (neutralization) and flips sign across it,
so a given ratio is most informative about power far from that point.
"""

from retinoscopy.optics import OpticalSetup, estimate_power, operating_curve


def main():
    u = 0.4
    powers = (-6.0, -4.0, -2.0, -1.0, 0.0, 1.0, 3.0)
    print("d (m)  P=-1/d  " + "  ".join(f"r@{p:+.0f}" for p in powers))
    for d in (0.2, 0.4, 0.66):
        curve = operating_curve(OpticalSetup(u=u, d=d), -6.0, 3.0, 901)
        lookup = {round(s.power, 2): s for s in curve.samples}
        cells = []
        for p in powers:
            s = lookup[p]
            cells.append("   n/a" if s.excluded else f"{s.ratio:+6.2f}")
        print(f"{d:5.2f}  {curve.singularity:+6.2f}  " + "  ".join(cells))

    # sensitivity: power change per unit ratio error near emmetropia
    for d in (0.2, 0.4, 0.66):
        s = OpticalSetup(u=u, d=d)
        r0 = operating_curve(s, -0.01, 0.01, 3).samples[1].ratio
        dp = estimate_power(r0 + 0.01, s).value - estimate_power(r0, s).value
        print(f"d={d:.2f} m: a ratio error of 0.01 at P=0 shifts the estimate by {dp:+.3f} D")


if __name__ == "__main__":
    main()
