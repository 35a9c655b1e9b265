"""Hong-Ou-Mandel calibration of the distinguishability parameter p.

The protocol needs to know how indistinguishable the environment photon
is from the signal photon.  Experimentally that is read off a HOM dip:
send both photons onto the beam splitter and record the coincidence
rate as a function of transmittivity.  At T=1/2 the visibility of the
dip equals p exactly, which is how a working value such as p = 0.85
would be calibrated in the lab.
"""

from ebrsim.fock import hom_coincidence

PS = (0.0, 0.5, 0.85, 1.0)
GRID = [k / 20.0 for k in range(21)]

header = "  ".join(f"p={p:<4}" for p in PS)
print(f"{'T':>5}  {header}")
for t in GRID:
    row = "  ".join(f"{hom_coincidence(t, p):6.4f}" for p in PS)
    print(f"{t:5.2f}  {row}")

print()
for p in PS:
    c_min = hom_coincidence(0.5, p)
    c_ref = hom_coincidence(0.5, 0.0)
    visibility = (c_ref - c_min) / c_ref
    print(f"p = {p:<4}  coincidence at T=1/2: {c_min:.4f}   visibility: {visibility:.4f}")
