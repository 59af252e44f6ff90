"""Walk through one downlink: steering vectors, path loss, and what interference does to SINR.

Run: python3 demos/01_link_budget.py
"""

import numpy as np

from blindbeam import rf

geom = rf.UpaGeometry.half_wavelength(4, 4, 28e9)
pl = rf.PathLossParams()
noise = rf.noise_power_w(5e6, 7.0)
ptx = float(rf.dbm_to_w(30.0))

print(f"wavelength {geom.wavelength_m * 1e3:.2f} mm, {geom.n_elements} elements, noise {10 * np.log10(noise) + 30:.1f} dBm")
for d in (1, 10, 50, 100, 200):
    print(f"  path loss at {d:>3} m: {rf.path_loss_db(28e9, d, pl):6.2f} dB")

# a UE 60 m from its BS, seen at elevation 100 deg, azimuth 20 deg
theta, phi = np.deg2rad(100.0), np.deg2rad(20.0)
gain = 10 ** (-rf.path_loss_db(28e9, 60.0, pl) / 20)
h = rf.assemble_channel([rf.PropagationPath(gain, phi, theta)], geom)

print("\nbeamforming gain vs pointing error (azimuth):")
for err_deg in (0, 5, 10, 20, 40):
    f = rf.array_response(phi + np.deg2rad(err_deg), theta, geom)
    snr = ptx * abs((h @ f)[0]) ** 2 / noise
    print(f"  {err_deg:>2} deg off: SNR {10 * np.log10(snr):5.1f} dB, rate {np.log2(1 + snr):5.2f} bits/s/Hz")

# two UEs served by the same BS, 15 deg apart: each beam leaks into the other UE
phis = np.deg2rad([20.0, 35.0])
channels = np.stack([rf.assemble_channel([rf.PropagationPath(gain, p, theta)], geom)[0] for p in phis])[:, None, :]
beams = rf.array_response(phis, np.full(2, theta), geom)
sinr = rf.sinr_vector(channels, [0, 0], beams, ptx, noise)
print("\ntwo UEs 15 deg apart on one BS:")
print(f"  SINR {10 * np.log10(sinr).round(1)} dB, mean rate {rf.mean_rate(sinr):.2f} bits/s/Hz")
