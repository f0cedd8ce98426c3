"""Regenerates data/aspect_ratio.csv: discretized beta distributions of
particle aspect ratio on a shared 20-bin grid over (0, 1]. The per-material
means are fixture choices; no measured aspect-ratio data is available."""
import numpy as np
from scipy.stats import beta

edges = np.linspace(0, 1, 21)
centers = 0.5 * (edges[1:] + edges[:-1])
means = {"SP": 0.55, "AS": 0.62, "DM": 0.45, "GR": 0.50, "IM": 0.58, "MH": 0.60,
         "MCC1": 0.48, "MCC2": 0.52, "MCC3": 0.56, "LAC1": 0.78, "LAC2": 0.66,
         "MAN": 0.82, "DCPA": 0.74, "CCS": 0.40, "MgSt": 0.60}
k = 14.0

with open("data/aspect_ratio.csv", "w") as f:
    f.write("grid," + ",".join(f"{c:.3f}" for c in centers) + "\n")
    for mid, m in means.items():
        p = np.diff(beta.cdf(edges, m * k, (1 - m) * k))
        p = p / p.sum()
        f.write(mid + "," + ",".join(f"{v:.8f}" for v in p) + "\n")
