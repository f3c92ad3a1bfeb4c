"""Builds the bundled 94-site layout used by the simulation harness.

Sites are the administrative centres of the 94 mainland French departements
(Corsica excluded), projected to kilometres with an equirectangular
projection centred at 46.5N. Adjacency is approximated from the Delaunay
triangulation of the centres, dropping edges longer than LONG_EDGE_KM.

Outputs (next to this script):
  france94_sites.csv        id,x,y
  france94_contiguity.csv   id_i,id_j
  example_c15.csv           id,x,y,value  (planted cluster, c = 1.5, rho = 0)
"""
import csv
import math
import pathlib

import numpy as np
from scipy.spatial import Delaunay

CENTRES = [
    ("01", 46.205, 5.225), ("02", 49.564, 3.620), ("03", 46.566, 3.333),
    ("04", 44.092, 6.236), ("05", 44.559, 6.079), ("06", 43.710, 7.262),
    ("07", 44.735, 4.599), ("08", 49.773, 4.720), ("09", 42.965, 1.607),
    ("10", 48.297, 4.074), ("11", 43.213, 2.351), ("12", 44.350, 2.575),
    ("13", 43.296, 5.370), ("14", 49.183, -0.371), ("15", 44.927, 2.441),
    ("16", 45.649, 0.156), ("17", 46.160, -1.151), ("18", 47.081, 2.399),
    ("19", 45.267, 1.770), ("21", 47.322, 5.041), ("22", 48.514, -2.765),
    ("23", 46.171, 1.871), ("24", 45.184, 0.721), ("25", 47.238, 6.024),
    ("26", 44.933, 4.892), ("27", 49.027, 1.151), ("28", 48.446, 1.489),
    ("29", 47.996, -4.102), ("30", 43.837, 4.360), ("31", 43.605, 1.444),
    ("32", 43.646, 0.586), ("33", 44.838, -0.579), ("34", 43.611, 3.877),
    ("35", 48.117, -1.678), ("36", 46.810, 1.691), ("37", 47.394, 0.685),
    ("38", 45.188, 5.725), ("39", 46.675, 5.555), ("40", 43.890, -0.500),
    ("41", 47.586, 1.335), ("42", 45.440, 4.387), ("43", 45.043, 3.885),
    ("44", 47.218, -1.554), ("45", 47.903, 1.909), ("46", 44.448, 1.441),
    ("47", 44.203, 0.616), ("48", 44.518, 3.500), ("49", 47.478, -0.563),
    ("50", 49.116, -1.091), ("51", 48.957, 4.363), ("52", 48.111, 5.139),
    ("53", 48.073, -0.770), ("54", 48.692, 6.184), ("55", 48.773, 5.160),
    ("56", 47.658, -2.760), ("57", 49.120, 6.176), ("58", 46.990, 3.159),
    ("59", 50.629, 3.057), ("60", 49.430, 2.081), ("61", 48.432, 0.091),
    ("62", 50.291, 2.777), ("63", 45.778, 3.087), ("64", 43.295, -0.371),
    ("65", 43.233, 0.078), ("66", 42.699, 2.895), ("67", 48.573, 7.752),
    ("68", 48.079, 7.358), ("69", 45.764, 4.836), ("70", 47.622, 6.155),
    ("71", 46.307, 4.828), ("72", 48.006, 0.199), ("73", 45.564, 5.918),
    ("74", 45.899, 6.129), ("75", 48.857, 2.352), ("76", 49.443, 1.100),
    ("77", 48.540, 2.660), ("78", 48.801, 2.130), ("79", 46.323, -0.459),
    ("80", 49.894, 2.296), ("81", 43.929, 2.148), ("82", 44.018, 1.355),
    ("83", 43.124, 5.928), ("84", 43.949, 4.806), ("85", 46.670, -1.426),
    ("86", 46.580, 0.340), ("87", 45.834, 1.261), ("88", 48.172, 6.449),
    ("89", 47.798, 3.567), ("90", 47.640, 6.863), ("91", 48.629, 2.441),
    ("92", 48.892, 2.207), ("93", 48.908, 2.440), ("94", 48.790, 2.455),
    ("95", 49.036, 2.076),
]

EARTH_KM = 6371.0
LAT0 = 46.5
LONG_EDGE_KM = 150.0
# Planted cluster for the example fixture and the default simulation config:
# the 8-site circular window centred on Puy-de-Dome.
CLUSTER_CENTRE = "63"
CLUSTER_SIZE = 8


def project(lat, lon):
    x = EARTH_KM * math.radians(lon) * math.cos(math.radians(LAT0))
    y = EARTH_KM * math.radians(lat - LAT0)
    return round(x, 3), round(y, 3)


def main():
    here = pathlib.Path(__file__).resolve().parent
    ids = [c[0] for c in CENTRES]
    pts = np.array([project(lat, lon) for _, lat, lon in CENTRES])

    edges = set()
    for simplex in Delaunay(pts).simplices:
        for a in range(3):
            i, j = sorted((int(simplex[a]), int(simplex[(a + 1) % 3])))
            if np.linalg.norm(pts[i] - pts[j]) <= LONG_EDGE_KM:
                edges.add((i, j))
    deg = np.zeros(len(ids), dtype=int)
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    print(f"edges={len(edges)} min={deg.min()} mean={deg.mean():.2f} max={deg.max()}")

    with open(here / "france94_sites.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "x", "y"])
        for sid, (x, y) in zip(ids, pts):
            w.writerow([sid, f"{x:.3f}", f"{y:.3f}"])
    with open(here / "france94_contiguity.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id_i", "id_j"])
        for i, j in sorted(edges):
            w.writerow([ids[i], ids[j]])

    centre = ids.index(CLUSTER_CENTRE)
    dist = np.linalg.norm(pts - pts[centre], axis=1)
    cluster = sorted(np.argsort(dist, kind="stable")[:CLUSTER_SIZE].tolist())
    print("cluster:", ",".join(ids[i] for i in cluster))

    rng = np.random.default_rng(20211015)
    values = rng.normal(0.0, 1.0, len(ids))
    values[cluster] += 1.5 * math.sqrt(2.0)
    with open(here / "example_c15.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "x", "y", "value"])
        for sid, (x, y), v in zip(ids, pts, values):
            w.writerow([sid, f"{x:.3f}", f"{y:.3f}", f"{v:.6f}"])


if __name__ == "__main__":
    main()
