"""
Driving the command line
========================

Write a boundary file, ask the CLI for a uniqueness verdict, then export a
homotopy trace as CSV twice and compare the bytes.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

from mgl import grid, solver
from mgl.grid import GridDomain
from mgl.manifolds import Euclidean


def mgl(*args):
    res = subprocess.run([sys.executable, "-m", "mgl.cli", *args], capture_output=True, text=True)
    print("$ mgl", " ".join(args), f"(exit {res.returncode})")
    if res.returncode:
        print(res.stderr.strip())
    return res.stdout


with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    d = GridDomain.unit_square(17)
    bd = solver.sine_boundary(d, 0.3, 2)
    bfile = tmp / "boundary.json"
    grid.save_map(solver.harmonic_extension(d, Euclidean(2), bd), bfile, boundary_only=True)

    report = json.loads(mgl("uniqueness", "--boundary", str(bfile), "--region", "slope_sqrt3"))
    print({k: report[k] for k in ("conclusion", "in_region", "max_pair_distance")})

    spectra = tmp / "spectra.txt"
    spectra.write_text("1,1\n1.5,0.5,0.5\n67/50 is not a number\n")
    mgl("region", "--input", str(spectra))
    spectra.write_text("1,1\n1.5,0.5,0.5\n")
    print(mgl("region", "--input", str(spectra), "--format", "csv"))

    a, b = tmp / "a.csv", tmp / "b.csv"
    for path in (a, b):
        mgl("homotopy", "--grid", "9,9", "--target", "hyperbolic:3", "--seed", "7",
            "--format", "csv", "--output", str(path))
    print("byte-identical:", a.read_bytes() == b.read_bytes())
    print(a.read_text().splitlines()[0])
