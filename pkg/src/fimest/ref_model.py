"""Reference external sampler speaking the line protocol over stdin/stdout.

Wraps the builtin Gaussian mean model so the external-process path can be
checked bit-for-bit against the in-process path:

    python -m fimest.ref_model --dim 4 [--sigma 1.0]

Reads one JSON request per line until EOF; answers each with n CSV rows of
K shortest-round-trip decimal floats.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .models import GaussianMeanModel


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fimest.ref_model", description=__doc__)
    parser.add_argument("--dim", type=int, required=True)
    parser.add_argument("--sigma", type=float, default=1.0)
    args = parser.parse_args(argv)
    model = GaussianMeanModel(dim=args.dim, sigma=args.sigma)
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        request = json.loads(line)
        x = model.sample(np.asarray(request["theta"], dtype=np.float64), int(request["n"]), int(request["seed"]))
        for row in x:
            sys.stdout.write(",".join(repr(float(v)) for v in row))
            sys.stdout.write("\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
