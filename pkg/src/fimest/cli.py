"""Command-line front door.

Subcommands: ``divergence`` (two CSV sample files), ``fim`` (builtin or
external model), ``crlb`` (matrix JSON -> bound + volume), ``experiment``
(named sweep from a JSON config). Every randomized path takes a seed and
defaults to a fixed constant; there is no wall-clock mode.

Exit codes: 0 ok, 2 bad input, 3 duplicate points, 4 model failure,
5 rank-deficient design, 6 singular weights.
"""

from __future__ import annotations

import argparse
import json
import math
import shlex
import sys

import numpy as np

from . import crlb as crlb_mod
from . import experiments as exp_mod
from . import fim as fim_mod
from .errors import (
    DuplicatePoints,
    FimestError,
    ModelFailure,
    ProtocolError,
    RankDeficient,
    SingularWeight,
    SpawnFailure,
    Timeout,
)
from .models import ExternalModel, GaussianMeanModel

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DUPLICATES = 3
EXIT_MODEL = 4
EXIT_DESIGN = 5
EXIT_WEIGHTS = 6

DEFAULT_SEED = 1729
DEFAULT_RADIUS = 0.1

EXPERIMENTS = {
    "gaussian-mse-vs-dim": exp_mod.run_gaussian_mse_vs_dim,
    "gaussian-gap-vs-n": exp_mod.run_gaussian_gap_vs_n,
}


class CliInputError(Exception):
    pass


def _load_csv_matrix(path: str, skip_header: bool) -> np.ndarray:
    rows = []
    ncol = None
    try:
        fh = open(path)
    except OSError as exc:
        raise CliInputError(f"{path}: {exc.strerror or exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if skip_header and lineno == 1:
                continue
            text = line.strip()
            if not text:
                continue
            parts = text.split(",")
            if ncol is None:
                ncol = len(parts)
            elif len(parts) != ncol:
                raise CliInputError(f"{path}:{lineno}: expected {ncol} columns, found {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise CliInputError(f"{path}:{lineno}: non-numeric value in {text!r}") from None
    if not rows:
        raise CliInputError(f"{path}: no data rows")
    return np.asarray(rows)


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliInputError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliInputError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise CliInputError(f"{what} must be comma-separated numbers, got {text!r}") from None


def _emit(report: dict) -> None:
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_divergence(args) -> int:
    from .divergence import estimate_divergence
    from .emst import PointCloud

    xp = _load_csv_matrix(args.file_p, args.header)
    xq = _load_csv_matrix(args.file_q, args.header)
    if xp.shape[1] != xq.shape[1]:
        raise CliInputError(
            f"column count mismatch: {args.file_p} has {xp.shape[1]}, {args.file_q} has {xq.shape[1]}"
        )
    est = estimate_divergence(PointCloud(xp), PointCloud(xq))
    d_hat = max(est.d_hat, 0.0) if args.clamp else est.d_hat
    _emit({"d_hat": d_hat, "c": est.c, "n_p": est.n_p, "n_q": est.n_q, "alpha": est.alpha})
    return EXIT_OK


def _build_model(args):
    if args.model == "gaussian":
        if args.dim is None:
            raise CliInputError("--dim is required for the gaussian model")
        return GaussianMeanModel(dim=args.dim, sigma=args.sigma)
    if args.cmd is None:
        raise CliInputError("--cmd is required for the external model")
    if args.dim is None:
        raise CliInputError("--dim (parameter dimension) is required for the external model")
    output_dim = args.output_dim if args.output_dim is not None else args.dim
    return ExternalModel(
        command=tuple(shlex.split(args.cmd)),
        param_dim=args.dim,
        output_dim=output_dim,
        timeout=args.timeout,
    )


def _estimate_report(estimate: fim_mod.FimEstimate) -> dict:
    return {
        "method": estimate.method,
        "f_mat": estimate.f_mat.tolist(),
        "f_vec": estimate.f_vec.tolist(),
        "residual_norm": estimate.residual_norm,
        "min_eigenvalue": estimate.min_eigenvalue,
        "iterations": estimate.iterations,
    }


def cmd_fim(args) -> int:
    model = _build_model(args)
    theta = np.asarray(_parse_floats(args.theta, "--theta"))
    if theta.shape[0] != model.param_dim:
        raise CliInputError(f"--theta has {theta.shape[0]} entries, model expects {model.param_dim}")
    if args.sigma_u is not None and args.radius is not None:
        raise CliInputError("--sigma-u and --radius are mutually exclusive")
    if args.sigma_u is not None:
        mode, scale = "gaussian", args.sigma_u
    elif args.radius is not None:
        mode, scale = "ball", args.radius
    else:
        mode, scale = "ball", DEFAULT_RADIUS
    d = model.param_dim
    m = args.m if args.m is not None else 10 * fim_mod.packed_length(d)
    design = fim_mod.sample_perturbations(d, m, scale, rng_seed=args.seed, mode=mode)
    q = fim_mod.estimate_q(model, theta, design, args.n, args.n, rng_seed=fim_mod.derive_seed(args.seed, 1))

    estimates = {}
    if args.method in ("ls", "both"):
        estimates["ls"] = _estimate_report(fim_mod.ls_fim(design, q))
    if args.method in ("psd", "both"):
        if args.diag_magnitudes:
            magnitudes = _parse_floats(args.diag_magnitudes, "--diag-magnitudes")
        else:
            magnitudes = [scale, 1.5 * scale, 2.0 * scale]
        targets = fim_mod.diagonal_fim(
            model, theta, magnitudes, args.n, args.n, rng_seed=fim_mod.derive_seed(args.seed, 2)
        )
        report = _estimate_report(fim_mod.psd_constrained_fim(design, q, targets))
        report["diag_targets"] = targets.tolist()
        estimates["psd"] = report
    _emit(
        {
            "model": args.model,
            "theta": theta.tolist(),
            "n_p": args.n,
            "n_q": args.n,
            "seed": args.seed,
            "design": {"mode": mode, "scale": scale, "m": m},
            "estimates": estimates,
        }
    )
    return EXIT_OK


def cmd_crlb(args) -> int:
    raw = _load_json(args.fim_file)
    try:
        matrix = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError):
        raise CliInputError(f"{args.fim_file}: expected a numeric matrix") from None
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise CliInputError(f"{args.fim_file}: expected a square matrix, got shape {matrix.shape}")
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-8 * max(1.0, float(np.abs(matrix).max()))):
        raise CliInputError(f"{args.fim_file}: matrix is not symmetric")
    estimate = fim_mod.fim_estimate_from_matrix(matrix)
    bound = crlb_mod.invert_to_crlb(estimate, epsilon=args.epsilon)
    report = {
        "crlb": bound.c_mat.tolist(),
        "stddev": np.sqrt(np.diagonal(bound.c_mat)).tolist(),
        "loading_used": bound.loading_used,
    }
    if args.weights is not None:
        weights = np.asarray(_load_json(args.weights), dtype=np.float64).reshape(-1)
        if weights.shape[0] != matrix.shape[0]:
            raise CliInputError(
                f"{args.weights}: got {weights.shape[0]} weights for a {matrix.shape[0]}-parameter matrix"
            )
        if np.any(weights < 0):
            raise CliInputError(f"{args.weights}: weights must be nonnegative")
        report["volume"] = crlb_mod.weighted_volume(bound, crlb_mod.WeightMatrix(weights))
    _emit(report)
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.name not in EXPERIMENTS:
        raise CliInputError(
            f"unknown experiment {args.name!r}; valid names: {', '.join(sorted(EXPERIMENTS))}"
        )
    raw = _load_json(args.config)
    if not isinstance(raw, dict):
        raise CliInputError(f"{args.config}: expected a JSON object")
    try:
        n_samples = raw["n_samples"]
        if isinstance(n_samples, (int, float)):
            n_samples = [n_samples]
        config = exp_mod.ExperimentConfig(
            dims=tuple(raw["dims"]),
            n_samples=tuple(n_samples),
            sigma_u2=float(raw.get("sigma_u2", 0.05)),
            m_factor=int(raw.get("m_factor", 10)),
            monte_carlo_runs=int(raw.get("monte_carlo_runs", 10)),
            master_seed=int(raw.get("master_seed", exp_mod.DEFAULT_MASTER_SEED)),
            sigma=float(raw.get("sigma", 1.0)),
            output=raw["output"],
        )
    except KeyError as exc:
        raise CliInputError(f"{args.config}: missing required key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise CliInputError(f"{args.config}: {exc}") from None
    records = EXPERIMENTS[args.name](config)
    print(f"wrote {len(records)} records to {config.output}")
    print("K n runs mean_mse_dhalf mean_mse_sample mean_gap")
    for cell in exp_mod.summarize(records):
        print(
            f"{cell['K']} {cell['n']} {cell['runs']} "
            f"{cell['mean_mse_dhalf']:.6g} {cell['mean_mse_sample']:.6g} {cell['mean_gap']:.6g}"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fimest", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_div = sub.add_parser("divergence", help="divergence estimate between two CSV sample files")
    p_div.add_argument("file_p")
    p_div.add_argument("file_q")
    p_div.add_argument("--header", action="store_true", help="skip one header line in each file")
    p_div.add_argument("--clamp", action="store_true", help="floor the reported estimate at 0")
    p_div.set_defaults(handler=cmd_divergence)

    p_fim = sub.add_parser("fim", help="information-matrix estimate for a generative model")
    p_fim.add_argument("--model", choices=("gaussian", "external"), required=True)
    p_fim.add_argument("--dim", type=int, help="parameter dimension")
    p_fim.add_argument("--sigma", type=float, default=1.0, help="gaussian model noise scale")
    p_fim.add_argument("--cmd", help="external model command line")
    p_fim.add_argument("--output-dim", type=int, help="external model output dimension (default: --dim)")
    p_fim.add_argument("--timeout", type=float, default=60.0, help="external model timeout seconds")
    p_fim.add_argument("--theta", required=True, help="comma-separated parameter vector")
    p_fim.add_argument("--n", type=int, default=1000, help="samples per cloud")
    p_fim.add_argument("--m", type=int, help="number of perturbations (default 10 d(d+1)/2)")
    p_fim.add_argument("--sigma-u", type=float, help="gaussian perturbations with this sigma")
    p_fim.add_argument("--radius", type=float, help="ball perturbations with this radius")
    p_fim.add_argument("--method", choices=("ls", "psd", "both"), default="ls")
    p_fim.add_argument(
        "--diag-magnitudes",
        help="comma-separated axis magnitudes for --method psd (default: scale * {1, 1.5, 2})",
    )
    p_fim.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_fim.set_defaults(handler=cmd_fim)

    p_crlb = sub.add_parser("crlb", help="covariance lower bound from a matrix JSON file")
    p_crlb.add_argument("fim_file")
    p_crlb.add_argument("--weights", help="JSON array of diagonal weights")
    p_crlb.add_argument("--epsilon", type=float, default=crlb_mod.DEFAULT_LOADING)
    p_crlb.set_defaults(handler=cmd_crlb)

    p_exp = sub.add_parser("experiment", help="run a named sweep from a JSON config")
    p_exp.add_argument("name")
    p_exp.add_argument("config")
    p_exp.set_defaults(handler=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except CliInputError as exc:
        print(f"fimest: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DuplicatePoints as exc:
        print(f"fimest: duplicate points: {exc}", file=sys.stderr)
        return EXIT_DUPLICATES
    except (ModelFailure, SpawnFailure, Timeout, ProtocolError) as exc:
        print(f"fimest: model failure: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except RankDeficient as exc:
        print(f"fimest: design failure: {exc}", file=sys.stderr)
        return EXIT_DESIGN
    except SingularWeight as exc:
        print(f"fimest: weight failure: {exc}", file=sys.stderr)
        return EXIT_WEIGHTS
    except (FimestError, ValueError) as exc:
        print(f"fimest: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
