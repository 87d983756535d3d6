"""Command-line interface: sampling, Jacobian evaluation, and the studies.

Configuration comes from flags, optionally backed by a JSON document via
``--config`` (explicit flags win). Every run that writes files also writes a
``manifest.json`` echoing the fully resolved configuration, sufficient to
re-run it. Exit codes: 0 success, 2 usage error, 3 input error, 4 numerical
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import CayleyError

__all__ = [
    "main",
    "parse_and_dispatch",
    "read_matrix_csv",
    "write_matrix_csv",
]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERICAL = 4


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


def _apply_thread_cap() -> None:
    """Honor CAYLEY_THREADS by capping the BLAS/OpenMP pools.

    Must run before numpy is imported, which is why the heavy modules are
    imported inside the dispatch functions rather than at module load.
    """
    cap = os.environ.get("CAYLEY_THREADS")
    if not cap:
        return
    try:
        n = int(cap)
    except ValueError:
        raise UsageError(f"CAYLEY_THREADS must be an integer, got {cap!r}")
    if n < 1:
        raise UsageError("CAYLEY_THREADS must be >= 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))


def read_matrix_csv(path):
    """Read a numeric CSV with header line `# rows=<n> cols=<p>`."""
    import numpy as np

    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}")
    lines = text.splitlines()
    if not lines or not any(line.strip() for line in lines):
        raise InputError(f"{path}: empty input file")
    header = lines[0].strip()
    prefix = "# rows="
    if not header.startswith(prefix) or " cols=" not in header:
        raise InputError(f"{path}: malformed header {header!r}, expected '# rows=<n> cols=<p>'")
    try:
        rows_part, cols_part = header[2:].split()
        n_rows = int(rows_part.split("=")[1])
        n_cols = int(cols_part.split("=")[1])
    except (ValueError, IndexError):
        raise InputError(f"{path}: malformed header {header!r}")
    data = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != n_cols:
            raise InputError(f"{path}:{lineno}: expected {n_cols} cells, found {len(cells)}")
        try:
            data.append([float(cell) for cell in cells])
        except ValueError:
            raise InputError(f"{path}:{lineno}: non-numeric cell")
    if len(data) != n_rows:
        raise InputError(f"{path}: header promises {n_rows} rows, found {len(data)}")
    return np.array(data, dtype=float).reshape(n_rows, n_cols)


def write_matrix_csv(path, matrix) -> None:
    """Write a matrix with the `# rows=<n> cols=<p>` header at full precision."""
    import numpy as np

    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"# rows={M.shape[0]} cols={M.shape[1]}\n")
        for row in M:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def _write_manifest(out_dir, command: str, resolved: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"command": command, "config": resolved}
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _parse_float_list(value):
    if isinstance(value, (list, tuple)):
        return [float(x) for x in value]
    try:
        return [float(x) for x in str(value).split(",") if x != ""]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {value!r}")


def _parse_int_list(value):
    if isinstance(value, (list, tuple)):
        return [int(x) for x in value]
    try:
        return [int(x) for x in str(value).split(",") if x != ""]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of integers, got {value!r}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cayley-mcmc",
        description="Euclidean-coordinate MCMC on orthogonal-frame manifolds.",
    )
    sub = parser.add_subparsers(dest="command")

    def add(name, help_text):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", default=None, help="JSON file with defaults for any flag")
        return cmd

    s = add("sample", "run one MCMC chain and write draws")
    s.add_argument("--manifold", choices=("stiefel", "grassmann"), default=None)
    s.add_argument("--p", type=int, default=None)
    s.add_argument("--k", type=int, default=None)
    s.add_argument("--target", choices=("uniform", "bingham"), default=None)
    s.add_argument("--data", default=None, help="CSV data matrix (bingham target)")
    s.add_argument("--sigma2", type=float, default=None)
    s.add_argument("--lambda", dest="lam", default=None, help="comma-separated eigenvalues")
    s.add_argument("--iters", type=int, default=None)
    s.add_argument("--burn", type=int, default=None)
    s.add_argument("--thin", type=int, default=None)
    s.add_argument("--scale", type=float, default=None)
    s.add_argument("--proposal", choices=("random-walk-gaussian", "leapfrog"), default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", default=None)

    j = add("jacobian", "print block and naive log-Jacobians per coordinate row")
    j.add_argument("--manifold", choices=("stiefel", "grassmann"), default=None)
    j.add_argument("--p", type=int, default=None)
    j.add_argument("--k", type=int, default=None)
    j.add_argument("--coords", default=None, help="CSV of coordinate rows")
    j.add_argument("--out", default=None)

    u = add("uniform-exp", "uniform-distribution sampling study")
    u.add_argument("--p", type=int, default=None)
    u.add_argument("--k", type=int, default=None)
    u.add_argument("--draws", type=int, default=None)
    u.add_argument("--thin", type=int, default=None)
    u.add_argument("--burn", type=int, default=None)
    u.add_argument("--seed", type=int, default=None)
    u.add_argument("--out", default=None)

    b = add("bingham-exp", "spiked-covariance posterior study")
    b.add_argument("--n", type=int, default=None)
    b.add_argument("--p", type=int, default=None)
    b.add_argument("--k", type=int, default=None)
    b.add_argument("--sigma2", type=float, default=None)
    b.add_argument("--lambda", dest="lam", default=None)
    b.add_argument("--iters", type=int, default=None)
    b.add_argument("--burn", type=int, default=None)
    b.add_argument("--thin", type=int, default=None)
    b.add_argument("--data-seed", type=int, default=None)
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--out", default=None)

    n = add("normal-approx-exp", "Gaussian coupling-error study")
    n.add_argument("--k", type=int, default=None)
    n.add_argument("--p-grid", default=None, help="comma-separated grid of p values")
    n.add_argument("--replicates", type=int, default=None)
    n.add_argument("--seed", type=int, default=None)
    n.add_argument("--out", default=None)

    r = add("roundtrip-check", "verify forward/inverse map consistency")
    r.add_argument("--p", type=int, default=None)
    r.add_argument("--k", type=int, default=None)
    r.add_argument("--instances", type=int, default=None)
    r.add_argument("--tol", type=float, default=None)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", default=None)
    return parser


def _resolve(args: argparse.Namespace, defaults: dict, required: tuple) -> dict:
    """Merge flag values over an optional JSON config over built-in defaults."""
    config = {}
    if args.config is not None:
        try:
            config = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise InputError(f"{args.config}: {exc.strerror or exc}")
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.config}: invalid JSON ({exc.msg} at line {exc.lineno})")
        if not isinstance(config, dict):
            raise InputError(f"{args.config}: config document must be a JSON object")
        unknown = set(config) - set(defaults)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    resolved = {}
    for key, default in defaults.items():
        flag_val = getattr(args, key)
        resolved[key] = flag_val if flag_val is not None else config.get(key, default)
    missing = [key for key in required if resolved[key] is None]
    if missing:
        raise UsageError("missing required options: " + ", ".join(f"--{m.replace('_', '-')}" for m in missing))
    return resolved


def _check_dims(p, k):
    if not (1 <= k < p):
        raise UsageError(f"require 1 <= k < p, got p={p}, k={k}")


def _cmd_sample(args) -> int:
    import numpy as np

    from .cayley import ManifoldDims
    from .densities import BinghamParams, PullbackTarget, bingham_log_density, uniform_log_density
    from .experiments import ExperimentReport, write_draws_csv, write_report
    from .sampler import ProposalConfig, RunConfig, run_chain

    cfg = _resolve(args, defaults={
        "manifold": "stiefel", "p": None, "k": None, "target": "uniform",
        "data": None, "sigma2": None, "lam": None, "iters": None,
        "burn": 0, "thin": 1, "scale": None, "proposal": "random-walk-gaussian",
        "seed": None, "out": None,
    }, required=("p", "k", "iters", "seed", "out"))
    _check_dims(cfg["p"], cfg["k"])
    dims = ManifoldDims(cfg["p"], cfg["k"])

    if cfg["target"] == "bingham":
        if cfg["data"] is None or cfg["sigma2"] is None or cfg["lam"] is None:
            raise UsageError("bingham target requires --data, --sigma2 and --lambda")
        Y = read_matrix_csv(cfg["data"])
        if Y.shape[1] != cfg["p"]:
            raise InputError(f"data has {Y.shape[1]} columns, expected p={cfg['p']}")
        lam = np.array(_parse_float_list(cfg["lam"]))
        try:
            params = BinghamParams.from_data(Y, cfg["sigma2"], lam)
        except ValueError as exc:
            raise InputError(str(exc))
        if params.k != cfg["k"]:
            raise UsageError(f"--lambda has {params.k} entries, expected k={cfg['k']}")
        g = bingham_log_density(params, manifold=cfg["manifold"])
    else:
        g = uniform_log_density(manifold=cfg["manifold"])

    target = PullbackTarget(g, dims)
    scale = cfg["scale"] if cfg["scale"] is not None else 2.38 / np.sqrt(target.dim)
    per_block = (np.sqrt(2.0 / cfg["p"]), np.sqrt(1.0 / cfg["p"])) if cfg["manifold"] == "stiefel" else None
    proposal = ProposalConfig(kind=cfg["proposal"], scale=scale, per_block_scales=per_block)
    run = RunConfig(iterations=cfg["iters"], burn_in=cfg["burn"], thin=cfg["thin"], seed=cfg["seed"])
    batch = run_chain(target, np.zeros(target.dim), proposal, run)

    out = Path(cfg["out"])
    _write_manifest(out, "sample", cfg)
    write_draws_csv(out / "draws.csv", batch, manifold=cfg["manifold"], p=cfg["p"], k=cfg["k"])
    report = ExperimentReport(
        name="sample",
        config=cfg,
        metrics={"acceptance_rate": batch.acceptance_rate,
                 "final_scale": batch.final_scale,
                 "n_draws": int(batch.coords_draws.shape[0])},
    )
    write_report(report, out)
    print(f"sample: {batch.coords_draws.shape[0]} draws, "
          f"acceptance {batch.acceptance_rate:.3f}, output in {out}")
    return EXIT_OK


def _cmd_jacobian(args) -> int:
    from .cayley import GrassmannCoords, ManifoldDims, StiefelCoords
    from .jacobian import (
        derivative_grassmann,
        derivative_stiefel,
        log_jacobian_block_grassmann,
        log_jacobian_block_stiefel,
        log_jacobian_naive,
    )

    cfg = _resolve(args, defaults={
        "manifold": "stiefel", "p": None, "k": None, "coords": None, "out": None,
    }, required=("p", "k", "coords"))
    _check_dims(cfg["p"], cfg["k"])
    dims = ManifoldDims(cfg["p"], cfg["k"])
    rows = read_matrix_csv(cfg["coords"])
    expected = dims.d_v if cfg["manifold"] == "stiefel" else dims.d_g
    if rows.shape[1] != expected:
        raise InputError(
            f"coordinate rows have {rows.shape[1]} entries, expected {expected} "
            f"for {cfg['manifold']} (p={cfg['p']}, k={cfg['k']})"
        )
    print("log_jacobian_block,log_jacobian_naive")
    for row in rows:
        if cfg["manifold"] == "stiefel":
            coords = StiefelCoords.from_vector(dims, row)
            block = log_jacobian_block_stiefel(coords)
            naive = log_jacobian_naive(derivative_stiefel(coords))
        else:
            coords = GrassmannCoords.from_vector(dims, row)
            block = log_jacobian_block_grassmann(coords)
            naive = log_jacobian_naive(derivative_grassmann(coords))
        print(f"{block!r},{naive!r}")
    if cfg["out"] is not None:
        _write_manifest(cfg["out"], "jacobian", cfg)
    return EXIT_OK


def _cmd_uniform_exp(args) -> int:
    from .experiments import run_uniform_experiment

    cfg = _resolve(args, defaults={
        "p": None, "k": None, "draws": None, "thin": 10, "burn": None,
        "seed": None, "out": None,
    }, required=("p", "k", "draws", "seed", "out"))
    _check_dims(cfg["p"], cfg["k"])
    _write_manifest(cfg["out"], "uniform-exp", cfg)
    report = run_uniform_experiment(cfg["p"], cfg["k"], cfg["draws"], cfg["seed"],
                                    thin=cfg["thin"], burn_in=cfg["burn"], out_dir=cfg["out"])
    print(f"uniform-exp: entry KS {report.metrics['ks_top_left_entry']:.4f}, "
          f"scaled-coordinate KS {report.metrics['ks_scaled_first_coordinate']:.4f}, "
          f"output in {cfg['out']}")
    return EXIT_OK


def _cmd_bingham_exp(args) -> int:
    import numpy as np

    from .experiments import SpikedDataSpec, run_bingham_experiment
    from .sampler import RunConfig

    cfg = _resolve(args, defaults={
        "n": 100, "p": None, "k": None, "sigma2": 1.0, "lam": None,
        "iters": 12000, "burn": 2000, "thin": 1, "data_seed": 0,
        "seed": None, "out": None,
    }, required=("p", "k", "lam", "seed", "out"))
    _check_dims(cfg["p"], cfg["k"])
    lam = np.array(_parse_float_list(cfg["lam"]))
    try:
        spec = SpikedDataSpec(n=cfg["n"], p=cfg["p"], k=cfg["k"],
                              sigma2=cfg["sigma2"], lam=lam, seed=cfg["data_seed"])
    except ValueError as exc:
        raise UsageError(str(exc))
    run = RunConfig(iterations=cfg["iters"], burn_in=cfg["burn"], thin=cfg["thin"],
                    seed=cfg["seed"])
    _write_manifest(cfg["out"], "bingham-exp", dict(cfg, lam=lam.tolist()))
    report = run_bingham_experiment(spec, run, out_dir=cfg["out"])
    print(f"bingham-exp: theta1 TV {report.metrics['theta1_tv_between_chains']:.4f}, "
          f"acceptance {report.metrics['acceptance_rates']}, output in {cfg['out']}")
    return EXIT_OK


def _cmd_normal_approx_exp(args) -> int:
    from .experiments import run_normal_approx_experiment

    cfg = _resolve(args, defaults={
        "k": None, "p_grid": None, "replicates": 50, "seed": None, "out": None,
    }, required=("k", "p_grid", "seed", "out"))
    p_grid = _parse_int_list(cfg["p_grid"]) if isinstance(cfg["p_grid"], str) else list(cfg["p_grid"])
    if cfg["k"] >= min(p_grid):
        raise UsageError(f"require k < min(p_grid), got k={cfg['k']}, grid {p_grid}")
    _write_manifest(cfg["out"], "normal-approx-exp", dict(cfg, p_grid=p_grid))
    report = run_normal_approx_experiment(cfg["k"], p_grid, cfg["replicates"], cfg["seed"],
                                          out_dir=cfg["out"])
    meds = ", ".join(f"{m:.4f}" for m in report.metrics["epsilon_medians"])
    print(f"normal-approx-exp: medians [{meds}], "
          f"decreasing={report.metrics['medians_strictly_decreasing']}, output in {cfg['out']}")
    return EXIT_OK


def _cmd_roundtrip_check(args) -> int:
    import numpy as np

    from .cayley import (
        GrassmannCoords,
        ManifoldDims,
        StiefelCoords,
        cayley_forward_grassmann,
        cayley_forward_stiefel,
        cayley_inverse_grassmann,
        cayley_inverse_stiefel,
    )

    cfg = _resolve(args, defaults={
        "p": None, "k": None, "instances": 100, "tol": 1e-10, "seed": 0, "out": None,
    }, required=("p", "k"))
    _check_dims(cfg["p"], cfg["k"])
    dims = ManifoldDims(cfg["p"], cfg["k"])
    rng = np.random.Generator(np.random.PCG64(cfg["seed"]))
    worst_v = worst_g = 0.0
    for _ in range(cfg["instances"]):
        phi = rng.standard_normal(dims.d_v)
        back = cayley_inverse_stiefel(cayley_forward_stiefel(
            StiefelCoords.from_vector(dims, phi))).phi
        worst_v = max(worst_v, float(np.max(np.abs(back - phi))))
        psi = rng.standard_normal(dims.d_g)
        psi *= 0.9 / max(1.0, np.linalg.norm(psi))
        back_g = cayley_inverse_grassmann(cayley_forward_grassmann(
            GrassmannCoords.from_vector(dims, psi))).psi
        worst_g = max(worst_g, float(np.max(np.abs(back_g - psi))))
    ok = worst_v <= cfg["tol"] and worst_g <= cfg["tol"]
    print(f"roundtrip-check p={cfg['p']} k={cfg['k']}: "
          f"max error stiefel {worst_v:.3e}, grassmann {worst_g:.3e}, "
          f"tol {cfg['tol']:.1e} -> {'ok' if ok else 'FAIL'}")
    if cfg["out"] is not None:
        _write_manifest(cfg["out"], "roundtrip-check", cfg)
    return EXIT_OK if ok else EXIT_NUMERICAL


_DISPATCH = {
    "sample": _cmd_sample,
    "jacobian": _cmd_jacobian,
    "uniform-exp": _cmd_uniform_exp,
    "bingham-exp": _cmd_bingham_exp,
    "normal-approx-exp": _cmd_normal_approx_exp,
    "roundtrip-check": _cmd_roundtrip_check,
}


def parse_and_dispatch(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        _apply_thread_cap()
        return _DISPATCH[args.command](args)
    except UsageError as exc:
        print(f"usage-error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"input-error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CayleyError, ArithmeticError) as exc:
        print(f"numerical-error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # numpy's LinAlgError subclasses ValueError; everything else reaching
        # here is a rejected configuration value.
        if type(exc).__name__ == "LinAlgError":
            print(f"numerical-error: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        print(f"usage-error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
