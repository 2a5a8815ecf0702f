"""Command-line front end.

Exit status: 0 success, 2 unreadable or malformed input, 3 invalid problem,
4 solver failure, 5 no certificate at the requested grid resolution.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings

import numpy as np

from .conic import SolverOptions
from .core import COSINE, RKHS, SolverError, ValidationError, apply_map, as_observations, empirical_error
from .documents import (
    DocumentError,
    certificate_to_document,
    dumps,
    map_to_document,
    observations_from_document,
    problem_from_document,
    read_json,
    write_atomic,
)

EXIT_OK, EXIT_PARSE, EXIT_INVALID, EXIT_SOLVER, EXIT_NO_CERTIFICATE = 0, 2, 3, 4, 5


class _Failure(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code, self.kind = code, kind


def _positive_int(minimum: int):
    def parse(text: str) -> int:
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
        if value < minimum:
            raise argparse.ArgumentTypeError(f"must be at least {minimum}")
        return value

    return parse


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="affine-recovery",
        description="Worst-case optimal affine prediction from point values under model-set assumptions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--input", required=True, help="problem document (JSON)")
        p.add_argument("--output", help="output document; standard output when omitted")
        p.add_argument("--level", type=_positive_int(1), help="moment truncation level r (cosine)")
        p.add_argument("--grid", type=_positive_int(3), default=None, help="uniform grid size s (cosine)")
        p.add_argument("--tol", type=_positive_float, help="solver feasibility and gap tolerance")
        p.add_argument("--backend", choices=("native", "cvxopt"), default="native", help="cone solver")

    p = sub.add_parser("recover", help="compute the recovery map")
    common(p)
    p = sub.add_parser("predict", help="compute the map and apply it to observations")
    common(p)
    p.add_argument("--observations", required=True, help="observation matrix y[m][n] (JSON)")
    p.add_argument("--plot-csv", help="write predictions over a sweep of the prediction point")
    p.add_argument("--sweep", type=_positive_int(2), default=41, help="number of sweep nodes")
    p = sub.add_parser("certify", help="lower and upper bounds on the optimal error (cosine)")
    common(p)
    p = sub.add_parser("oracle", help="empirical worst-case error over sampled model-set members")
    common(p)
    p.add_argument("--samples", type=_positive_int(1), default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples-csv", help="dump the sampled evaluations")
    return parser


def _options(args) -> SolverOptions | None:
    if args.tol is None:
        return None
    return SolverOptions(feastol=args.tol, reltol=args.tol, abstol=args.tol / 10,
                         fallback_tol=max(args.tol, SolverOptions().fallback_tol))


def _load_problem(args):
    doc = read_json(args.input)
    return problem_from_document(doc)


def _grid(args) -> int:
    from .cosine import DEFAULT_GRID

    return args.grid if args.grid is not None else DEFAULT_GRID


def _recover(problem, args):
    """Map plus, in the cosine setting, its certificate."""
    if problem.setting == RKHS:
        from .rkhs import solve_recovery

        return solve_recovery(problem, backend=args.backend, options=_options(args)), None
    from .cosine import certify

    cert, rmap = certify(problem, args.level, _grid(args), backend=args.backend, options=_options(args))
    return rmap, cert


def _sweep_rows(problem, y, args):
    """Predictions with the prediction point moved across the domain."""
    lo, hi = problem.domain
    rows = []
    for theta in np.linspace(lo, hi, args.sweep):
        moved = problem.with_points(new_point=float(theta))
        if problem.setting == RKHS:
            from .rkhs import solve_recovery

            rmap = solve_recovery(moved, backend=args.backend, options=_options(args))
            pred = apply_map(rmap, y)
        else:
            from .cosine import lower_bound

            low = lower_bound(moved, args.level, backend=args.backend, options=_options(args))
            pred = np.einsum("jmn,mn->j", low.coeffs, y) + low.offsets
        rows.append([float(theta)] + [float(v) for v in pred])
    return rows


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(header)
    for row in rows:
        out.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _run(args) -> list[tuple[str | None, str]]:
    """Carry out one command; returns (path, text or writer) pairs, written only once all succeed."""
    problem = _load_problem(args)
    outputs = []
    if args.command == "recover":
        rmap, cert = _recover(problem, args)
        doc = map_to_document(rmap)
        if cert is not None:
            doc["certificate"] = certificate_to_document(cert)
        outputs.append((args.output, dumps(doc)))
    elif args.command == "predict":
        y = as_observations(observations_from_document(read_json(args.observations)), problem.M, problem.N)
        rmap, cert = _recover(problem, args)
        doc = {"prediction": apply_map(rmap, y).tolist(), "map": map_to_document(rmap)}
        if cert is not None:
            doc["certificate"] = certificate_to_document(cert)
        outputs.append((args.output, dumps(doc)))
        if args.plot_csv:
            header = ["theta"] + [f"pred_{n + 1}" for n in range(problem.N)]
            outputs.append((args.plot_csv, _csv_text(header, _sweep_rows(problem, y, args))))
    elif args.command == "certify":
        if problem.setting != COSINE:
            raise ValidationError(["certify needs a cosine problem; use recover for rkhs problems"])
        rmap, cert = _recover(problem, args)
        doc = certificate_to_document(cert)
        doc["map"] = map_to_document(rmap)
        outputs.append((args.output, dumps(doc)))
    else:
        from .oracle import OracleError, sample_model_set, write_samples_csv

        rmap, cert = _recover(problem, args)
        try:
            samples = sample_model_set(problem, args.samples, args.seed)
        except OracleError as exc:
            raise _Failure(EXIT_SOLVER, "oracle", str(exc))
        err = empirical_error(rmap, samples)
        bound = rmap.worst_case if cert is None else cert.upper
        doc = {
            "samples": len(samples),
            "seed": args.seed,
            "attempts": samples.attempts,
            "acceptance_rate": samples.acceptance_rate,
            "empirical_error": err,
            "bound": bound,
            "bound_kind": "program value" if cert is None else "certified upper bound",
            "within_bound": bool(err <= bound + 1e-6),
        }
        outputs.append((args.output, dumps(doc)))
        if args.samples_csv:
            outputs.append((args.samples_csv, lambda path: write_samples_csv(samples, problem, path)))
    return outputs


def _emit(outputs, stdout):
    for path, payload in outputs:
        if callable(payload):
            payload(path)
        elif path is None:
            stdout.write(payload)
        else:
            write_atomic(path, payload)


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            outputs = _run(args)
        _emit(outputs, stdout)
        return EXIT_OK
    except _Failure as exc:
        failure = exc
    except DocumentError as exc:
        failure = _Failure(EXIT_PARSE, "parse", str(exc))
    except ValidationError as exc:
        failure = _Failure(EXIT_INVALID, "validation", str(exc))
    except SolverError as exc:
        failure = _Failure(EXIT_SOLVER, "solver", str(exc))
    except Exception as exc:  # noqa: BLE001
        from .cosine import CertificateInfeasible

        if isinstance(exc, CertificateInfeasible):
            failure = _Failure(EXIT_NO_CERTIFICATE, "certificate", str(exc))
        elif isinstance(exc, ValueError):
            failure = _Failure(EXIT_INVALID, "validation", str(exc))
        else:
            raise
    stderr.write(json.dumps({"error": failure.kind, "message": str(failure), "status": failure.code}) + "\n")
    return failure.code


if __name__ == "__main__":
    sys.exit(main())
