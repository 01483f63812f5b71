"""Command-line interface: a thin client over the service layer.

Machine-readable output (JSON lines, or CSV with --format csv) goes to
stdout; the human summary goes to stderr.  Exit codes: 0 when the invoked
check passes, 1 when a test criterion fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .client import ServiceClient
from .errors import ContractError, ParseError, RegimeError, SizeError
from .service import schemas

_EXPERIMENTS = {"verify-moments", "clt", "tv", "approx"}


def _add_common(sub, trials_default=None):
    sub.add_argument("--d", type=int, required=True)
    sub.add_argument("--p", type=float, required=True)
    sub.add_argument("--seed", type=int, default=0)
    if trials_default is not None:
        sub.add_argument("--trials", type=int, default=trials_default)
    sub.add_argument("--threads", type=int, default=None)
    sub.add_argument("--spec", default=None, help="JSON file overriding this subcommand's fields")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qdp",
        description="exact counting, estimation, and sampling of independent sets "
        "in percolated hypercubes",
    )
    ap.add_argument("--server", default=None, help="base URL of a running service; default in-process")
    ap.add_argument("--out", default=None, help="also write the machine output to this path")
    ap.add_argument("--format", choices=["json", "csv"], default="json")
    ap.add_argument("--spec", default=None, help="JSON file with the subcommand's fields")
    sp = ap.add_subparsers(dest="command")

    c = sp.add_parser("count-exact", help="exact independent-set count")
    _add_common(c)
    c.add_argument("--method", choices=["brute", "evensum"], default="evensum")

    e = sp.add_parser("estimate", help="explicit estimator report and constants")
    _add_common(e)

    s = sp.add_parser("sample", help="approximate sampler runs")
    _add_common(s, trials_default=1)
    s.add_argument("--emit-sets", action="store_true")

    for name, default_trials in (("verify-moments", 10000), ("clt", 2000), ("tv", 100000)):
        x = sp.add_parser(name)
        _add_common(x, trials_default=default_trials)
        if name == "tv":
            x.add_argument("--side", choices=["even", "odd"], default="even")

    a = sp.add_parser("approx", help="estimator vs exact counts across d")
    a.add_argument("--p", type=float, required=True)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--trials", type=int, default=20)
    a.add_argument("--ds", type=int, nargs="+", default=[4, 6])
    a.add_argument("--threads", type=int, default=None)
    a.add_argument("--spec", default=None)

    sp.add_parser("thresholds", help="named threshold constants with residuals")

    v = sp.add_parser("serve", help="run the HTTP service")
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=8000)

    return ap


def _load_spec_file(path: str, args: argparse.Namespace):
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    for key, value in data.items():
        setattr(args, key.replace("-", "_"), value)


def _request_for(args) -> tuple[str, object | None]:
    threads = getattr(args, "threads", None) or int(os.environ.get("HC_THREADS", 0)) or None
    cmd = args.command
    if cmd == "count-exact":
        return cmd, schemas.CountRequest(d=args.d, p=args.p, seed=args.seed, method=args.method)
    if cmd == "estimate":
        return cmd, schemas.EstimateRequest(d=args.d, p=args.p, seed=args.seed)
    if cmd == "sample":
        return cmd, schemas.SampleRequest(
            d=args.d, p=args.p, seed=args.seed, trials=args.trials,
            emit_sets=args.emit_sets, threads=threads,
        )
    if cmd in _EXPERIMENTS:
        return cmd, schemas.ExperimentRequest(
            d=getattr(args, "d", 12),
            p=args.p,
            seed=args.seed,
            trials=args.trials,
            side=getattr(args, "side", "even"),
            ds=list(getattr(args, "ds", [])),
            threads=threads,
        )
    if cmd == "thresholds":
        return cmd, None
    raise ContractError(f"unhandled command {cmd}")


def _emit(text: str, out_path: str | None):
    sys.stdout.write(text)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command is None:
        ap.print_usage(sys.stderr)
        return 2

    if args.command == "serve":
        import uvicorn

        from .service.app import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    if args.spec:
        try:
            _load_spec_file(args.spec, args)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: bad --spec file: {exc}", file=sys.stderr)
            return 2

    try:
        op, request = _request_for(args)
        client = ServiceClient(server=args.server)
        response = client.invoke(op, request)
    except (SizeError, ParseError, ContractError, RegimeError) as exc:
        # RegimeError is a refusal of a valid request: criterion failure, not usage
        print(f"error: {exc}", file=sys.stderr)
        return 1 if isinstance(exc, RegimeError) else 2
    except Exception as exc:  # pragma: no cover - transport failures
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if isinstance(response, schemas.ReportResponse):
        if args.format == "csv":
            from .experiments import Report

            rep = Report(response.kind, response.params, response.rows, response.summary, response.passed)
            _emit(rep.to_csv(), args.out)
        else:
            _emit(response.json_lines, args.out)
        print(
            f"{response.kind}: pass={response.passed} "
            + " ".join(f"{k}={v}" for k, v in list(response.summary.items())[:6] if not isinstance(v, (dict, list))),
            file=sys.stderr,
        )
        return 0 if response.passed else 1

    if isinstance(response, schemas.ThresholdsResponse):
        lines = [
            json.dumps({"name": name, **entry}, sort_keys=True, separators=(",", ":"))
            for name, entry in response.entries.items()
        ]
        _emit("\n".join(lines) + "\n", args.out)
        print(f"thresholds: {response.count} constants, pass={response.passed}", file=sys.stderr)
        return 0 if response.passed else 1

    payload = response.model_dump()
    _emit(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n", args.out)
    print(f"{args.command}: ok", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
