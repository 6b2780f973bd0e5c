"""Command-line client for the experiment service.

The CLI is a thin HTTP client: it parses the config file and overrides,
posts a request to the service, and writes the returned artifacts. By
default the service runs in process over an ASGI transport (no server or
network involved); ``--server URL`` targets a remote instance instead, and
``etopt serve`` starts one.

Exit codes: 0 success, 2 configuration error, 3 model-validation failure,
4 runtime failure.
"""

import argparse
import asyncio
import sys
from pathlib import Path

import httpx

from etopt import __version__
from etopt.config import (
    DEFAULT_CONFIG_TEXT,
    RunConfig,
    apply_overrides,
    load_config,
)
from etopt.errors import ConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSUMPTIONS = 3
EXIT_RUNTIME = 4

_KIND_EXIT = {"config": EXIT_CONFIG, "assumptions": EXIT_ASSUMPTIONS, "runtime": EXIT_RUNTIME}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="etopt",
        description="Event-triggered distributed online optimization experiments.",
    )
    parser.add_argument("--version", action="version", version=f"etopt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="config file (sectioned key=value)")
        p.add_argument(
            "--set",
            metavar="KEY=VALUE",
            action="append",
            default=[],
            dest="overrides",
            help="override a config key, e.g. --set schedule.tau0=50 (repeatable)",
        )
        p.add_argument("--out", metavar="DIR", default="out", help="artifact directory")
        p.add_argument("--seed", type=int, help="master seed (overrides run.seed)")
        p.add_argument("--workers", type=int, help="worker pool size (overrides run.workers)")
        p.add_argument("--server", metavar="URL", help="remote service URL (default: in-process)")

    common(sub.add_parser("run", help="validate and execute one run"))
    common(sub.add_parser("sweep", help="run the tau0 x seed cross product"))
    common(sub.add_parser("validate", help="run the model checks and report"))

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)

    sub.add_parser("init-config", help="print a default config file to stdout")
    return parser


def _parse_overrides(pairs):
    parsed = []
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override must look like section.key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        parsed.append((key.strip(), value))
    return parsed


def gather_config(args):
    config = load_config(args.config) if args.config else RunConfig()
    apply_overrides(config, _parse_overrides(args.overrides))
    if args.seed is not None:
        config.seed = args.seed
    if args.workers is not None:
        config.workers = args.workers
    return config


def request_body(config):
    """Nested request body mirroring the config sections."""
    body = {
        "problem": {
            "family": config.family,
            "n": config.n,
            "p": config.p,
            "q": config.q,
            "m": config.m,
            "box_halfwidth": config.box_halfwidth,
        },
        "graph": {"edge_prob": config.edge_prob, "seed": config.graph_seed},
        "schedule": {
            "schedule": config.schedule,
            "kappa": config.kappa,
            "theta1": config.theta1,
            "theta2": config.theta2,
            "theta3": config.theta3,
            "alpha0": config.alpha0,
            "tau0": config.tau0,
            "tau_family": config.tau_family,
            "c": config.c,
        },
        "run": {
            "horizon": config.horizon,
            "seed": config.seed,
            "init_rule": config.init_rule,
            "record_decisions": config.record_decisions,
            "event_triggered": config.event_triggered,
            "workers": config.workers,
        },
        "benchmark": {
            "kinds": list(config.benchmark_kinds),
            "solver_tol": config.solver_tol,
            "max_iter": config.solver_max_iter,
            "grid_pitch": config.grid_pitch,
            "verify": config.verify,
        },
        "output": {"include_preclip": config.include_preclip},
    }
    return body


class ServiceClient:
    """Minimal sync client: remote over HTTP or in-process over ASGI."""

    def __init__(self, server=None):
        self.server = server

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    def post(self, path, json):
        if self.server:
            with httpx.Client(base_url=self.server, timeout=None) as client:
                return client.post(path, json=json)
        return asyncio.run(self._asgi_post(path, json))

    async def _asgi_post(self, path, json_body):
        from etopt.service import app

        transport = httpx.ASGITransport(app=app, raise_app_exceptions=False)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://etopt.internal", timeout=None
        ) as client:
            return await client.post(path, json=json_body)


def make_client(server):
    return ServiceClient(server)


def _fail_from_response(response):
    try:
        body = response.json()
        kind = body.get("kind", "runtime")
        detail = body.get("detail", response.text)
    except ValueError:
        kind, detail = "runtime", response.text
    print(f"error ({kind}): {detail}", file=sys.stderr)
    return _KIND_EXIT.get(kind, EXIT_RUNTIME)


def _write_artifacts(artifacts, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, content in artifacts.items():
        (out / name).write_text(content, encoding="utf-8")
        print(f"wrote {out / name}")


def _print_validation(validation):
    for check in validation["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        detail = f": {check['detail']}" if check.get("detail") else ""
        print(f"{status} {check['name']}{detail}")


def cmd_run(args):
    config = gather_config(args)
    with make_client(args.server) as client:
        response = client.post("/run", json=request_body(config))
        if response.status_code != 200:
            return _fail_from_response(response)
        payload = response.json()
    _print_validation(payload["validation"])
    _write_artifacts(payload["artifacts"], args.out)
    summary = payload["summary"]
    print(
        "run complete: "
        f"triggers={summary['total_triggers']} "
        f"avg_loss={summary['final_avg_cum_loss']:.6g} "
        f"avg_violation={summary['final_avg_cum_violation']:.6g}"
    )
    return EXIT_OK


def cmd_sweep(args):
    config = gather_config(args)
    body = request_body(config)
    body["sweep"] = {
        "tau0_values": list(config.sweep_tau0),
        "seeds": list(config.sweep_seeds),
    }
    with make_client(args.server) as client:
        response = client.post("/sweep", json=body)
        if response.status_code != 200:
            return _fail_from_response(response)
        payload = response.json()
    _write_artifacts(payload["artifacts"], args.out)
    for cell in payload["cells"]:
        print(
            f"cell tau0={cell['tau0']:g} seed={cell['seed']}: "
            f"triggers={cell['total_triggers']} "
            f"avg_loss={cell['final_avg_cum_loss']:.6g} "
            f"avg_violation={cell['final_avg_cum_violation']:.6g}"
        )
    return EXIT_OK


def cmd_validate(args):
    config = gather_config(args)
    with make_client(args.server) as client:
        response = client.post("/validate", json=request_body(config))
        if response.status_code != 200:
            return _fail_from_response(response)
        payload = response.json()
    _print_validation(payload)
    return EXIT_OK if payload["passed"] else EXIT_ASSUMPTIONS


def cmd_serve(args):
    import uvicorn

    from etopt.service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "validate":
            return cmd_validate(args)
        if args.command == "serve":
            return cmd_serve(args)
        if args.command == "init-config":
            print(DEFAULT_CONFIG_TEXT, end="")
            return EXIT_OK
    except ConfigError as exc:
        print(f"error (config): {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except httpx.HTTPError as exc:
        print(f"error (runtime): {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    parser.error(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
