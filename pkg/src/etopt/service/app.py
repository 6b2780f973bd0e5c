"""FastAPI application wrapping the experiment runner.

Endpoints run synchronously in the request (runs take seconds to minutes at
desk scale); deploy behind a worker pool or call in process through the CLI.
Errors map to a structured body with a ``kind`` the CLI translates into its
exit codes: config (400), assumptions (409), runtime (500).
"""

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from etopt import __version__
from etopt.errors import ConfigError, ValidationFailure
from etopt.runner import execute_run, execute_sweep, execute_validate
from etopt.service.models import (
    ErrorOut,
    HealthOut,
    RunRequest,
    RunResponse,
    SweepRequest,
    SweepResponse,
    ValidationOut,
)


def _error_response(status, kind, detail):
    return JSONResponse(
        status_code=status, content=ErrorOut(kind=kind, detail=detail).model_dump()
    )


def create_app():
    app = FastAPI(title="etopt", version=__version__)

    @app.exception_handler(ConfigError)
    async def config_error(request: Request, exc: ConfigError):
        return _error_response(400, "config", str(exc))

    @app.exception_handler(RequestValidationError)
    async def schema_error(request: Request, exc: RequestValidationError):
        return _error_response(400, "config", str(exc))

    @app.exception_handler(ValidationFailure)
    async def assumption_error(request: Request, exc: ValidationFailure):
        return _error_response(409, "assumptions", str(exc))

    @app.exception_handler(Exception)
    async def runtime_error(request: Request, exc: Exception):
        return _error_response(500, "runtime", f"{type(exc).__name__}: {exc}")

    @app.get("/health", response_model=HealthOut)
    def health():
        return HealthOut(status="ok", version=__version__)

    @app.post("/validate", response_model=ValidationOut)
    def validate(request: RunRequest):
        report = execute_validate(request.to_config())
        return ValidationOut(
            passed=report.passed,
            checks=[
                {"name": c.name, "passed": c.passed, "detail": c.detail}
                for c in report.checks
            ],
        )

    @app.post("/run", response_model=RunResponse)
    def run(request: RunRequest):
        result = execute_run(request.to_config())
        return RunResponse(
            summary=result.summary,
            validation=ValidationOut(
                passed=result.validation.passed,
                checks=[
                    {"name": c.name, "passed": c.passed, "detail": c.detail}
                    for c in result.validation.checks
                ],
            ),
            artifacts=result.artifacts,
        )

    @app.post("/sweep", response_model=SweepResponse)
    def sweep(request: SweepRequest):
        result = execute_sweep(
            request.to_config(),
            tau0_values=request.sweep.tau0_values,
            seeds=request.sweep.seeds,
            workers=request.run.workers,
        )
        return SweepResponse(cells=result.cells, artifacts=result.artifacts)

    return app


app = create_app()
