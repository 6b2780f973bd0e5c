"""Request and response schemas for the experiment service.

The request mirrors the sectioned config file one to one, so the CLI can
translate a parsed file straight into a request body. All fields carry the
same defaults as the file format.
"""

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field

from etopt.config import RunConfig


class ProblemSection(BaseModel):
    family: Literal["linreg"] = "linreg"
    n: int = Field(default=20, ge=2)
    p: int = Field(default=10, ge=1)
    q: int = Field(default=4, ge=1)
    m: int = Field(default=2, ge=1)
    box_halfwidth: float = Field(default=5.0, gt=0)


class GraphSection(BaseModel):
    edge_prob: float = Field(default=0.1, ge=0.0, le=1.0)
    seed: Optional[int] = None


class ScheduleSection(BaseModel):
    schedule: Literal["thm1", "thm2"] = "thm2"
    kappa: float = 0.5
    theta1: float = 0.5
    theta2: float = 0.5
    theta3: float = 1.0
    alpha0: float = 1.0
    tau0: float = 0.0
    tau_family: Literal["poly", "geo"] = "poly"
    c: float = 2.0


class RunSection(BaseModel):
    horizon: int = Field(default=2000, ge=1)
    seed: int = Field(default=1, ge=0)
    init_rule: Literal["origin", "uniform"] = "origin"
    record_decisions: bool = True
    event_triggered: bool = True
    workers: int = Field(default=1, ge=1)


class BenchmarkSection(BaseModel):
    kinds: List[Literal["dynamic", "static"]] = Field(default_factory=list)
    solver_tol: float = Field(default=1e-6, gt=0)
    max_iter: int = Field(default=200_000, ge=1)
    grid_pitch: float = Field(default=1e-3, gt=0)
    verify: Literal["none", "grid", "restart"] = "none"


class OutputSection(BaseModel):
    include_preclip: bool = False


class RunRequest(BaseModel):
    problem: ProblemSection = Field(default_factory=ProblemSection)
    graph: GraphSection = Field(default_factory=GraphSection)
    schedule: ScheduleSection = Field(default_factory=ScheduleSection)
    run: RunSection = Field(default_factory=RunSection)
    benchmark: BenchmarkSection = Field(default_factory=BenchmarkSection)
    output: OutputSection = Field(default_factory=OutputSection)

    def to_config(self):
        return RunConfig(
            family=self.problem.family,
            n=self.problem.n,
            p=self.problem.p,
            q=self.problem.q,
            m=self.problem.m,
            box_halfwidth=self.problem.box_halfwidth,
            edge_prob=self.graph.edge_prob,
            graph_seed=self.graph.seed,
            schedule=self.schedule.schedule,
            kappa=self.schedule.kappa,
            theta1=self.schedule.theta1,
            theta2=self.schedule.theta2,
            theta3=self.schedule.theta3,
            alpha0=self.schedule.alpha0,
            tau0=self.schedule.tau0,
            tau_family=self.schedule.tau_family,
            c=self.schedule.c,
            horizon=self.run.horizon,
            seed=self.run.seed,
            init_rule=self.run.init_rule,
            record_decisions=self.run.record_decisions,
            event_triggered=self.run.event_triggered,
            workers=self.run.workers,
            benchmark_kinds=tuple(self.benchmark.kinds),
            solver_tol=self.benchmark.solver_tol,
            solver_max_iter=self.benchmark.max_iter,
            grid_pitch=self.benchmark.grid_pitch,
            verify=self.benchmark.verify,
            include_preclip=self.output.include_preclip,
        )


class SweepSection(BaseModel):
    tau0_values: List[float] = Field(default=[0.0, 50.0, 100.0, 150.0], min_length=1)
    seeds: List[int] = Field(default=[1, 2, 3, 4, 5], min_length=1)


class SweepRequest(RunRequest):
    sweep: SweepSection = Field(default_factory=SweepSection)


class CheckOut(BaseModel):
    name: str
    passed: bool
    detail: str = ""


class ValidationOut(BaseModel):
    passed: bool
    checks: List[CheckOut]


class RunResponse(BaseModel):
    summary: dict
    validation: ValidationOut
    artifacts: Dict[str, str]


class SweepResponse(BaseModel):
    cells: List[dict]
    artifacts: Dict[str, str]


class HealthOut(BaseModel):
    status: str
    version: str


class ErrorOut(BaseModel):
    kind: Literal["config", "assumptions", "runtime"]
    detail: str
