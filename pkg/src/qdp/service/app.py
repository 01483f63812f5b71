"""FastAPI service wrapping the core package.

Every endpoint is a thin adapter: validate the request model, call the core,
return a response model.  The CLI talks to the same handlers through
`qdp.client`, either in-process or over HTTP against `qdp serve`.
"""

from __future__ import annotations

import base64

from fastapi import FastAPI, HTTPException

from .. import estimator, experiments, lattice, oracle
from ..errors import ContractError, ParseError, RegimeError, SizeError
from . import schemas


def _spec(kind: str, req: schemas.ExperimentRequest) -> experiments.ExperimentSpec:
    return experiments.ExperimentSpec(
        kind=kind,
        d=req.d,
        p=req.p,
        seed=req.seed,
        trials=req.trials,
        side=req.side,
        ds=list(req.ds),
        threads=req.threads,
    )


def _report_response(report: experiments.Report) -> schemas.ReportResponse:
    return schemas.ReportResponse(
        kind=report.kind,
        params=report.params,
        rows=report.rows,
        summary=report.summary,
        passed=report.passed,
        json_lines=report.to_json_lines(),
    )


def count_exact(req: schemas.CountRequest) -> schemas.CountResponse:
    H = lattice.build_percolation(req.d, req.p, req.seed)
    result = oracle.count_bruteforce(H) if req.method == "brute" else oracle.count_evensum(H)
    return schemas.CountResponse(
        count=str(result.value),
        d=req.d,
        p=req.p,
        seed=req.seed,
        method=result.method,
        log2_count=oracle.log2_of_int(result.value),
    )


def estimate(req: schemas.EstimateRequest) -> schemas.EstimateResponse:
    H = lattice.build_percolation(req.d, req.p, req.seed)
    rep = estimator.psi_report(H)
    return schemas.EstimateResponse(
        report=rep.as_dict(),
        constants=estimator.constants(req.d, req.p).as_dict(),
    )


def sample(req: schemas.SampleRequest) -> schemas.ReportResponse:
    spec = experiments.ExperimentSpec(
        kind="sample", d=req.d, p=req.p, seed=req.seed, trials=req.trials, threads=req.threads
    )
    return _report_response(experiments.run_sample_experiment(spec, emit_sets=req.emit_sets))


def verify_moments(req: schemas.ExperimentRequest) -> schemas.ReportResponse:
    return _report_response(experiments.run_moment_experiment(_spec("moments", req)))


def clt(req: schemas.ExperimentRequest) -> schemas.ReportResponse:
    return _report_response(experiments.run_clt_experiment(_spec("clt", req)))


def tv(req: schemas.ExperimentRequest) -> schemas.ReportResponse:
    return _report_response(experiments.run_tv_experiment(_spec("tv", req)))


def approx(req: schemas.ExperimentRequest) -> schemas.ReportResponse:
    return _report_response(experiments.run_approx_experiment(_spec("approx", req)))


def thresholds() -> schemas.ThresholdsResponse:
    report = experiments.run_threshold_report()
    return schemas.ThresholdsResponse(
        entries={row["name"]: {k: v for k, v in row.items() if k != "name"} for row in report.rows},
        count=len(report.rows),
        passed=report.passed,
    )


def config(req: schemas.CountRequest) -> schemas.ConfigResponse:
    H = lattice.build_percolation(req.d, req.p, req.seed)
    return schemas.ConfigResponse(
        d=H.d,
        p=H.p,
        seed=H.seed,
        config_base64=base64.b64encode(lattice.serialize(H)).decode("ascii"),
        n_edges=lattice.n_edges(H.d),
        retained_edges=int(H.edge_bits.sum()),
    )


def create_app() -> FastAPI:
    app = FastAPI(title="qdp", description="percolated-hypercube independent-set toolkit")

    def guard(fn, *args):
        try:
            return fn(*args)
        except (SizeError, RegimeError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except ParseError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except ContractError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/v1/health")
    def health():
        return {"status": "ok"}

    @app.post("/v1/count-exact", response_model=schemas.CountResponse)
    def _count(req: schemas.CountRequest):
        return guard(count_exact, req)

    @app.post("/v1/estimate", response_model=schemas.EstimateResponse)
    def _estimate(req: schemas.EstimateRequest):
        return guard(estimate, req)

    @app.post("/v1/sample", response_model=schemas.ReportResponse)
    def _sample(req: schemas.SampleRequest):
        return guard(sample, req)

    @app.post("/v1/experiments/moments", response_model=schemas.ReportResponse)
    def _moments(req: schemas.ExperimentRequest):
        return guard(verify_moments, req)

    @app.post("/v1/experiments/clt", response_model=schemas.ReportResponse)
    def _clt(req: schemas.ExperimentRequest):
        return guard(clt, req)

    @app.post("/v1/experiments/tv", response_model=schemas.ReportResponse)
    def _tv(req: schemas.ExperimentRequest):
        return guard(tv, req)

    @app.post("/v1/experiments/approx", response_model=schemas.ReportResponse)
    def _approx(req: schemas.ExperimentRequest):
        return guard(approx, req)

    @app.get("/v1/thresholds", response_model=schemas.ThresholdsResponse)
    def _thresholds():
        return thresholds()

    @app.post("/v1/config", response_model=schemas.ConfigResponse)
    def _config(req: schemas.CountRequest):
        return guard(config, req)

    return app
