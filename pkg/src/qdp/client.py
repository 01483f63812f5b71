"""Thin client over the service layer.

The CLI never reimplements any operation: it builds a request model, calls
`invoke`, and renders the response.  With no server URL the call dispatches
to the in-process handlers (same code the HTTP app runs); with a URL it goes
over HTTP via httpx.
"""

from __future__ import annotations

from typing import Any

import httpx
from pydantic import BaseModel

from .service import app as handlers
from .service import schemas

_ROUTES: dict[str, tuple[str, str, Any, Any]] = {
    # op: (http method, path, request model | None, response model)
    "count-exact": ("POST", "/v1/count-exact", schemas.CountRequest, schemas.CountResponse),
    "estimate": ("POST", "/v1/estimate", schemas.EstimateRequest, schemas.EstimateResponse),
    "sample": ("POST", "/v1/sample", schemas.SampleRequest, schemas.ReportResponse),
    "verify-moments": ("POST", "/v1/experiments/moments", schemas.ExperimentRequest, schemas.ReportResponse),
    "clt": ("POST", "/v1/experiments/clt", schemas.ExperimentRequest, schemas.ReportResponse),
    "tv": ("POST", "/v1/experiments/tv", schemas.ExperimentRequest, schemas.ReportResponse),
    "approx": ("POST", "/v1/experiments/approx", schemas.ExperimentRequest, schemas.ReportResponse),
    "thresholds": ("GET", "/v1/thresholds", None, schemas.ThresholdsResponse),
    "config": ("POST", "/v1/config", schemas.CountRequest, schemas.ConfigResponse),
}

_LOCAL = {
    "count-exact": handlers.count_exact,
    "estimate": handlers.estimate,
    "sample": handlers.sample,
    "verify-moments": handlers.verify_moments,
    "clt": handlers.clt,
    "tv": handlers.tv,
    "approx": handlers.approx,
    "thresholds": handlers.thresholds,
    "config": handlers.config,
}


class ServiceClient:
    """Dispatches operations in-process (default) or to a remote service."""

    def __init__(self, server: str | None = None, http_client: httpx.Client | None = None):
        self.server = server.rstrip("/") if server else None
        self._http = http_client

    def invoke(self, op: str, request: BaseModel | None) -> BaseModel:
        method, path, req_model, resp_model = _ROUTES[op]
        if self.server is None and self._http is None:
            fn = _LOCAL[op]
            return fn(request) if request is not None else fn()
        client = self._http or httpx.Client(base_url=self.server, timeout=None)
        try:
            if method == "GET":
                r = client.get(path)
            else:
                r = client.post(path, json=request.model_dump() if request else {})
            r.raise_for_status()
            return resp_model.model_validate(r.json())
        finally:
            if self._http is None:
                client.close()
