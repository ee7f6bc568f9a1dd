"""JSON endpoints over the quantum disk services."""

from __future__ import annotations

from typing import Any, Dict

from flask import Blueprint, Response, current_app, jsonify, request

from services import bergman, function_theory as ft, opmat, polalg, reports
from services.database import recent_runs
from services.qnum import QContext, QContextError

api_bp = Blueprint("api", __name__, url_prefix="/api")

API_ERRORS = (
    QContextError,
    reports.ReportError,
    polalg.PolynomialError,
    bergman.QuadratureError,
    ft.FunctionTheoryError,
    opmat.TruncationError,
    opmat.ConvergenceError,
)


class RequestError(ValueError):
    """Malformed or oversized request."""


def _payload() -> Dict[str, Any]:
    payload = request.get_json(silent=True)
    if not isinstance(payload, dict):
        raise RequestError("Request body must be a JSON object.")
    return payload


def _context(source: Dict[str, Any]) -> QContext:
    config = current_app.config
    try:
        dim = int(source.get("N", config["DIM"]))
    except (TypeError, ValueError) as exc:
        raise RequestError("N must be an integer.") from exc
    if dim > config["MAX_API_DIM"]:
        raise RequestError(f"N={dim} exceeds the API limit of {config['MAX_API_DIM']}.")
    return QContext.from_config(config, q=str(source.get("q", config["Q"])), dim=dim)


def _ok(payload: Any) -> Response:
    return jsonify(reports.make_json_safe(payload))


@api_bp.errorhandler(RequestError)
def _request_error(exc: RequestError):
    return jsonify({"error": str(exc)}), 400


@api_bp.get("/health")
def health_check() -> Response:
    """Return application health status."""
    config = current_app.config
    current_app.logger.info("Health check requested")
    return jsonify(
        {
            "status": "ok",
            "q": config["Q"],
            "N": config["DIM"],
            "max_api_dim": config["MAX_API_DIM"],
        }
    )


@api_bp.get("/table/<which>")
def table(which: str):
    """Moments, integrals or Green's theorem rows."""
    try:
        ctx = _context(request.args.to_dict())
        rows = request.args.get("rows", type=int)
        return _ok(reports.build_table(which, ctx, rows))
    except API_ERRORS as exc:
        return jsonify({"error": str(exc)}), 400


@api_bp.post("/dirichlet")
def dirichlet():
    """Solve for boundary Fourier data and report mean, norm and positivity."""
    payload = _payload()
    try:
        ctx = _context(payload)
        boundary = polalg.BoundaryFunction.from_json(payload.get("boundary") or {})
        element = ft.dirichlet_solve(boundary, ctx)
        diagnostics = ft.harmonic_diagnostics(element, boundary)
        body = {
            "q": str(ctx.q_exact),
            "N": ctx.trunc_dim,
            "symbol": ft.symbol_extract(element).to_json(),
            "mean": diagnostics.mean_value,
            "norm": diagnostics.op_norm,
            "boundary_sup": diagnostics.boundary_sup,
            "diagnostics": diagnostics.to_dict(),
        }
        if payload.get("include_element"):
            body["element"] = opmat.op_to_json(element)
    except API_ERRORS as exc:
        return jsonify({"error": str(exc)}), 400
    return _ok(body)


@api_bp.post("/integrate")
def integrate():
    """Exact integral of a polynomial and the weighted trace of its matrix."""
    payload = _payload()
    try:
        ctx = _context(payload)
        p = polalg.poly_from_json({"q": str(ctx.q_exact), **(payload.get("poly") or {})}, ctx)
        exact = polalg.integrate(p)
        matrix = opmat.to_matrix(p, ctx)
        numeric = complex(opmat.integral_matrix(matrix))
    except API_ERRORS as exc:
        return jsonify({"error": str(exc)}), 400
    return _ok(
        {
            "exact": {"re": str(exact.re), "im": str(exact.im)},
            "weighted_trace": numeric,
            "abs_diff": abs(numeric - complex(exact)),
            "truncation_bound": opmat.integral_truncation_bound(matrix),
        }
    )


@api_bp.post("/symbol")
def symbol():
    """Boundary symbol of a polynomial as a Fourier map."""
    payload = _payload()
    try:
        ctx = _context(payload)
        p = polalg.poly_from_json({"q": str(ctx.q_exact), **(payload.get("poly") or {})}, ctx)
    except API_ERRORS as exc:
        return jsonify({"error": str(exc)}), 400
    return _ok({"fourier": polalg.symbol(p).to_json()})


@api_bp.get("/runs")
def runs() -> Response:
    """Most recent verification cells stored by ``qdisk verify --record``."""
    limit = min(request.args.get("limit", default=20, type=int), 200)
    return jsonify(recent_runs(limit))
