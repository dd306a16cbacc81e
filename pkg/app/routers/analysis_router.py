# app/routers/analysis_router.py
from typing import Any, Dict

from fastapi import APIRouter, Body, HTTPException

from app.core.errors import InputError, NumericalError
from app.core.logging import app_logger as logger
from app.schemas.config_schema import AnalysisConfig
from app.schemas.report_schema import CorpusRequest
from app.services import analysis_service

router = APIRouter(tags=["analysis"])


def _config(body: Dict[str, Any]) -> AnalysisConfig:
    cfg = analysis_service.parse_config_dict(body)
    if cfg.output.out:
        # El servidor no escribe archivos
        raise InputError("output.out is not accepted over HTTP")
    return cfg


def _run(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except InputError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except NumericalError as e:
        logger.error(f"❌ numerical failure: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@router.post("/analyze/rc")
def analyze_rc(body: Dict[str, Any] = Body(...)):
    return _run(lambda: analysis_service.analyze_rc(_config(body)))


@router.post("/analyze/rlc")
def analyze_rlc(body: Dict[str, Any] = Body(...)):
    return _run(lambda: analysis_service.analyze_rlc(_config(body)))


@router.post("/validate")
def validate(payload: CorpusRequest):
    report, _ = _run(
        analysis_service.validate_corpus,
        payload.kind,
        seed=payload.seed,
        count=payload.count,
        symmetric=payload.symmetric,
    )
    return report
