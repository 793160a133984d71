"""HTTP surface of the engine.

    uvicorn main:app --app-dir app --reload
    gunicorn -k uvicorn.workers.UvicornWorker --chdir app main:app
"""

import logging
import sys
from pathlib import Path

# Add the app directory to path for imports
sys.path.insert(0, str(Path(__file__).parent))

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from core.config import settings
from core.errors import DomainError, NumericalError
from routes.analysis_routes import router as analysis_router
from routes.construction_routes import router as construction_router
from routes.report_routes import router as report_router
from routes.trace_routes import router as trace_router

logging.basicConfig(level=settings.LOG_LEVEL, format="%(levelname)s %(name)s: %(message)s")
log = logging.getLogger(__name__)

app = FastAPI(title="Strebel Engine", version="1.0.0")

if settings.CORS_ORIGINS:
    app.add_middleware(
        CORSMiddleware,
        allow_origins=settings.CORS_ORIGINS,
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )


@app.exception_handler(DomainError)
async def domain_error(request: Request, exc: DomainError):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.exception_handler(NumericalError)
async def numerical_error(request: Request, exc: NumericalError):
    log.warning("%s %s: %s", request.method, request.url.path, exc)
    return JSONResponse(status_code=422, content={"detail": str(exc), "kind": type(exc).__name__})


app.include_router(analysis_router)
app.include_router(report_router)
app.include_router(trace_router)
app.include_router(construction_router)


@app.get("/")
async def root():
    return {"message": "Strebel Engine API is running"}
