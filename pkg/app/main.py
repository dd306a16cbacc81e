from fastapi import FastAPI

from app.core.config import settings
from app.core.logging import app_logger
from app.routers import analysis_router, health_router

app = FastAPI(title="xtalk noise service")

# Routers
app.include_router(health_router)
app.include_router(analysis_router)

app_logger.info(f"🚀 xtalk service ready (segment_um={settings.segment_um}, workers={settings.workers})")
