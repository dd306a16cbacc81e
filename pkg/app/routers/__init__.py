from .analysis_router import router as analysis_router
from .health_router import router as health_router

__all__ = ["analysis_router", "health_router"]
