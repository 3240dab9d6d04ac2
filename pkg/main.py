from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
import uvicorn
import logging
from contextlib import asynccontextmanager

from routes import numbers, calculus, oscillator, entanglement, verify
from core.config import settings
from core.errors import PqOscError

logging.basicConfig(level=logging.DEBUG if settings.debug else logging.INFO)
logger = logging.getLogger(__name__)

@asynccontextmanager
async def lifespan(app: FastAPI):
    # Startup
    logger.info(f"{settings.app_name} {settings.version} API starting up")
    yield
    # Shutdown
    logger.info(f"{settings.app_name} API shutting down")

app = FastAPI(
    title="pq-osc API",
    description="pq-deformed calculus, oscillator and super-coherent entanglement numerics",
    version=settings.version,
    lifespan=lifespan
)

# CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["http://localhost:3000"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include routers
app.include_router(numbers.router, prefix="/api/numbers", tags=["numbers"])
app.include_router(calculus.router, prefix="/api/calculus", tags=["calculus"])
app.include_router(oscillator.router, prefix="/api/oscillator", tags=["oscillator"])
app.include_router(entanglement.router, prefix="/api/entanglement", tags=["entanglement"])
app.include_router(verify.router, prefix="/api/verify", tags=["verify"])

@app.exception_handler(PqOscError)
async def pq_osc_error_handler(request: Request, exc: PqOscError):
    logger.warning(f"{request.url.path}: {exc.kind}: {exc.message}")
    return JSONResponse(status_code=422, content={"detail": {"error": exc.kind, "message": exc.message}})

@app.get("/")
async def root():
    return {
        "message": "pq-osc API",
        "version": settings.version,
        "status": "running"
    }

@app.get("/health")
async def health_check():
    return {"status": "healthy"}

if __name__ == "__main__":
    uvicorn.run(
        "main:app",
        host=settings.api_host,
        port=settings.api_port,
        reload=settings.debug,
        log_level="info"
    )
