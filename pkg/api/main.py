# api/main.py
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from contextlib import asynccontextmanager
import logging

from api.routers import basis, online  # Import your routers
from core.basis_store import basis_store  # Import the basis store
from core.exceptions import CrbmError

logger = logging.getLogger(__name__)


# --- Lifespan Management ---
@asynccontextmanager
async def lifespan(app: FastAPI):
    # Load the basis archive on startup; an empty store answers 503
    try:
        basis_store.load()
    except CrbmError as e:
        logger.error(f"Basis archive not loaded: {e}", exc_info=True)
    yield  # The application runs while yielded
    basis_store.close()


# --- FastAPI App Creation ---
app = FastAPI(
    title="crbm online API",
    description="Online stage of a certified reduced basis model of the convected Helmholtz equation.",
    version="0.1.0",
    lifespan=lifespan,
)

# --- Middleware ---
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# --- Routers ---
app.include_router(basis.router, prefix="/api", tags=["Basis"])
app.include_router(online.router, prefix="/api", tags=["Online"])


# --- Root Endpoint (Health Check) ---
@app.get("/", tags=["Root"])
async def read_root():
    """Root endpoint for basic health check."""
    loaded = basis_store.loaded
    return {"status": "ok", "basis_loaded": loaded is not None, "N": loaded.rb.N if loaded else None}


# Run with: uvicorn api.main:app  (or: crbm serve --basis results/basis.npz)
if __name__ == "__main__":
    import uvicorn
    from core.config import settings

    uvicorn.run("api.main:app", host=settings.api_host, port=settings.api_port)
