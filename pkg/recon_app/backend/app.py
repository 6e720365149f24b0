import os

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from recon_app.backend.routes.reconstruct import router as reconstruct_router

CORS_ORIGINS_ENV = "TVGS_CORS_ORIGINS"


def cors_origins() -> list:
    """Comma-separated origins from TVGS_CORS_ORIGINS, every origin when unset"""
    raw = os.environ.get(CORS_ORIGINS_ENV, "*")
    return [origin.strip() for origin in raw.split(",") if origin.strip()]


app = FastAPI(
    title="Graph Signal Reconstruction API",
    description="Sobolev-regularized reconstruction of time-varying signals on geolocated kNN graphs",
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=cors_origins(),
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(reconstruct_router)


@app.get("/")
def read_root():
    return {
        "message": "Welcome to the Graph Signal Reconstruction API",
        "endpoints": sorted(route.path for route in reconstruct_router.routes),
    }
