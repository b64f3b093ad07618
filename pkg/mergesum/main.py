from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.middleware.base import BaseHTTPMiddleware
import logging
import time

from mergesum import __version__
from mergesum.core.config import settings
from mergesum.core.errors import MergesumError
from mergesum.routers.summaries import router as summaries_router

logging.basicConfig(level=settings.LOG_LEVEL)
logger = logging.getLogger(__name__)

app = FastAPI(title="mergesum API", description="Exactly mergeable summaries", version=__version__)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"], allow_credentials=True,
    allow_methods=["*"], allow_headers=["*"],
)


class LoggingMiddleware(BaseHTTPMiddleware):
    async def dispatch(self, request, call_next):
        t0 = time.time()
        logger.info("Request: %s %s", request.method, request.url.path)
        resp = await call_next(request)
        logger.info("Response: %s (%.3fs)", resp.status_code, time.time() - t0)
        return resp


app.add_middleware(LoggingMiddleware)


@app.exception_handler(MergesumError)
async def mergesum_error(request: Request, exc: MergesumError):
    logger.warning("Rejected %s: %s", request.url.path, exc)
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.get("/")
def root():
    return {"message": "mergesum API is running", "status": "healthy"}


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


app.include_router(summaries_router)

if __name__ == "__main__":
    import uvicorn
    uvicorn.run("mergesum.main:app", host=settings.API_HOST, port=settings.API_PORT, reload=True)
