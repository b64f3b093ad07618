#!/usr/bin/env python3
"""
Entry point for the mergesum HTTP service.
Run from project root: python run_server.py
"""
import logging

import uvicorn

from mergesum.core.config import settings

if __name__ == "__main__":
    logging.basicConfig(level=settings.LOG_LEVEL)
    logging.getLogger(__name__).info(
        "Starting mergesum API on %s:%d (docs at /docs)", settings.API_HOST, settings.API_PORT
    )
    uvicorn.run("mergesum.main:app", host=settings.API_HOST, port=settings.API_PORT, reload=False, log_level="info")
