"""
FastAPI application serving the DeciLS-PBO solver over HTTP
"""
# Load environment variables from .env file
from dotenv import load_dotenv
load_dotenv()

from fastapi import FastAPI, HTTPException, status
from fastapi.responses import JSONResponse
from fastapi.middleware.cors import CORSMiddleware
import io
import os
import logging
import time
import asyncio

from config import Config, PRESETS
from models.pbo import CoefficientOverflowError, PBOInstance, TriviallyUnsatError
from models.schemas import (
    SolveRequest, SolveResponse, SolveStatus, VerifyRequest,
    VerificationReport, ErrorResponse, HealthResponse
)
from services.opb_service import OpbService, ParseError
from services.local_search_service import LocalSearchService
from services.verifier_service import VerifierService

# Configure logging
logging.basicConfig(
    level=Config.LOG_LEVEL,
    format=Config.LOG_FORMAT
)
logger = logging.getLogger(__name__)

# Initialize FastAPI app
app = FastAPI(
    title="DeciLS-PBO Solver API",
    description="Anytime local search for pseudo-Boolean optimization with decimation and care-driven weighting",
    version=Config.VERSION
)

# Configure CORS_ORIGINS environment variable for production (comma-separated list)
cors_origins = os.getenv("CORS_ORIGINS", "*").split(",")
app.add_middleware(
    CORSMiddleware,
    allow_origins=cors_origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Concurrency control: every solve keeps one core busy for its whole cutoff
SOLVE_SEMAPHORE = asyncio.Semaphore(Config.MAX_CONCURRENT_SOLVES)


def parse_instance(opb: str) -> PBOInstance:
    """Parse request OPB text, mapping input errors to 400"""
    try:
        return OpbService.parse_opb(io.StringIO(opb))
    except (ParseError, CoefficientOverflowError, TriviallyUnsatError) as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=f"Invalid OPB: {e}")


@app.get("/", response_model=dict)
async def root():
    """Root endpoint with API information"""
    return {
        "name": "DeciLS-PBO Solver API",
        "version": Config.VERSION,
        "endpoints": {
            "POST /solve": "Solve an OPB instance within a cutoff",
            "POST /verify": "Check a competition-format solution against an OPB instance",
            "GET /health": "Health check"
        },
        "docs": "/docs"
    }


@app.get("/health", response_model=HealthResponse)
async def health_check():
    """Health check endpoint"""
    return HealthResponse(status="healthy", version=Config.VERSION, presets=list(PRESETS))


@app.post("/solve", response_model=SolveResponse)
async def solve(request: SolveRequest):
    """
    Run the solver on the posted instance and return the best solution found
    """
    try:
        instance = OpbService.parse_opb(io.StringIO(request.opb))
    except TriviallyUnsatError as e:
        logger.info(f"Instance rejected at parse time: {e}")
        return SolveResponse(status=SolveStatus.UNSATISFIABLE, message=str(e))
    except (ParseError, CoefficientOverflowError) as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=f"Invalid OPB: {e}")

    params = request.to_run_config().to_params()
    async with SOLVE_SEMAPHORE:
        start_time = time.time()
        logger.info(
            f"Solving {instance.num_vars} variables / {len(instance.hard_constraints)} constraints "
            f"(preset={request.preset}, seed={params.seed}, cutoff={params.cutoff}s)"
        )
        # CPU-bound search runs in a worker thread to keep the event loop free
        result = await asyncio.to_thread(LocalSearchService.solve, instance, params)
        processing_time = time.time() - start_time

    if result.status == SolveStatus.SATISFIABLE:
        literals = [f"x{i}" if v else f"-x{i}" for i, v in enumerate(result.best.values, start=1)]
        message = f"Best cost {result.best_cost}"
    else:
        literals = None
        message = "No feasible solution found within the cutoff"

    return SolveResponse(
        status=result.status,
        message=message,
        cost=result.best_cost,
        literals=literals,
        improvements=result.improvements,
        statistics=result.statistics,
        processing_time=processing_time
    )


@app.post("/verify", response_model=VerificationReport)
async def verify(request: VerifyRequest):
    """Verify a solution given as 'v' lines"""
    instance = parse_instance(request.opb)
    try:
        _, assignment, _ = OpbService.read_solution(io.StringIO(request.solution), instance.num_vars)
    except ParseError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=f"Invalid solution: {e}")
    if assignment is None:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail="Solution has no 'v' lines")

    return VerifierService.verify(instance, assignment)


@app.exception_handler(HTTPException)
async def http_exception_handler(request, exc):
    """Custom HTTP exception handler"""
    return JSONResponse(
        status_code=exc.status_code,
        content=ErrorResponse(
            status="error",
            message=exc.detail
        ).model_dump()
    )


@app.exception_handler(Exception)
async def general_exception_handler(request, exc):
    """General exception handler"""
    logger.error(f"Unhandled exception: {str(exc)}", exc_info=True)
    return JSONResponse(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        content=ErrorResponse(
            status="error",
            message="Internal server error"
        ).model_dump()
    )


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=Config.PORT)
