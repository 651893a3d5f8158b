"""FastAPI application exposing every pipeline stage.

Error mapping mirrors the CLI's exit codes: configuration problems are
422, missing artifacts 404, domain failures 400.
"""

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import ConfigError, MissingArtifactError, PrecedentError
from . import handlers, schemas


def create_app() -> FastAPI:
    app = FastAPI(title="precedent", version=__version__)

    @app.exception_handler(ConfigError)
    async def _config_error(request: Request, exc: ConfigError):
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @app.exception_handler(MissingArtifactError)
    async def _missing_artifact(request: Request, exc: MissingArtifactError):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(PrecedentError)
    async def _domain_error(request: Request, exc: PrecedentError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/v1/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/v1/index", response_model=schemas.IndexResponse)
    def index(req: schemas.IndexRequest):
        return handlers.handle_index(req)

    @app.post("/v1/reformulate", response_model=schemas.ReformulateResponse)
    def reformulate(req: schemas.ReformulateRequest):
        return handlers.handle_reformulate(req)

    @app.post("/v1/search", response_model=schemas.SearchResponse)
    def search(req: schemas.SearchRequest):
        return handlers.handle_search(req)

    @app.post("/v1/rerank", response_model=schemas.RerankResponse)
    def rerank(req: schemas.RerankRequest):
        return handlers.handle_rerank(req)

    @app.post("/v1/fuse", response_model=schemas.FuseResponse)
    def fuse(req: schemas.FuseRequest):
        return handlers.handle_fuse(req)

    @app.post("/v1/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate(req: schemas.EvaluateRequest):
        return handlers.handle_evaluate(req)

    @app.post("/v1/sweep-cutoff", response_model=schemas.SweepCutoffResponse)
    def sweep_cutoff(req: schemas.SweepCutoffRequest):
        return handlers.handle_sweep_cutoff(req)

    @app.post("/v1/tune", response_model=schemas.TuneResponse)
    def tune(req: schemas.TuneRequest):
        return handlers.handle_tune(req)

    @app.post("/v1/synth", response_model=schemas.SynthResponse)
    def synth(req: schemas.SynthRequest):
        return handlers.handle_synth(req)

    @app.post("/v1/pipeline", response_model=schemas.PipelineResponse)
    def pipeline(req: schemas.PipelineRequest):
        return handlers.handle_pipeline(req)

    return app


app = create_app()
