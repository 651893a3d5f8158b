"""Service layer: pydantic request/response schemas, stage handlers, and
the FastAPI application. The CLI calls the same handlers in-process."""
