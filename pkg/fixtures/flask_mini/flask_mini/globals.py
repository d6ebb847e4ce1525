from contextvars import ContextVar

from .ctx import RequestContext

_cv_request: ContextVar[RequestContext] = ContextVar("flask_mini.request_ctx")


def current_request_context():
    ctx = _cv_request.get(None)
    if ctx is None:
        raise RuntimeError("working outside of request context")
    return ctx
