from .globals import _cv_request


def after_this_request(f):
    ctx = _cv_request.get(None)
    if ctx is None:
        raise RuntimeError("after_this_request() needs an active request")
    ctx._after_request_functions.append(f)
    return f


def url_for(endpoint):
    ctx = _cv_request.get(None)
    if ctx is None:
        raise RuntimeError("url_for() needs an active request")
    return ctx.app.url_map.build(endpoint)
