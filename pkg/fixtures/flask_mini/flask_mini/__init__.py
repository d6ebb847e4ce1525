from .app import Flask
from .ctx import AppContext, RequestContext
from .helpers import after_this_request, url_for
from .wrappers import Request, Response

__all__ = ["AppContext", "Flask", "Request", "RequestContext", "Response", "after_this_request", "url_for"]
