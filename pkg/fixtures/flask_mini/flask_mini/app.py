from .config import Config
from .ctx import RequestContext
from .globals import _cv_request
from .routing import Map, Rule
from .signals import request_finished, request_started
from .wrappers import Response


class Flask:
    def __init__(self, import_name):
        self.import_name = import_name
        self.config = Config(".", {"DEBUG": False})
        self.url_map = Map()
        self.view_functions = {}

    def add_url_rule(self, path, endpoint, view_func):
        self.url_map.add(Rule(path, endpoint))
        self.view_functions[endpoint] = view_func

    def route(self, path):
        def decorator(f):
            self.add_url_rule(path, f.__name__, f)
            return f

        return decorator

    def make_response(self, rv):
        if isinstance(rv, Response):
            return rv
        return Response(str(rv))

    def full_dispatch_request(self, ctx):
        request_started.send(self)
        endpoint = ctx.match_request()
        if endpoint is None:
            return Response("not found", 404)
        rv = self.view_functions[endpoint]()
        response = ctx.run_after_request(self.make_response(rv))
        request_finished.send(self)
        return response

    def wsgi_app(self, environ):
        ctx = RequestContext(self, environ)
        token = _cv_request.set(ctx)
        try:
            return self.full_dispatch_request(ctx)
        finally:
            _cv_request.reset(token)
