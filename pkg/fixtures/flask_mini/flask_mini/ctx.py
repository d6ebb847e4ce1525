from .wrappers import Request


class AppContext:
    def __init__(self, app):
        self.app = app
        self.depth = 0

    def push(self):
        self.depth += 1

    def pop(self):
        self.depth -= 1


class RequestContext:
    def __init__(self, app, environ):
        self.app = app
        self.request = Request(environ)
        self._after_request_functions = []

    def match_request(self):
        return self.app.url_map.match(self.request.path)

    def run_after_request(self, response):
        for func in self._after_request_functions:
            response = func(response)
        return response
