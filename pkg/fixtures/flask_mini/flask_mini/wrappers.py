class Request:
    def __init__(self, environ):
        self.environ = environ
        self.path = environ.get("PATH_INFO", "/")
        self.method = environ.get("REQUEST_METHOD", "GET")

    def is_json(self):
        return self.environ.get("CONTENT_TYPE", "") == "application/json"


class Response:
    default_status = 200

    def __init__(self, body="", status=None):
        self.body = body
        self.status = status if status is not None else self.default_status
        self.headers = {}

    def set_header(self, name, value):
        self.headers[name] = value

    def content_length(self):
        return len(self.body)
