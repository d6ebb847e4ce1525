from .base import Handler


class LoggingHandler(Handler):
    def handle(self, event):
        print("log", event)
