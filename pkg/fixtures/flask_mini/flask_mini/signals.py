class Signal:
    def __init__(self, name):
        self.name = name
        self.receivers = []

    def connect(self, receiver):
        self.receivers.append(receiver)
        return receiver

    def send(self, sender):
        return [receiver(sender) for receiver in self.receivers]


request_started = Signal("request-started")
request_finished = Signal("request-finished")
