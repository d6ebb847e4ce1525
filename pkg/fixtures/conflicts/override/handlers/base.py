class Handler:
    def handle(self, event: str) -> None:
        print(event)
