class CalcError(Exception):
    def __init__(self, message, position=0):
        super().__init__(message)
        self.position = position


class ParseError(CalcError):
    pass


class EvalError(CalcError):
    pass
