import math

from .errors import EvalError

FUNCTIONS = {"sqrt": math.sqrt, "exp": math.exp}


class Environment:
    def __init__(self, variables=None, parent=None):
        self.variables = dict(variables or {})
        self.parent = parent

    def lookup(self, name):
        if name in self.variables:
            return self.variables[name]
        if self.parent is not None:
            return self.parent.lookup(name)
        raise EvalError("unknown variable " + name)

    def apply(self, op, left, right):
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if op == "/":
            if right == 0:
                raise EvalError("division by zero")
            return left / right
        return left ** right

    def call(self, name, args):
        func = FUNCTIONS.get(name)
        if func is None:
            raise EvalError("unknown function " + name)
        return func(*args)

    def child(self):
        return Environment({}, self)
