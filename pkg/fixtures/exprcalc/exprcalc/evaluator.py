from .env import Environment
from .parser import parse

GLOBAL_ENV = Environment({"pi": 3.141592653589793, "e": 2.718281828459045})


def evaluate_source(source, variables=None):
    env = GLOBAL_ENV.child()
    for name, value in (variables or {}).items():
        env.variables[name] = value
    return parse(source).evaluate(env)


def evaluate_many(sources):
    return [evaluate_source(s) for s in sources]
