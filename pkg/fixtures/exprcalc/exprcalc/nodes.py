class Node:
    def evaluate(self, env):
        raise NotImplementedError

    def describe(self):
        return type(self).__name__


class Num(Node):
    def __init__(self, value):
        self.value = value

    def evaluate(self, env):
        return self.value


class Var(Node):
    def __init__(self, name):
        self.name = name

    def evaluate(self, env):
        return env.lookup(self.name)


class BinOp(Node):
    def __init__(self, op, left, right):
        self.op = op
        self.left = left
        self.right = right

    def evaluate(self, env):
        return env.apply(self.op, self.left.evaluate(env), self.right.evaluate(env))


class Neg(Node):
    def __init__(self, operand):
        self.operand = operand

    def evaluate(self, env):
        return -self.operand.evaluate(env)


class Call(Node):
    def __init__(self, name, args):
        self.name = name
        self.args = args

    def evaluate(self, env):
        return env.call(self.name, [a.evaluate(env) for a in self.args])
