from .nodes import BinOp, Call, Neg, Num, Var


def show(node):
    if isinstance(node, Num):
        return str(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return "-" + show(node.operand)
    if isinstance(node, BinOp):
        return "(" + show(node.left) + " " + node.op + " " + show(node.right) + ")"
    if isinstance(node, Call):
        return node.name + "(" + ", ".join(show(a) for a in node.args) + ")"
    return node.describe()
