from .errors import ParseError
from .nodes import BinOp, Call, Neg, Num, Var
from .tokens import tokenize


class Cursor:
    def __init__(self, tokens):
        self.tokens = tokens
        self.index = 0

    def peek(self):
        return self.tokens[self.index]

    def advance(self):
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def expect(self, text):
        tok = self.advance()
        if not tok.is_op(text):
            raise ParseError("expected " + text, tok.position)
        return tok


def parse_expr(cur):
    left = parse_term(cur)
    while cur.peek().is_op("+") or cur.peek().is_op("-"):
        op = cur.advance().text
        left = BinOp(op, left, parse_term(cur))
    return left


def parse_term(cur):
    left = parse_unary(cur)
    while cur.peek().is_op("*") or cur.peek().is_op("/"):
        op = cur.advance().text
        left = BinOp(op, left, parse_unary(cur))
    return left


def parse_unary(cur):
    if cur.peek().is_op("-"):
        cur.advance()
        return Neg(parse_unary(cur))
    return parse_power(cur)


def parse_power(cur):
    base = parse_atom(cur)
    if cur.peek().is_op("^"):
        cur.advance()
        return BinOp("^", base, parse_unary(cur))
    return base


def parse_atom(cur):
    tok = cur.advance()
    if tok.kind == "num":
        return Num(float(tok.text))
    if tok.kind == "name":
        if cur.peek().is_op("("):
            return parse_call(cur, tok.text)
        return Var(tok.text)
    if tok.is_op("("):
        inner = parse_expr(cur)
        cur.expect(")")
        return inner
    raise ParseError("unexpected token " + tok.text, tok.position)


def parse_call(cur, name):
    cur.expect("(")
    args = parse_args(cur)
    cur.expect(")")
    return Call(name, args)


def parse_args(cur):
    args = []
    if cur.peek().is_op(")"):
        return args
    args.append(parse_expr(cur))
    while cur.peek().is_op(","):
        cur.advance()
        args.append(parse_expr(cur))
    return args


def parse(source):
    cur = Cursor(tokenize(source))
    node = parse_expr(cur)
    if cur.peek().kind != "end":
        raise ParseError("trailing input", cur.peek().position)
    return node
