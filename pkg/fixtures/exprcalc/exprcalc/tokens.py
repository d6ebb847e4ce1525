from .errors import ParseError

OPERATORS = "+-*/^(),"


class Token:
    def __init__(self, kind, text, position):
        self.kind = kind
        self.text = text
        self.position = position

    def is_op(self, text):
        return self.kind == "op" and self.text == text


def tokenize(source):
    out = []
    i = 0
    while i < len(source):
        ch = source[i]
        if ch.isspace():
            i += 1
        elif ch.isdigit() or ch == ".":
            start = i
            while i < len(source) and (source[i].isdigit() or source[i] == "."):
                i += 1
            out.append(Token("num", source[start:i], start))
        elif ch.isalpha():
            start = i
            while i < len(source) and source[i].isalnum():
                i += 1
            out.append(Token("name", source[start:i], start))
        elif ch in OPERATORS:
            out.append(Token("op", ch, i))
            i += 1
        else:
            raise ParseError("unexpected character " + ch, i)
    out.append(Token("end", "", len(source)))
    return out
