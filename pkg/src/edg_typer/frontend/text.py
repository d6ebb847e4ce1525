from __future__ import annotations

import ast
import textwrap


class LineMap:
    """Converts ast (line, utf-8 byte column) positions into string offsets."""

    def __init__(self, text: str) -> None:
        self.text = text
        self.lines = text.splitlines(keepends=True)
        self.starts = [0]
        for line in self.lines:
            self.starts.append(self.starts[-1] + len(line))

    def char_col(self, line: int, byte_col: int) -> int:
        if line - 1 >= len(self.lines):
            return 0
        raw = self.lines[line - 1]
        if raw.isascii():
            return byte_col
        return len(raw.encode("utf-8")[:byte_col].decode("utf-8", errors="ignore"))

    def offset(self, line: int, byte_col: int) -> int:
        if line - 1 >= len(self.lines):
            return len(self.text)
        return self.starts[line - 1] + self.char_col(line, byte_col)

    def node_start(self, node: ast.AST) -> int:
        return self.offset(node.lineno, node.col_offset)

    def node_end(self, node: ast.AST) -> int:
        return self.offset(node.end_lineno, node.end_col_offset)

    def line_text(self, line: int) -> str:
        return self.lines[line - 1] if 0 < line <= len(self.lines) else ""

    def segment_lines(self, start_line: int, end_line: int) -> str:
        return textwrap.dedent("".join(self.lines[start_line - 1 : end_line]))


def apply_edits(text: str, edits: list[tuple[int, int, str]]) -> str:
    """Apply non-overlapping ``(start, end, replacement)`` edits to ``text``."""
    out = []
    pos = 0
    for start, end, repl in sorted(edits, key=lambda e: (e[0], e[1])):
        if start < pos:
            raise ValueError(f"overlapping edits at offset {start}")
        out.append(text[pos:start])
        out.append(repl)
        pos = end
    out.append(text[pos:])
    return "".join(out)
