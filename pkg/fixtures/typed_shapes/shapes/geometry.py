from __future__ import annotations

import math
from collections.abc import Callable, Iterable
from typing import Optional, Union

UNIT: float = 1.0
NAMES: list[str] = ["circle", "square"]


class Shape:
    name: str = "shape"

    def area(self) -> float:
        return 0.0

    def scaled(self, factor: float) -> Shape:
        return self


class Circle(Shape):
    def __init__(self, radius: float) -> None:
        self.radius: float = radius

    def area(self) -> float:
        return math.pi * self.radius**2


class Square(Shape):
    def __init__(self, side: float) -> None:
        self.side: float = side

    def area(self) -> float:
        return self.side * self.side


def total_area(shapes: Iterable[Shape]) -> float:
    return sum(s.area() for s in shapes)


def by_name(shapes: list[Shape]) -> dict[str, list[Shape]]:
    out: dict[str, list[Shape]] = {}
    for s in shapes:
        out.setdefault(s.name, []).append(s)
    return out


def largest(shapes: list[Shape]) -> Optional[Shape]:
    return max(shapes, key=lambda s: s.area()) if shapes else None


def parse_size(text: str) -> Union[int, float]:
    return float(text) if "." in text else int(text)


def apply_all(shapes: list[Shape], fn: Callable[[Shape], float]) -> list[float]:
    return [fn(s) for s in shapes]


def label(shape: Shape, prefix: bytes = b"") -> str:
    return prefix.decode() + shape.name
