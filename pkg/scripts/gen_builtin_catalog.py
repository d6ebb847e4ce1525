"""Regenerate the committed builtin attribute catalog.

Run once with the pinned interpreter; the output is checked in and the
metrics never import these types at evaluation time.

    python3 scripts/gen_builtin_catalog.py > src/edg_typer/data/builtin_attrs.json
"""

from __future__ import annotations

import collections
import collections.abc
import contextvars
import datetime
import decimal
import enum
import fractions
import io
import json
import logging
import pathlib
import platform
import re
import sys
import typing

from edg_typer.typeexpr import _ABC_NAMES

TYPES: dict[str, type] = {
    "object": object,
    "None": type(None),
    "int": int,
    "float": float,
    "complex": complex,
    "bool": bool,
    "str": str,
    "bytes": bytes,
    "bytearray": bytearray,
    "memoryview": memoryview,
    "list": list,
    "dict": dict,
    "set": set,
    "frozenset": frozenset,
    "tuple": tuple,
    "type": type,
    "range": range,
    "slice": slice,
    "BaseException": BaseException,
    "Exception": Exception,
    "collections.deque": collections.deque,
    "collections.defaultdict": collections.defaultdict,
    "collections.OrderedDict": collections.OrderedDict,
    "collections.Counter": collections.Counter,
    "collections.ChainMap": collections.ChainMap,
    "collections.abc.Set": collections.abc.Set,
    "re.Pattern": re.Pattern,
    "re.Match": re.Match,
    "contextvars.ContextVar": contextvars.ContextVar,
    "contextvars.Token": contextvars.Token,
    "pathlib.Path": pathlib.Path,
    "datetime.date": datetime.date,
    "datetime.datetime": datetime.datetime,
    "datetime.timedelta": datetime.timedelta,
    "decimal.Decimal": decimal.Decimal,
    "fractions.Fraction": fractions.Fraction,
    "enum.Enum": enum.Enum,
    "io.StringIO": io.StringIO,
    "io.BytesIO": io.BytesIO,
    "logging.Logger": logging.Logger,
    "typing.IO": typing.IO,
    "typing.TextIO": typing.TextIO,
    "typing.BinaryIO": typing.BinaryIO,
}
for _name in _ABC_NAMES:
    TYPES[f"collections.abc.{_name}"] = getattr(collections.abc, _name)


def raw_attrs(tp: type) -> list[str]:
    # MRO dicts rather than dir(): some classes (Enum) customise __dir__
    names: set[str] = set()
    for klass in tp.__mro__:
        names.update(vars(klass))
    return sorted(names)


def main() -> None:
    catalog = {
        "python": platform.python_version(),
        "object_attrs": raw_attrs(object),
        "types": {name: raw_attrs(tp) for name, tp in sorted(TYPES.items())},
    }
    json.dump(catalog, sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
